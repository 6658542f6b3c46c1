#pragma once
// Trajectory logs: JSONL with one turn record per line and a trailer record
// carrying the outcome, skill events, and library snapshots. Logs replay
// byte-exactly through a fresh session.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillrl/agent_loop.hpp"

namespace skillrl {

inline nlohmann::json turn_to_json(const TurnRecord& t) {
  nlohmann::json j = {{"type", "turn"},
                      {"actor", actor_name(t.actor)},
                      {"text", t.text},
                      {"token_count", t.token_count},
                      {"mask", t.mask}};
  if (t.logprobs) {
    nlohmann::json lps = nlohmann::json::array();
    for (const auto& [id, lp] : *t.logprobs) lps.push_back({id, lp});
    j["logprobs"] = lps;
  }
  return j;
}

inline TurnRecord turn_from_json(const nlohmann::json& j) {
  TurnRecord t;
  t.actor = actor_from_name(j.at("actor").get<std::string>());
  j.at("text").get_to(t.text);
  j.at("token_count").get_to(t.token_count);
  j.at("mask").get_to(t.mask);
  if (j.contains("logprobs")) {
    std::vector<std::pair<long, double>> lps;
    for (const auto& item : j["logprobs"])
      lps.emplace_back(item.at(0).get<long>(), item.at(1).get<double>());
    t.logprobs = std::move(lps);
  }
  return t;
}

inline nlohmann::json skill_event_to_json(const SkillEvent& e) {
  return {{"kind", skill_event_kind_name(e.kind)},
          {"skill_name", e.skill_name},
          {"turn_index", e.turn_index},
          {"execution_ok", e.execution_ok}};
}

inline SkillEvent skill_event_from_json(const nlohmann::json& j) {
  SkillEvent e;
  e.kind = skill_event_kind_from_name(j.at("kind").get<std::string>());
  j.at("skill_name").get_to(e.skill_name);
  j.at("turn_index").get_to(e.turn_index);
  j.at("execution_ok").get_to(e.execution_ok);
  return e;
}

inline std::string trajectory_to_jsonl(const Trajectory& traj) {
  std::string out;
  for (const TurnRecord& t : traj.turns) {
    out += turn_to_json(t).dump();
    out += '\n';
  }
  nlohmann::json events = nlohmann::json::array();
  for (const SkillEvent& e : traj.skill_events) events.push_back(skill_event_to_json(e));
  nlohmann::json trailer = {{"type", "trailer"},
                            {"task_id", traj.task_id},
                            {"scenario_id", traj.scenario_id},
                            {"outcome_r", traj.outcome_r},
                            {"step_count", traj.step_count},
                            {"gen_token_count", traj.gen_token_count},
                            {"termination", termination_name(traj.termination)},
                            {"skill_events", events},
                            {"library_at_start", traj.library_at_start.entries()},
                            {"library_at_end", traj.library_at_end.entries()}};
  out += trailer.dump();
  out += '\n';
  return out;
}

inline Trajectory trajectory_from_jsonl(std::string_view text) {
  Trajectory traj;
  bool saw_trailer = false;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (!line.empty()) {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw std::runtime_error("trajectory parse error at line " + std::to_string(line_no));
      if (j.at("type") == "turn") {
        traj.turns.push_back(turn_from_json(j));
      } else {
        saw_trailer = true;
        j.at("task_id").get_to(traj.task_id);
        j.at("scenario_id").get_to(traj.scenario_id);
        j.at("outcome_r").get_to(traj.outcome_r);
        j.at("step_count").get_to(traj.step_count);
        j.at("gen_token_count").get_to(traj.gen_token_count);
        traj.termination = termination_from_name(j.at("termination").get<std::string>());
        for (const auto& e : j.at("skill_events"))
          traj.skill_events.push_back(skill_event_from_json(e));
        for (const auto& s : j.at("library_at_start"))
          traj.library_at_start.insert_raw(s.get<Skill>());
        for (const auto& s : j.at("library_at_end"))
          traj.library_at_end.insert_raw(s.get<Skill>());
      }
    }
    start = end + 1;
  }
  if (!saw_trailer) throw std::runtime_error("trajectory log has no trailer record");
  return traj;
}

// ---------------------------------------------------------------------------
// Replay: re-executes the recorded agent turns against a fresh session and
// verifies every environment turn and the final outcome byte-for-byte.

struct ReplayReport {
  bool ok = true;
  std::string detail;
};

inline ReplayReport replay_trajectory(const Task& task, const Trajectory& traj) {
  Session session = reset(task);
  for (const Skill& s : traj.library_at_start.entries()) {
    auto parsed = dsl::parse(s.body);
    if (parsed.ok())
      session.functions[s.name] =
          dsl::FunctionDef{s.name, s.params, parsed.program->stmts, s.body};
  }

  for (std::size_t i = 0; i < traj.turns.size(); ++i) {
    if (traj.turns[i].actor != Actor::Agent) continue;
    // An agent turn executed iff an environment turn follows it; a trailing
    // agent turn ended the episode (no_code, context cap, turn cap) unrun.
    if (i + 1 >= traj.turns.size() || traj.turns[i + 1].actor != Actor::Environment)
      break;
    Observation obs = execute(session, traj.turns[i].text);
    std::string env_text = obs.text;
    if (!env_text.empty() && env_text.back() != '\n') env_text += '\n';
    env_text += reminder_line(task);
    if (env_text != traj.turns[i + 1].text)
      return {false, "environment turn " + std::to_string(i + 1) + " diverged"};
  }
  double r = evaluate(session);
  if (r != traj.outcome_r)
    return {false, "outcome " + std::to_string(r) + " != recorded " +
                       std::to_string(traj.outcome_r)};
  return {};
}

}  // namespace skillrl
