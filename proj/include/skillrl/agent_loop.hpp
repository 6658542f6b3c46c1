#pragma once
// Runs one task end to end: prompt assembly with skill context, the
// act/observe loop under turn/token limits, skill lifecycle detection
// (generation, usage, update, automatic save), and trajectory recording with
// environment-token masking.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "skillrl/common.hpp"
#include "skillrl/policy.hpp"
#include "skillrl/skill_library.hpp"
#include "skillrl/world.hpp"

namespace skillrl {

struct Limits {
  int max_turns = 40;
  int turn_token_cap = 1500;
  long context_token_cap = 28048;
};

enum class Termination { Completed, MaxTurns, ContextLimit, NoCode, PolicyFailure };

inline std::string termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::MaxTurns: return "max_turns";
    case Termination::ContextLimit: return "context_limit";
    case Termination::NoCode: return "no_code";
    case Termination::PolicyFailure: return "policy_failure";
  }
  return "completed";
}

inline Termination termination_from_name(const std::string& s) {
  if (s == "max_turns") return Termination::MaxTurns;
  if (s == "context_limit") return Termination::ContextLimit;
  if (s == "no_code") return Termination::NoCode;
  if (s == "policy_failure") return Termination::PolicyFailure;
  return Termination::Completed;
}

struct TurnRecord {
  Actor actor;
  std::string text;
  int token_count = 0;
  bool mask = false;  // true iff actor == Agent: the turn trains
  std::optional<std::vector<std::pair<long, double>>> logprobs;
};

struct SkillEvent {
  enum class Kind { Generation, Usage, Update, Save } kind;
  std::string skill_name;
  int turn_index = 0;  // 1-based agent turn
  bool execution_ok = false;
};

inline std::string skill_event_kind_name(SkillEvent::Kind k) {
  switch (k) {
    case SkillEvent::Kind::Generation: return "generation";
    case SkillEvent::Kind::Usage: return "usage";
    case SkillEvent::Kind::Update: return "update";
    case SkillEvent::Kind::Save: return "save";
  }
  return "generation";
}

inline SkillEvent::Kind skill_event_kind_from_name(const std::string& s) {
  if (s == "usage") return SkillEvent::Kind::Usage;
  if (s == "update") return SkillEvent::Kind::Update;
  if (s == "save") return SkillEvent::Kind::Save;
  return SkillEvent::Kind::Generation;
}

struct Trajectory {
  std::string task_id;
  std::string scenario_id;
  std::vector<TurnRecord> turns;
  double outcome_r = 0.0;
  int step_count = 0;
  long gen_token_count = 0;
  Termination termination = Termination::Completed;
  std::vector<SkillEvent> skill_events;
  SkillLibrary library_at_start;
  SkillLibrary library_at_end;
};

// ---------------------------------------------------------------------------
// Prompt assembly

inline const std::string& default_incontext_example() {
  static const std::string kExample =
      "Task: Close out the chore below and email the confirmation to the manager. "
      "job: t0_exa chore: chore_mop manager: mona_q2w account: jack_p9r password: pw_abc123\n"
      "Turn 1:\n"
      "def finish_chore(user, pw, chore, mgr):\n"
      "  # completes the chore and mails the manager\n"
      "  api auth.login(user, pw)\n"
      "  api todo.complete(user, chore)\n"
      "  api mail.send(user, mgr, chore)\n"
      "call finish_chore(\"jack_p9r\", \"pw_abc123\", \"chore_mop\", \"mona_q2w\")\n"
      "Turn 2:\n"
      "done()";
  return kExample;
}

inline const std::string& default_prompt_template() {
  static const std::string kTemplate =
      "You operate a simulated suite of apps. Reply with code in the action "
      "language on every turn. Prefer defining one reusable function for the "
      "task, then call it; finish with done(). Statements: api, let, def, "
      "call, for, print, done.\n"
      "\n"
      "# Worked example\n"
      "{{example}}\n"
      "\n"
      "# Skill library\n"
      "{{skills}}\n"
      "\n"
      "# Task\n"
      "{{instruction}}\n";
  return kTemplate;
}

inline std::string render_skill(const Skill& s) {
  std::string out = "def " + s.name + "(";
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    if (i) out += ", ";
    out += s.params[i];
  }
  out += "):\n";
  std::size_t start = 0;
  while (start <= s.body.size()) {
    std::size_t end = s.body.find('\n', start);
    if (end == std::string::npos) end = s.body.size();
    out += "  " + s.body.substr(start, end - start) + "\n";
    start = end + 1;
  }
  out.pop_back();
  return out;
}

inline std::string assemble_prompt(const Task& task, const std::vector<Skill>& skills,
                                   const std::string& prompt_template) {
  for (const char* placeholder : {"{{example}}", "{{skills}}", "{{instruction}}"})
    if (prompt_template.find(placeholder) == std::string::npos)
      throw ConfigError(std::string("prompt template is missing ") + placeholder);

  std::string skill_block;
  if (skills.empty()) {
    skill_block =
        "No skills available yet. Define new functions with def; they are "
        "saved to the library after a successful call.";
  } else {
    for (std::size_t i = 0; i < skills.size(); ++i) {
      if (i) skill_block += "\n\n";
      skill_block += render_skill(skills[i]);
    }
  }

  std::string out = prompt_template;
  auto substitute = [&out](const std::string& key, const std::string& value) {
    std::size_t pos;
    while ((pos = out.find(key)) != std::string::npos) out.replace(pos, key.size(), value);
  };
  substitute("{{example}}", default_incontext_example());
  substitute("{{skills}}", skill_block);
  substitute("{{instruction}}", task.instruction);
  return out;
}

inline std::string reminder_line(const Task& task) {
  return "Reminder: task = " + task.instruction + ". Continue.";
}

// ---------------------------------------------------------------------------
// run_task

struct RunTaskResult {
  Trajectory trajectory;
  SkillLibrary library;
};

inline RunTaskResult run_task(const Policy& policy, const Task& task, SkillLibrary library,
                              const Limits& limits = {},
                              const std::string& prompt_template = default_prompt_template()) {
  Session session = reset(task);
  Trajectory traj;
  traj.task_id = task.task_id;
  traj.scenario_id = task.scenario_id;
  traj.library_at_start = library;

  std::vector<Skill> skill_context = library.select_for_context(SelectAll{});
  for (const Skill& s : skill_context) {
    auto parsed = dsl::parse(s.body);
    if (parsed.ok())
      session.functions[s.name] =
          dsl::FunctionDef{s.name, s.params, parsed.program->stmts, s.body};
  }

  std::string system_prompt = assemble_prompt(task, skill_context, prompt_template);
  traj.turns.push_back(
      {Actor::User, task.instruction, ws_token_count(task.instruction), false, {}});
  long context_tokens = ws_token_count(system_prompt) + traj.turns.back().token_count;

  std::set<std::string> pending_save;  // defined this session, no clean call yet
  std::map<std::string, std::size_t> open_def_event;

  Termination term = Termination::MaxTurns;
  while (traj.step_count < limits.max_turns) {
    PolicyRequest request;
    request.system_prompt = system_prompt;
    for (const TurnRecord& t : traj.turns) request.turns.push_back({t.actor, t.text});
    request.skill_context = skill_context;
    request.token_budget_remaining =
        std::max<long>(0, limits.context_token_cap - context_tokens);

    PolicyResponse resp;
    try {
      resp = policy(request);
    } catch (const PolicyFailure&) {
      term = Termination::PolicyFailure;
      break;
    }

    std::string text = resp.text;
    int tokens = resp.token_count;
    auto logprobs = resp.token_logprobs;
    if (tokens > limits.turn_token_cap) {
      text = truncate_ws_tokens(text, limits.turn_token_cap);
      tokens = ws_token_count(text);
      if (logprobs && static_cast<int>(logprobs->size()) > tokens)
        logprobs->resize(static_cast<std::size_t>(tokens));
    }

    traj.turns.push_back({Actor::Agent, text, tokens, true, logprobs});
    traj.step_count += 1;
    traj.gen_token_count += tokens;
    context_tokens += tokens;

    if (!dsl::looks_like_code(text)) {
      term = Termination::NoCode;
      break;
    }
    if (context_tokens > limits.context_token_cap) {
      term = Termination::ContextLimit;
      break;
    }

    Observation obs = execute(session, text);

    // Skill lifecycle. A def opens (or reopens) a pending save; the first
    // error-free call of a pending definition saves it to the library. Calls
    // to names that existed at task start are usage events either way.
    for (const dsl::ExecEvent& ev : session.last.events) {
      if (ev.kind == dsl::ExecEvent::Def) {
        SkillEvent::Kind kind = library.contains(ev.name) ? SkillEvent::Kind::Update
                                                          : SkillEvent::Kind::Generation;
        traj.skill_events.push_back({kind, ev.name, traj.step_count, false});
        open_def_event[ev.name] = traj.skill_events.size() - 1;
        pending_save.insert(ev.name);
      } else if (ev.kind == dsl::ExecEvent::CallUser) {
        if (traj.library_at_start.contains(ev.name)) {
          traj.skill_events.push_back(
              {SkillEvent::Kind::Usage, ev.name, traj.step_count, ev.ok});
          library.record_usage(ev.name, ev.ok);
        }
        if (ev.ok && pending_save.count(ev.name)) {
          auto fn = session.functions.find(ev.name);
          if (fn != session.functions.end()) {
            Skill skill;
            skill.name = ev.name;
            skill.params = fn->second.params;
            skill.body = fn->second.body_source;
            skill.origin_task_id = task.task_id;
            skill.origin_scenario_id = task.scenario_id;
            skill.origin_query = task.instruction;
            skill.created_turn = traj.step_count;
            library.save_skill(skill);
            if (auto it = open_def_event.find(ev.name); it != open_def_event.end())
              traj.skill_events[it->second].execution_ok = true;
            traj.skill_events.push_back(
                {SkillEvent::Kind::Save, ev.name, traj.step_count, true});
            pending_save.erase(ev.name);
          }
        }
      }
    }

    std::string env_text = obs.text;
    if (!env_text.empty() && env_text.back() != '\n') env_text += '\n';
    env_text += reminder_line(task);
    traj.turns.push_back({Actor::Environment, env_text, ws_token_count(env_text), false, {}});
    context_tokens += traj.turns.back().token_count;

    if (session.completed) {
      term = Termination::Completed;
      break;
    }
    if (context_tokens > limits.context_token_cap) {
      term = Termination::ContextLimit;
      break;
    }
  }

  traj.termination = term;
  traj.outcome_r = evaluate(session);
  traj.library_at_end = library;
  return {std::move(traj), std::move(library)};
}

// The 1_skill indicator: true iff some call of a skill that existed at task
// start executed without error in this trajectory.
inline bool detect_skill_usage(const Trajectory& traj) {
  for (const SkillEvent& e : traj.skill_events)
    if (e.kind == SkillEvent::Kind::Usage && e.execution_ok &&
        traj.library_at_start.contains(e.skill_name))
      return true;
  return false;
}

}  // namespace skillrl
