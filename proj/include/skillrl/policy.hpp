#pragma once
// Pluggable action generators. Scripted and stochastic policies are pure
// functions of (request, seed) used as test oracles and rollout drivers; the
// remote adapter speaks chat-completion JSON to a served model.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillrl/common.hpp"
#include "skillrl/skill_library.hpp"
#include "skillrl/world.hpp"

namespace skillrl {

enum class Actor { User, Agent, Environment };

inline std::string actor_name(Actor a) {
  switch (a) {
    case Actor::User: return "user";
    case Actor::Agent: return "agent";
    case Actor::Environment: return "environment";
  }
  return "user";
}

inline Actor actor_from_name(const std::string& s) {
  if (s == "agent") return Actor::Agent;
  if (s == "environment") return Actor::Environment;
  return Actor::User;
}

struct PolicyRequest {
  struct Turn {
    Actor actor;
    std::string text;
  };
  std::string system_prompt;
  std::vector<Turn> turns;          // user task statement first, then agent/env
  std::vector<Skill> skill_context; // skills already rendered into the prompt
  long token_budget_remaining = 0;
};

struct PolicyResponse {
  std::string text;
  int token_count = 0;
  // (token id surrogate, logprob); present only when the backend supplies it.
  std::optional<std::vector<std::pair<long, double>>> token_logprobs;
};

using Policy = std::function<PolicyResponse(const PolicyRequest&)>;

// ---------------------------------------------------------------------------
// Script table: per instruction template, the turn programs for exploration,
// the canonical define-then-call, and direct skill usage.

using ScriptParams = std::map<std::string, std::string>;

struct ScriptEntry {
  int template_id = 0;
  std::string skill_name;
  std::function<std::vector<std::string>(const ScriptParams&)> explore;
  std::function<std::string(const ScriptParams&)> define_and_call;
  std::function<std::string(const ScriptParams&)> use_skill;
};

using ScriptTable = std::vector<ScriptEntry>;

namespace detail {

inline std::string quoted(const std::string& s) { return "\"" + s + "\""; }

inline bool text_has_error_line(std::string_view text) {
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(
        start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (line.substr(0, 6) == "error:") return true;
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return false;
}

inline bool text_calls_skill(std::string_view text, const std::string& skill) {
  std::string needle = "call " + skill + "(";
  return text.find(needle) != std::string_view::npos;
}

}  // namespace detail

// Canonical MiniWorld programs, one entry per instruction template.
inline ScriptTable miniworld_script_table() {
  auto quoted = [](const std::string& s) { return "\"" + s + "\""; };
  ScriptTable table;

  auto creds = [](const ScriptParams& p) {
    return std::pair<std::string, std::string>(p.at("account"), p.at("password"));
  };
  auto login_line = [creds, quoted](const ScriptParams& p) {
    auto [u, pw] = creds(p);
    return "api auth.login(" + quoted(u) + ", " + quoted(pw) + ")";
  };

  {  // pay_rent
    ScriptEntry e;
    e.template_id = 0;
    e.skill_name = "pay_rent";
    e.explore = [login_line, creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return std::vector<std::string>{
          login_line(p), "let b = api venmo.balance(" + quoted(u) + ")\nprint(b)"};
    };
    auto call_line = [creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return "call pay_rent(" + quoted(u) + ", " + quoted(pw) + ", " +
             quoted(p.at("friend")) + ", " + p.at("amount") + ")";
    };
    e.define_and_call = [call_line](const ScriptParams& p) {
      return "def pay_rent(user, pw, to, amount):\n"
             "  # sends one rent payment\n"
             "  api auth.login(user, pw)\n"
             "  api venmo.transfer(user, to, amount)\n" +
             call_line(p);
    };
    e.use_skill = [call_line](const ScriptParams& p) { return call_line(p) + "\ndone()"; };
    table.push_back(e);
  }
  {  // note_items
    ScriptEntry e;
    e.template_id = 1;
    e.skill_name = "note_items";
    e.explore = [login_line, creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return std::vector<std::string>{
          login_line(p), "let items = api shop.items(" + quoted(u) + ")\nprint(items)"};
    };
    auto call_line = [creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return "call note_items(" + quoted(u) + ", " + quoted(pw) + ", " +
             quoted(p.at("notebook")) + ")";
    };
    e.define_and_call = [call_line](const ScriptParams& p) {
      return "def note_items(user, pw, nb):\n"
             "  # copies every shopping item into notes\n"
             "  api auth.login(user, pw)\n"
             "  let items = api shop.items(user)\n"
             "  for it in items:\n"
             "    api notes.create(user, nb, it)\n" +
             call_line(p);
    };
    e.use_skill = [call_line](const ScriptParams& p) { return call_line(p) + "\ndone()"; };
    table.push_back(e);
  }
  {  // like_artist
    ScriptEntry e;
    e.template_id = 2;
    e.skill_name = "like_artist";
    e.explore = [login_line, creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return std::vector<std::string>{
          login_line(p), "let songs = api music.by_artist(" + quoted(u) + ", " +
                             quoted(p.at("artist")) + ")\nprint(songs)"};
    };
    auto call_line = [creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return "call like_artist(" + quoted(u) + ", " + quoted(pw) + ", " +
             quoted(p.at("artist")) + ")";
    };
    e.define_and_call = [call_line](const ScriptParams& p) {
      return "def like_artist(user, pw, artist):\n"
             "  # likes every track by the artist\n"
             "  api auth.login(user, pw)\n"
             "  let songs = api music.by_artist(user, artist)\n"
             "  for s in songs:\n"
             "    api music.like(user, s.title)\n" +
             call_line(p);
    };
    e.use_skill = [call_line](const ScriptParams& p) { return call_line(p) + "\ndone()"; };
    table.push_back(e);
  }
  {  // finish_chore
    ScriptEntry e;
    e.template_id = 3;
    e.skill_name = "finish_chore";
    e.explore = [login_line, creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return std::vector<std::string>{
          login_line(p), "let items = api todo.items(" + quoted(u) + ")\nprint(items)"};
    };
    auto call_line = [creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return "call finish_chore(" + quoted(u) + ", " + quoted(pw) + ", " +
             quoted(p.at("chore")) + ", " + quoted(p.at("manager")) + ")";
    };
    e.define_and_call = [call_line](const ScriptParams& p) {
      return "def finish_chore(user, pw, chore, mgr):\n"
             "  # completes the chore and mails the manager\n"
             "  api auth.login(user, pw)\n"
             "  api todo.complete(user, chore)\n"
             "  api mail.send(user, mgr, chore)\n" +
             call_line(p);
    };
    e.use_skill = [call_line](const ScriptParams& p) { return call_line(p) + "\ndone()"; };
    table.push_back(e);
  }
  {  // repay_all
    ScriptEntry e;
    e.template_id = 4;
    e.skill_name = "repay_all";
    e.explore = [login_line, creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return std::vector<std::string>{
          login_line(p), "let mates = api phone.roommates(" + quoted(u) + ")\nprint(mates)"};
    };
    auto call_line = [creds, quoted](const ScriptParams& p) {
      auto [u, pw] = creds(p);
      return "call repay_all(" + quoted(u) + ", " + quoted(pw) + ", " + p.at("amount") + ")";
    };
    e.define_and_call = [call_line](const ScriptParams& p) {
      return "def repay_all(user, pw, amount):\n"
             "  # repays each roommate the same amount\n"
             "  api auth.login(user, pw)\n"
             "  let mates = api phone.roommates(user)\n"
             "  for r in mates:\n"
             "    api venmo.transfer(user, r, amount)\n" +
             call_line(p);
    };
    e.use_skill = [call_line](const ScriptParams& p) { return call_line(p) + "\ndone()"; };
    table.push_back(e);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Scripted policy: skill usage when an applicable skill is in context, the
// define-then-call program otherwise, and a corrected redefinition after an
// error observation.

namespace detail {

struct ScriptDecision {
  std::string text;
  bool is_code = true;
};

inline ScriptDecision scripted_decision(const ScriptTable& table,
                                        const PolicyRequest& request) {
  if (request.turns.empty() || request.turns.front().actor != Actor::User)
    return {"No task statement found.", false};
  const std::string& instruction = request.turns.front().text;
  auto tmpl = instruction_template_id(instruction);
  const ScriptEntry* entry = nullptr;
  if (tmpl)
    for (const ScriptEntry& e : table)
      if (e.template_id == *tmpl) entry = &e;
  if (!entry) return {"No applicable script for this task.", false};

  ScriptParams params = parse_instruction_params(instruction);

  // Transcript-driven progress: a solved task means some issued call of the
  // canonical skill was answered without an error.
  bool solved = false;
  int successful_actions = 0;
  bool last_env_error = false;
  for (std::size_t i = 0; i + 1 < request.turns.size(); ++i) {
    if (request.turns[i].actor != Actor::Agent) continue;
    if (request.turns[i + 1].actor != Actor::Environment) continue;
    bool err = text_has_error_line(request.turns[i + 1].text);
    if (!err) {
      ++successful_actions;
      if (text_calls_skill(request.turns[i].text, entry->skill_name)) solved = true;
    }
  }
  if (!request.turns.empty() && request.turns.back().actor == Actor::Environment)
    last_env_error = text_has_error_line(request.turns.back().text);

  if (solved) return {"done()"};
  if (last_env_error) return {entry->define_and_call(params)};

  bool skill_available = false;
  for (const Skill& s : request.skill_context)
    if (s.name == entry->skill_name) skill_available = true;
  if (skill_available) return {entry->use_skill(params)};

  std::vector<std::string> explore = entry->explore(params);
  if (successful_actions < static_cast<int>(explore.size()))
    return {explore[static_cast<std::size_t>(successful_actions)]};
  return {entry->define_and_call(params)};
}

}  // namespace detail

inline Policy scripted_policy(ScriptTable table) {
  return [table = std::move(table)](const PolicyRequest& request) {
    auto decision = detail::scripted_decision(table, request);
    PolicyResponse resp;
    resp.text = decision.text;
    resp.token_count = ws_token_count(resp.text);
    return resp;
  };
}

// Like scripted_policy, but with seeded probability error_rate the turn is
// corrupted: either the password argument is wrong (a failing action) or the
// response is prose without code. Reproducible per (seed, task, turn index).
inline Policy stochastic_policy(ScriptTable table, std::uint64_t seed, double error_rate) {
  if (error_rate < 0.0 || error_rate > 1.0)
    throw std::invalid_argument("stochastic_policy: error_rate must be in [0,1]");
  return [table = std::move(table), seed, error_rate](const PolicyRequest& request) {
    auto decision = detail::scripted_decision(table, request);
    int turn_index = 0;
    for (const auto& t : request.turns)
      if (t.actor == Actor::Agent) ++turn_index;
    std::uint64_t task_hash =
        request.turns.empty() ? 0 : fnv1a64(request.turns.front().text);
    SplitMix rng(mix_seed(seed, task_hash, 0xac710eull,
                          static_cast<std::uint64_t>(turn_index)));
    PolicyResponse resp;
    resp.text = decision.text;
    if (decision.is_code && rng.chance(error_rate)) {
      bool corrupted = false;
      if (rng.below(2) == 0) {
        // wrong argument: swap the password for a failing one
        std::map<std::string, std::string> params;
        if (!request.turns.empty())
          params = parse_instruction_params(request.turns.front().text);
        auto it = params.find("password");
        if (it != params.end()) {
          std::string wrong = "\"wrong_pw\"";
          std::string needle = "\"" + it->second + "\"";
          std::size_t pos = 0;
          while ((pos = resp.text.find(needle, pos)) != std::string::npos) {
            resp.text.replace(pos, needle.size(), wrong);
            pos += wrong.size();
            corrupted = true;
          }
        }
      }
      if (!corrupted)
        resp.text = "I believe the task is handled; nothing further to run.";
    }
    resp.token_count = ws_token_count(resp.text);
    return resp;
  };
}

// ---------------------------------------------------------------------------
// Remote adapter: chat-completion JSON over HTTP (see docs/wire_formats.md).
// Transport and HTTP errors surface as PolicyFailure, which run_task records
// as a policy_failure termination.

struct RemoteConfig {
  std::string endpoint_url;  // e.g. "http://127.0.0.1:8088"
  std::string model;
  double temperature = 0.0;
  std::string path = "/v1/chat/completions";
  std::string auth_token_env = "SKILLRL_API_TOKEN";
};

// remote_policy(config) lives in remote_policy.hpp so translation units that
// never talk to an endpoint do not pull in httplib.

}  // namespace skillrl
