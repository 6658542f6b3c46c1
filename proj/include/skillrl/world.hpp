#pragma once
// MiniWorld: a deterministic, scenario-structured simulated app world.
// Scenarios hold three sibling tasks instantiated from one instruction
// template under different simulated users. Tasks are graded by equal-weighted
// state checks producing a completion rate in [0,1]. Agent code runs through
// the action-DSL interpreter against per-session state.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillrl/common.hpp"
#include "skillrl/dsl.hpp"

namespace skillrl {

using dsl::Value;

constexpr std::size_t kMaxObservationChars = 12000;
inline const std::string kTruncationNotice = "Observation truncated for display.";

// ---------------------------------------------------------------------------
// Tasks and grading

struct Check {
  enum class Op { Eq, Contains } op = Op::Eq;
  std::vector<std::string> path;
  Value expect;

  bool operator==(const Check&) const = default;
};

inline void to_json(nlohmann::json& j, const Check& c) {
  j = {{"op", c.op == Check::Op::Eq ? "eq" : "contains"},
       {"path", c.path},
       {"expect", c.expect}};
}

inline void from_json(const nlohmann::json& j, Check& c) {
  c.op = j.at("op") == "eq" ? Check::Op::Eq : Check::Op::Contains;
  j.at("path").get_to(c.path);
  c.expect = j.at("expect");
}

struct Task {
  std::string task_id;
  std::string scenario_id;
  std::string instruction;
  int difficulty = 1;
  std::vector<Check> grader;
  int template_id = 0;
  Value params;   // labeled instruction values, e.g. {"account": "alice_k3x"}
  Value fixture;  // initial world state

  bool operator==(const Task&) const = default;
};

inline void to_json(nlohmann::json& j, const Task& t) {
  j = {{"task_id", t.task_id},     {"scenario_id", t.scenario_id},
       {"instruction", t.instruction}, {"difficulty", t.difficulty},
       {"grader", t.grader},       {"template_id", t.template_id},
       {"params", t.params},       {"fixture", t.fixture}};
}

inline void from_json(const nlohmann::json& j, Task& t) {
  j.at("task_id").get_to(t.task_id);
  j.at("scenario_id").get_to(t.scenario_id);
  j.at("instruction").get_to(t.instruction);
  j.at("difficulty").get_to(t.difficulty);
  j.at("grader").get_to(t.grader);
  j.at("template_id").get_to(t.template_id);
  t.params = j.at("params");
  t.fixture = j.at("fixture");
}

struct Scenario {
  std::string scenario_id;
  std::vector<Task> tasks;  // exactly 3

  bool operator==(const Scenario&) const = default;
};

inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = {{"scenario_id", s.scenario_id}, {"tasks", s.tasks}};
}

inline void from_json(const nlohmann::json& j, Scenario& s) {
  j.at("scenario_id").get_to(s.scenario_id);
  j.at("tasks").get_to(s.tasks);
}

struct Observation {
  std::string text;
  bool truncated = false;
  bool is_error = false;
};

struct Session {
  Task task;
  Value state;
  dsl::FunctionTable functions;
  int step = 0;
  bool completed = false;
  dsl::ExecOutcome last;  // trace of the most recent execute
};

// ---------------------------------------------------------------------------
// Instruction templates. The fixed phrases keep sibling instructions close
// under word-bigram similarity while scenario-suffixed values keep different
// scenarios apart.

struct TemplateSpec {
  int id;
  const char* phrase;      // fixed 12-word opener
  const char* skill_name;  // canonical skill the scripted policy defines
  const char* explore_api; // read call used during exploration
  int difficulty;
};

inline const std::vector<TemplateSpec>& miniworld_templates() {
  static const std::vector<TemplateSpec> kTemplates = {
      {0, "Log in to the payments app and send the rent payment below.",
       "pay_rent", "venmo.balance", 1},
      {1, "Open the notes app and record every shopping item for this account.",
       "note_items", "shop.items", 2},
      {2, "Open the music app and like every track by the listed artist.",
       "like_artist", "music.by_artist", 2},
      {3, "Close out the chore below and email the confirmation to the manager.",
       "finish_chore", "todo.items", 1},
      {4, "Log in to the payments app and repay every roommate equally today.",
       "repay_all", "phone.roommates", 2},
  };
  return kTemplates;
}

inline std::optional<int> instruction_template_id(std::string_view instruction) {
  for (const TemplateSpec& t : miniworld_templates())
    if (instruction.substr(0, std::string_view(t.phrase).size()) == t.phrase)
      return t.id;
  return std::nullopt;
}

// Instructions carry "label: value" pairs with single-token values.
inline std::map<std::string, std::string> parse_instruction_params(
    std::string_view instruction) {
  std::map<std::string, std::string> out;
  std::vector<std::string> tokens = split_ws(instruction);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    if (tokens[i].size() > 1 && tokens[i].back() == ':')
      out[tokens[i].substr(0, tokens[i].size() - 1)] = tokens[i + 1];
  return out;
}

// ---------------------------------------------------------------------------
// World generation

namespace worldgen {

inline const std::vector<std::string>& first_names() {
  static const std::vector<std::string> v = {
      "alice", "bob",  "carol", "dave", "erin", "frank", "grace", "henry",
      "iris",  "jack", "kara",  "liam", "mona", "nate",  "olga",  "pete"};
  return v;
}

inline std::string suffix3(SplitMix& rng) {
  static const std::string alphabet = "abcdefghjkmnpqrstuvwxyz23456789";
  std::string s;
  for (int i = 0; i < 3; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

inline std::string person(SplitMix& rng) {
  return first_names()[rng.below(first_names().size())] + "_" + suffix3(rng);
}

inline std::string password(SplitMix& rng) { return "pw_" + suffix3(rng) + suffix3(rng); }

// Quarter-dollar amounts keep grader arithmetic exact in doubles.
inline double amount(SplitMix& rng) {
  return static_cast<double>(rng.range(5, 80)) + 0.25 * static_cast<double>(rng.below(4));
}

inline Value base_state() {
  return Value{{"auth", {{"passwords", Value::object()}, {"logged_in", Value::object()}}},
               {"venmo", {{"balance", Value::object()}, {"transactions", Value::object()}}},
               {"shop", {{"items", Value::object()}}},
               {"notes", {{"items", Value::object()}}},
               {"music", {{"library", Value::object()}}},
               {"todo", {{"items", Value::object()}}},
               {"mail", {{"outbox", Value::object()}}},
               {"phone", {{"roommates", Value::object()}}}};
}

inline void add_person(Value& state, const std::string& name, const std::string& pw,
                       double balance) {
  state["auth"]["passwords"][name] = pw;
  state["auth"]["logged_in"][name] = false;
  state["venmo"]["balance"][name] = balance;
  state["venmo"]["transactions"][name] = Value::array();
  state["notes"]["items"][name] = Value::array();
  state["mail"]["outbox"][name] = Value::array();
}

}  // namespace worldgen

inline std::vector<Scenario> generate_world(std::uint64_t seed, int n_scenarios) {
  if (n_scenarios < 1) throw std::invalid_argument("generate_world: n_scenarios must be >= 1");
  namespace wg = worldgen;

  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(n_scenarios));
  for (int idx = 0; idx < n_scenarios; ++idx) {
    SplitMix rng(mix_seed(seed, 0x5eedu, static_cast<std::uint64_t>(idx)));
    const TemplateSpec& tmpl = miniworld_templates()[idx % miniworld_templates().size()];

    Scenario scenario;
    scenario.scenario_id = "s" + std::to_string(idx);
    std::string tag = "t" + std::to_string(idx) + "_" + wg::suffix3(rng);

    // Scenario-level values shared by the three sibling tasks.
    std::string friend_name = wg::person(rng);
    std::string manager = wg::person(rng);
    std::string artist = "the_" + wg::first_names()[rng.below(wg::first_names().size())] +
                         "_band_" + wg::suffix3(rng);
    std::string notebook = "list_" + wg::suffix3(rng);
    std::string chore = "chore_" + wg::suffix3(rng);
    double amt = wg::amount(rng);

    // Three distinct users.
    std::vector<std::string> users;
    while (users.size() < 3) {
      std::string u = wg::person(rng);
      if (u != friend_name && u != manager &&
          std::find(users.begin(), users.end(), u) == users.end())
        users.push_back(u);
    }

    for (int k = 0; k < 3; ++k) {
      const std::string& user = users[static_cast<std::size_t>(k)];
      std::string pw = wg::password(rng);
      double balance = static_cast<double>(rng.range(400, 900));

      Task task;
      task.task_id = scenario.scenario_id + "_t" + std::to_string(k);
      task.scenario_id = scenario.scenario_id;
      task.template_id = tmpl.id;
      task.difficulty = tmpl.difficulty;

      Value state = wg::base_state();
      wg::add_person(state, user, pw, balance);

      std::string instruction = std::string(tmpl.phrase) + " job: " + tag;
      Value params = {{"job", tag}, {"account", user}, {"password", pw}};
      std::vector<Check> grader;
      grader.push_back(
          {Check::Op::Eq, {"auth", "logged_in", user}, Value(true)});

      switch (tmpl.id) {
        case 0: {  // single payment to a friend
          wg::add_person(state, friend_name, wg::password(rng), 100.0);
          instruction += " friend: " + friend_name + " amount: " + Value(amt).dump();
          params["friend"] = friend_name;
          params["amount"] = amt;
          grader.push_back({Check::Op::Eq, {"venmo", "balance", user}, Value(balance - amt)});
          grader.push_back({Check::Op::Eq, {"venmo", "balance", friend_name}, Value(100.0 + amt)});
          grader.push_back({Check::Op::Contains,
                            {"venmo", "transactions", user},
                            Value{{"to", friend_name}, {"amount", amt}}});
          break;
        }
        case 1: {  // one note per shopping item
          static const std::vector<std::string> pantry = {
              "milk", "eggs", "bread", "coffee", "rice", "beans",
              "apples", "pasta", "honey", "butter", "salt", "tea"};
          int count = rng.range(2, 4);
          Value items = Value::array();
          std::vector<std::string> chosen;
          while (static_cast<int>(chosen.size()) < count) {
            std::string it = pantry[rng.below(pantry.size())];
            if (std::find(chosen.begin(), chosen.end(), it) == chosen.end())
              chosen.push_back(it);
          }
          for (const std::string& it : chosen) items.push_back(it);
          state["shop"]["items"][user] = items;
          instruction += " notebook: " + notebook;
          params["notebook"] = notebook;
          for (const std::string& it : chosen)
            grader.push_back({Check::Op::Contains,
                              {"notes", "items", user},
                              Value{{"notebook", notebook}, {"title", it}}});
          break;
        }
        case 2: {  // like every track by one artist
          static const std::vector<std::string> titles = {
              "sunrise", "echoes", "harbor", "moonlight", "ember",
              "willow", "horizon", "lantern", "meadow", "drift"};
          int by_artist = rng.range(1, 3);
          int fillers = rng.range(1, 2);
          Value lib = Value::array();
          std::vector<std::string> used;
          auto fresh_title = [&](const std::string& prefix) {
            std::string t;
            do {
              t = prefix + titles[rng.below(titles.size())] + "_" + wg::suffix3(rng);
            } while (std::find(used.begin(), used.end(), t) != used.end());
            used.push_back(t);
            return t;
          };
          std::vector<std::string> wanted;
          for (int s = 0; s < by_artist; ++s) {
            std::string t = fresh_title("");
            wanted.push_back(t);
            lib.push_back({{"title", t}, {"artist", artist}, {"liked", false}});
          }
          for (int s = 0; s < fillers; ++s)
            lib.push_back({{"title", fresh_title("b_")},
                           {"artist", "other_" + wg::suffix3(rng)},
                           {"liked", false}});
          state["music"]["library"][user] = lib;
          instruction += " artist: " + artist;
          params["artist"] = artist;
          for (const std::string& t : wanted)
            grader.push_back({Check::Op::Contains,
                              {"music", "library", user},
                              Value{{"title", t}, {"artist", artist}, {"liked", true}}});
          break;
        }
        case 3: {  // complete a chore and email the manager
          wg::add_person(state, manager, wg::password(rng), 100.0);
          Value todos = Value::array();
          todos.push_back({{"name", chore}, {"done", false}});
          int extra = rng.range(1, 3);
          for (int s = 0; s < extra; ++s)
            todos.push_back({{"name", "chore_" + wg::suffix3(rng)}, {"done", false}});
          state["todo"]["items"][user] = todos;
          instruction += " chore: " + chore + " manager: " + manager;
          params["chore"] = chore;
          params["manager"] = manager;
          grader.push_back({Check::Op::Contains,
                            {"todo", "items", user},
                            Value{{"name", chore}, {"done", true}}});
          grader.push_back({Check::Op::Contains,
                            {"mail", "outbox", user},
                            Value{{"to", manager}, {"subject", chore}}});
          break;
        }
        case 4: {  // equal repayment to every roommate
          int mates = rng.range(1, 3);
          Value rlist = Value::array();
          for (int s = 0; s < mates; ++s) {
            std::string r = wg::person(rng);
            wg::add_person(state, r, wg::password(rng), 50.0);
            rlist.push_back(r);
          }
          state["phone"]["roommates"][user] = rlist;
          instruction += " amount: " + Value(amt).dump();
          params["amount"] = amt;
          grader.push_back({Check::Op::Eq,
                            {"venmo", "balance", user},
                            Value(balance - amt * static_cast<double>(mates))});
          for (const auto& r : rlist)
            grader.push_back({Check::Op::Contains,
                              {"venmo", "transactions", user},
                              Value{{"to", r}, {"amount", amt}}});
          break;
        }
      }

      instruction += " account: " + user + " password: " + pw;
      task.instruction = instruction;
      task.params = params;
      task.fixture = state;
      task.grader = grader;
      scenario.tasks.push_back(std::move(task));
    }
    scenarios.push_back(std::move(scenario));
  }
  return scenarios;
}

// ---------------------------------------------------------------------------
// API dispatch

namespace detail {

inline dsl::ApiResult api_error(const std::string& name, const std::string& why) {
  dsl::ApiResult r;
  r.ok = false;
  r.error = name + ": " + why;
  return r;
}

inline dsl::ApiResult api_dispatch(Value& state, const std::string& name,
                                   const std::vector<Value>& args) {
  auto need_args = [&](std::size_t n) -> std::optional<dsl::ApiResult> {
    if (args.size() != n)
      return api_error(name, "expected " + std::to_string(n) + " arguments, got " +
                                 std::to_string(args.size()));
    for (std::size_t i = 0; i < std::min<std::size_t>(args.size(), 1); ++i)
      if (!args[i].is_string()) return api_error(name, "first argument must be a user");
    return std::nullopt;
  };
  auto logged_in = [&](const std::string& user) {
    const Value& flags = state["auth"]["logged_in"];
    return flags.contains(user) && flags[user] == Value(true);
  };
  auto ok = [](Value v) {
    dsl::ApiResult r;
    r.value = std::move(v);
    return r;
  };

  if (name == "auth.login") {
    if (auto e = need_args(2)) return *e;
    std::string user = args[0].get<std::string>();
    const Value& pws = state["auth"]["passwords"];
    if (!pws.contains(user) || pws[user] != args[1])
      return api_error(name, "invalid credentials");
    state["auth"]["logged_in"][user] = true;
    return ok(Value{{"ok", true}, {"user", user}});
  }

  // Every other api requires a logged-in first argument.
  if (args.empty() || !args[0].is_string())
    return api_error(name, "first argument must be a user");
  std::string user = args[0].get<std::string>();
  if (!logged_in(user)) return api_error(name, "user not logged in");

  if (name == "venmo.balance") {
    if (auto e = need_args(1)) return *e;
    return ok(state["venmo"]["balance"][user]);
  }
  if (name == "venmo.transfer") {
    if (auto e = need_args(3)) return *e;
    if (!args[1].is_string()) return api_error(name, "recipient must be a user");
    if (!args[2].is_number()) return api_error(name, "amount must be a number");
    std::string to = args[1].get<std::string>();
    double amt = args[2].get<double>();
    Value& balances = state["venmo"]["balance"];
    if (!balances.contains(to)) return api_error(name, "unknown recipient '" + to + "'");
    if (amt <= 0) return api_error(name, "amount must be positive");
    if (balances[user].get<double>() < amt) return api_error(name, "insufficient balance");
    balances[user] = balances[user].get<double>() - amt;
    balances[to] = balances[to].get<double>() + amt;
    state["venmo"]["transactions"][user].push_back({{"to", to}, {"amount", amt}});
    return ok(Value{{"ok", true}, {"to", to}, {"amount", amt}});
  }
  if (name == "shop.items") {
    if (auto e = need_args(1)) return *e;
    if (!state["shop"]["items"].contains(user)) return ok(Value::array());
    return ok(state["shop"]["items"][user]);
  }
  if (name == "notes.create") {
    if (auto e = need_args(3)) return *e;
    if (!args[1].is_string() || !args[2].is_string())
      return api_error(name, "notebook and title must be strings");
    Value note = {{"notebook", args[1]}, {"title", args[2]}};
    state["notes"]["items"][user].push_back(note);
    return ok(Value{{"ok", true}, {"note", note}});
  }
  if (name == "notes.list") {
    if (auto e = need_args(1)) return *e;
    return ok(state["notes"]["items"][user]);
  }
  if (name == "music.by_artist") {
    if (auto e = need_args(2)) return *e;
    Value out = Value::array();
    if (state["music"]["library"].contains(user))
      for (const Value& song : state["music"]["library"][user])
        if (song["artist"] == args[1]) out.push_back(song);
    return ok(out);
  }
  if (name == "music.like") {
    if (auto e = need_args(2)) return *e;
    if (!state["music"]["library"].contains(user))
      return api_error(name, "no music library");
    for (Value& song : state["music"]["library"][user])
      if (song["title"] == args[1]) {
        song["liked"] = true;
        return ok(Value{{"ok", true}, {"title", args[1]}});
      }
    return api_error(name, "unknown title");
  }
  if (name == "todo.items") {
    if (auto e = need_args(1)) return *e;
    if (!state["todo"]["items"].contains(user)) return ok(Value::array());
    return ok(state["todo"]["items"][user]);
  }
  if (name == "todo.complete") {
    if (auto e = need_args(2)) return *e;
    if (state["todo"]["items"].contains(user))
      for (Value& item : state["todo"]["items"][user])
        if (item["name"] == args[1]) {
          item["done"] = true;
          return ok(Value{{"ok", true}, {"name", args[1]}});
        }
    return api_error(name, "unknown todo item");
  }
  if (name == "mail.send") {
    if (auto e = need_args(3)) return *e;
    if (!args[1].is_string() || !args[2].is_string())
      return api_error(name, "recipient and subject must be strings");
    Value msg = {{"to", args[1]}, {"subject", args[2]}};
    state["mail"]["outbox"][user].push_back(msg);
    return ok(Value{{"ok", true}, {"mail", msg}});
  }
  if (name == "phone.roommates") {
    if (auto e = need_args(1)) return *e;
    if (!state["phone"]["roommates"].contains(user)) return ok(Value::array());
    return ok(state["phone"]["roommates"][user]);
  }
  return api_error(name, "unknown api");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Session lifecycle

inline Session reset(const Task& task) {
  Session s;
  s.task = task;
  s.state = task.fixture;
  return s;
}

inline Observation execute(Session& session, std::string_view code) {
  ++session.step;
  session.last = {};

  Observation obs;
  auto parsed = dsl::parse(code);
  std::string raw;
  if (!parsed.ok()) {
    raw = "error: parse error (line " + std::to_string(parsed.error_line) +
          "): " + parsed.error + "\n";
    obs.is_error = true;
    session.last.is_error = true;
    session.last.error = raw;
  } else {
    dsl::ApiDispatcher api = [&session](const std::string& name,
                                        const std::vector<Value>& args) {
      return detail::api_dispatch(session.state, name, args);
    };
    std::map<std::string, Value> scope;
    session.last = dsl::execute_program(*parsed.program, api, session.functions, scope);
    raw = session.last.output;
    obs.is_error = session.last.is_error;
    if (session.last.done) session.completed = true;
  }

  if (raw.size() > kMaxObservationChars) {
    obs.text = raw.substr(0, kMaxObservationChars) + kTruncationNotice;
    obs.truncated = true;
  } else {
    obs.text = raw;
  }
  return obs;
}

inline double evaluate(const Session& session) {
  const std::vector<Check>& checks = session.task.grader;
  if (checks.empty()) return 0.0;
  int passing = 0;
  for (const Check& c : checks) {
    const Value* node = &session.state;
    bool reachable = true;
    for (const std::string& key : c.path) {
      if (!node->is_object() || !node->contains(key)) {
        reachable = false;
        break;
      }
      node = &(*node)[key];
    }
    if (!reachable) continue;
    if (c.op == Check::Op::Eq) {
      if (*node == c.expect) ++passing;
    } else {
      if (node->is_array())
        for (const Value& el : *node)
          if (el == c.expect) {
            ++passing;
            break;
          }
    }
  }
  return static_cast<double>(passing) / static_cast<double>(checks.size());
}

// Fixture dump consumed by the generate-world command.
inline nlohmann::json world_to_json(std::uint64_t seed,
                                    const std::vector<Scenario>& scenarios) {
  return {{"seed", seed}, {"n_scenarios", scenarios.size()}, {"scenarios", scenarios}};
}

}  // namespace skillrl
