#include <catch2/catch_amalgamated.hpp>

#include "skillrl/rollout.hpp"
#include "skillrl/trajectory_io.hpp"

using namespace skillrl;

namespace {

Trajectory scripted_trajectory(const Task& task, SkillLibrary lib = {}) {
  return run_task(scripted_policy(miniworld_script_table()), task, std::move(lib))
      .trajectory;
}

}  // namespace

TEST_CASE("trajectory JSONL round-trips") {
  auto scenarios = generate_world(61, 1);
  Task t0 = scenarios[0].tasks[0];
  auto first = run_task(scripted_policy(miniworld_script_table()), t0, SkillLibrary{});
  Trajectory traj = scripted_trajectory(scenarios[0].tasks[1], first.library);

  std::string text = trajectory_to_jsonl(traj);
  Trajectory rt = trajectory_from_jsonl(text);

  CHECK(rt.task_id == traj.task_id);
  CHECK(rt.scenario_id == traj.scenario_id);
  CHECK(rt.outcome_r == traj.outcome_r);
  CHECK(rt.step_count == traj.step_count);
  CHECK(rt.gen_token_count == traj.gen_token_count);
  CHECK(rt.termination == traj.termination);
  CHECK(rt.turns.size() == traj.turns.size());
  for (std::size_t i = 0; i < rt.turns.size(); ++i) {
    CHECK(rt.turns[i].actor == traj.turns[i].actor);
    CHECK(rt.turns[i].text == traj.turns[i].text);
    CHECK(rt.turns[i].token_count == traj.turns[i].token_count);
    CHECK(rt.turns[i].mask == traj.turns[i].mask);
  }
  CHECK(rt.skill_events.size() == traj.skill_events.size());
  CHECK(rt.library_at_start == traj.library_at_start);
  CHECK(rt.library_at_end == traj.library_at_end);

  // serialization is stable
  CHECK(trajectory_to_jsonl(rt) == text);
}

TEST_CASE("logprobs survive the round-trip") {
  auto scenarios = generate_world(61, 1);
  Policy base = scripted_policy(miniworld_script_table());
  Policy with_lps = [&base](const PolicyRequest& req) {
    PolicyResponse r = base(req);
    std::vector<std::pair<long, double>> lps;
    for (int t = 0; t < r.token_count; ++t) lps.emplace_back(t, -0.25 * t);
    r.token_logprobs = lps;
    return r;
  };
  Trajectory traj = run_task(with_lps, scenarios[0].tasks[0], SkillLibrary{}).trajectory;
  Trajectory rt = trajectory_from_jsonl(trajectory_to_jsonl(traj));
  bool found = false;
  for (std::size_t i = 0; i < rt.turns.size(); ++i)
    if (rt.turns[i].actor == Actor::Agent) {
      REQUIRE(rt.turns[i].logprobs.has_value());
      CHECK(*rt.turns[i].logprobs == *traj.turns[i].logprobs);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("malformed logs are rejected") {
  CHECK_THROWS(trajectory_from_jsonl("not json\n"));
  CHECK_THROWS(trajectory_from_jsonl(""));  // no trailer
  CHECK_THROWS(trajectory_from_jsonl(
      R"({"type":"turn","actor":"agent","text":"x","token_count":1,"mask":true})"
      "\n"));  // turn only, still no trailer
}

TEST_CASE("replay reproduces observations byte-exactly") {
  auto scenarios = generate_world(61, 2);
  SkillLibrary lib;
  for (const auto& sc : scenarios)
    for (const auto& task : sc.tasks) {
      auto result = run_task(scripted_policy(miniworld_script_table()), task, lib);
      lib = result.library;
      ReplayReport report = replay_trajectory(task, result.trajectory);
      INFO(report.detail);
      CHECK(report.ok);
    }
}

TEST_CASE("replay skips the trailing unexecuted agent turn") {
  auto scenarios = generate_world(61, 1);
  Task task = scenarios[0].tasks[0];

  // Tight context cap: the episode ends on an agent turn that never ran.
  std::string big_code = "print(\"" + std::string(2000, 'z') + "\")";
  Policy big = [&](const PolicyRequest&) {
    PolicyResponse r;
    r.text = big_code;
    r.token_count = ws_token_count(r.text);
    return r;
  };
  Trajectory capped = run_task(big, task, SkillLibrary{}, Limits{40, 1500, 60}).trajectory;
  REQUIRE(capped.termination == Termination::ContextLimit);
  ReplayReport r1 = replay_trajectory(task, capped);
  INFO(r1.detail);
  CHECK(r1.ok);

  // Same for a no_code ending.
  Policy prose = [](const PolicyRequest&) {
    PolicyResponse r;
    r.text = "Nothing left to do here.";
    r.token_count = ws_token_count(r.text);
    return r;
  };
  Trajectory quit = run_task(prose, task, SkillLibrary{}).trajectory;
  REQUIRE(quit.termination == Termination::NoCode);
  ReplayReport r2 = replay_trajectory(task, quit);
  INFO(r2.detail);
  CHECK(r2.ok);
}

TEST_CASE("deserialize validates skill bodies") {
  Skill s;
  s.name = "broken";
  s.params = {};
  s.body = "let = nope";
  nlohmann::json j = s;
  CHECK_THROWS(SkillLibrary::deserialize(j.dump() + "\n"));
}

TEST_CASE("replay flags divergence") {
  auto scenarios = generate_world(61, 1);
  Task task = scenarios[0].tasks[0];
  Trajectory traj = scripted_trajectory(task);

  // tamper with a recorded environment turn
  Trajectory bad = traj;
  for (auto& turn : bad.turns)
    if (turn.actor == Actor::Environment) {
      turn.text += "x";
      break;
    }
  CHECK_FALSE(replay_trajectory(task, bad).ok);

  // tamper with the recorded outcome
  Trajectory worse = traj;
  worse.outcome_r = 0.123;
  CHECK_FALSE(replay_trajectory(task, worse).ok);

  // replaying against the wrong task diverges
  Task other = scenarios[0].tasks[1];
  CHECK_FALSE(replay_trajectory(other, traj).ok);
}
