#pragma once
// Task chains and Sequential Rollout: one member runs a chain of sibling
// tasks threading its own skill library from task to task; a group is G
// independent members over the same chain with isolated libraries. Also the
// early-stop predicate and a deterministic lockstep cancellation planner.

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "skillrl/agent_loop.hpp"
#include "skillrl/common.hpp"
#include "skillrl/policy.hpp"
#include "skillrl/world.hpp"

namespace skillrl {

struct TaskChain {
  std::string scenario_id;
  std::vector<Task> tasks;  // K tasks in scenario-internal order, 2 <= K <= 3
};

struct MemberRecord {
  int member_index = 0;
  std::vector<Trajectory> trajectories;        // one per chain task
  std::vector<SkillLibrary> libraries_at_start;  // M^k before each task
  SkillLibrary final_library;
  bool cancelled = false;
};

struct GroupRollout {
  TaskChain chain;
  int group_size = 0;
  std::vector<MemberRecord> members;  // ordered by member index
};

// Builds policies per member-task; the seed folds root seed, chain id,
// member index, and task index so results are order-independent.
using SeededPolicyFactory = std::function<Policy(std::uint64_t task_seed)>;

inline std::uint64_t member_seed(std::uint64_t root_seed, const std::string& chain_id,
                                 int member_index) {
  return mix_seed(root_seed, fnv1a64(chain_id), static_cast<std::uint64_t>(member_index));
}

// ---------------------------------------------------------------------------

inline std::vector<TaskChain> build_chains(const std::vector<Scenario>& scenarios, int k,
                                           std::uint64_t seed) {
  if (k < 2 || k > 3) throw std::invalid_argument("build_chains: K must be 2 or 3");
  std::vector<TaskChain> chains;
  chains.reserve(scenarios.size());
  for (std::size_t idx = 0; idx < scenarios.size(); ++idx) {
    const Scenario& sc = scenarios[idx];
    if (static_cast<int>(sc.tasks.size()) < k)
      throw std::invalid_argument("build_chains: scenario has fewer than K tasks");
    SplitMix rng(mix_seed(seed, 0xc4a1u, fnv1a64(sc.scenario_id)));
    std::vector<std::size_t> order(sc.tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i)]);
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());  // preserve scenario-internal order

    TaskChain chain;
    chain.scenario_id = sc.scenario_id;
    for (std::size_t i : order) chain.tasks.push_back(sc.tasks[i]);
    chains.push_back(std::move(chain));
  }
  return chains;
}

inline MemberRecord sequential_rollout(const SeededPolicyFactory& make_policy,
                                       const TaskChain& chain, SkillLibrary library,
                                       std::uint64_t seed, const Limits& limits = {},
                                       int member_index = 0) {
  MemberRecord member;
  member.member_index = member_index;
  for (std::size_t k = 0; k < chain.tasks.size(); ++k) {
    member.libraries_at_start.push_back(library);
    Policy policy = make_policy(mix_seed(seed, static_cast<std::uint64_t>(k)));
    RunTaskResult result = run_task(policy, chain.tasks[k], std::move(library), limits);
    library = std::move(result.library);
    member.trajectories.push_back(std::move(result.trajectory));
  }
  member.final_library = std::move(library);
  return member;
}

inline GroupRollout group_rollout(const SeededPolicyFactory& make_policy,
                                  const TaskChain& chain, int group_size,
                                  std::uint64_t root_seed, const Limits& limits = {},
                                  int workers = 1, const SkillLibrary& init = {}) {
  if (group_size < 2) throw std::invalid_argument("group_rollout: G must be >= 2");
  GroupRollout group;
  group.chain = chain;
  group.group_size = group_size;
  group.members.resize(static_cast<std::size_t>(group_size));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= group_size) return;
      try {
        group.members[static_cast<std::size_t>(i)] =
            sequential_rollout(make_policy, chain, init,
                               member_seed(root_seed, chain.scenario_id, i), limits, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  int n_threads = std::max(1, std::min(workers, group_size));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return group;
}

// ---------------------------------------------------------------------------
// Early stop. A "rollout" is one task attempt; the batch stops early when
// every unfinished attempt has taken at least min_steps turns, every task has
// at least min_rollouts completed attempts, and the completed fraction of the
// planned batch is reached.

struct EarlyStopRule {
  int min_steps_unfinished = 25;
  int min_rollouts_per_task = 6;
  double min_completed_fraction = 0.9;
};

struct RolloutProgress {
  std::vector<int> unfinished_steps;    // step count of every unfinished attempt
  std::vector<long> completed_per_task; // completed attempts per distinct task
  long completed_total = 0;
  long planned_total = 0;
};

inline bool early_stop_ready(const RolloutProgress& p, const EarlyStopRule& rule = {}) {
  for (int steps : p.unfinished_steps)
    if (steps < rule.min_steps_unfinished) return false;
  for (long count : p.completed_per_task)
    if (count < rule.min_rollouts_per_task) return false;
  return static_cast<double>(p.completed_total) >=
         rule.min_completed_fraction * static_cast<double>(p.planned_total);
}

// Deterministic cancellation plan. Members advance in lockstep rounds (one
// agent turn per round on the current task, recorded step counts supplied by
// the caller); after each round the predicate is polled and, once it holds,
// every unfinished member is cancelled. Output is indexed like the input.
struct MemberPlan {
  int chain_index = 0;
  std::vector<int> task_steps;  // recorded step_count per chain task
};

inline std::vector<bool> plan_early_stop(const std::vector<MemberPlan>& plans,
                                         const EarlyStopRule& rule = {}) {
  struct State {
    std::size_t task = 0;
    int turns = 0;
    bool finished = false;
  };
  std::vector<State> states(plans.size());
  long planned = 0;
  std::map<std::pair<int, std::size_t>, long> completed;
  for (const MemberPlan& p : plans) {
    planned += static_cast<long>(p.task_steps.size());
    for (std::size_t k = 0; k < p.task_steps.size(); ++k) completed[{p.chain_index, k}];
  }
  long completed_total = 0;

  auto settle = [&](std::size_t i) {
    // zero-step tasks and task transitions resolve between rounds
    State& st = states[i];
    const MemberPlan& p = plans[i];
    while (!st.finished) {
      if (st.task >= p.task_steps.size()) {
        st.finished = true;
        break;
      }
      if (st.turns < p.task_steps[st.task]) break;
      st.turns = 0;
      ++completed[{p.chain_index, st.task}];
      ++completed_total;
      ++st.task;
    }
  };
  for (std::size_t i = 0; i < states.size(); ++i) settle(i);

  std::vector<bool> cancelled(plans.size(), false);
  bool any_unfinished = true;
  while (any_unfinished) {
    any_unfinished = false;
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].finished) continue;
      any_unfinished = true;
      ++states[i].turns;
      settle(i);
    }
    if (!any_unfinished) break;

    RolloutProgress progress;
    progress.planned_total = planned;
    progress.completed_total = completed_total;
    for (const auto& [task, count] : completed) progress.completed_per_task.push_back(count);
    for (std::size_t i = 0; i < states.size(); ++i)
      if (!states[i].finished) progress.unfinished_steps.push_back(states[i].turns);
    if (early_stop_ready(progress, rule)) {
      for (std::size_t i = 0; i < states.size(); ++i)
        if (!states[i].finished) cancelled[i] = true;
      break;
    }
  }
  return cancelled;
}

}  // namespace skillrl
