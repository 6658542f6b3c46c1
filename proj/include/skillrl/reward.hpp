#pragma once
// Reward designs over task-chain outcomes: skill-integrated (closed form for
// K=2 and the general K-chain form), outcome-based, and chain-based, plus the
// no-code penalty. Success indicators use exact equality with 1: graders emit
// exact rationals, so no epsilon belongs here.

#include <string>
#include <vector>

#include "skillrl/agent_loop.hpp"
#include "skillrl/rollout.hpp"

namespace skillrl {

enum class RewardDesign { SkillIntegrated, Outcome, ChainBased };
enum class PenaltyMode { Replace, Additive };

inline std::string reward_design_name(RewardDesign d) {
  switch (d) {
    case RewardDesign::SkillIntegrated: return "skill_integrated";
    case RewardDesign::Outcome: return "outcome";
    case RewardDesign::ChainBased: return "chain_based";
  }
  return "skill_integrated";
}

struct ChainOutcome {
  std::vector<double> rs;              // completion rates r^k in [0,1]
  std::vector<std::vector<bool>> used; // used[k][j], j < k: task k used a task-j skill
  std::vector<bool> no_code;           // per task: ended by a no-code response

  std::size_t K() const { return rs.size(); }

  bool used_any(std::size_t k) const {
    for (bool u : used[k])
      if (u) return true;
    return false;
  }
};

struct RewardRecord {
  RewardDesign design = RewardDesign::SkillIntegrated;
  std::vector<double> Rs;
};

namespace detail {

inline void validate_outcome(const ChainOutcome& o, std::size_t min_k) {
  if (o.K() < min_k)
    throw std::invalid_argument("chain outcome needs at least " + std::to_string(min_k) +
                                " tasks");
  for (double r : o.rs)
    if (r < 0.0 || r > 1.0)
      throw std::invalid_argument("completion rate out of [0,1]");
  if (o.used.size() != o.K() || o.no_code.size() != o.K())
    throw std::invalid_argument("chain outcome fields disagree on K");
  for (std::size_t k = 0; k < o.K(); ++k)
    if (o.used[k].size() != k)
      throw std::invalid_argument("usage matrix is not lower-triangular");
}

inline double complete(double r) { return r == 1.0 ? 1.0 : 0.0; }

}  // namespace detail

// Closed form for the two-task chain.
inline std::pair<double, double> skill_integrated_2(double r1, double r2, bool used) {
  if (r1 < 0 || r1 > 1 || r2 < 0 || r2 > 1)
    throw std::invalid_argument("completion rate out of [0,1]");
  double u = used ? 1.0 : 0.0;
  double R1 = r1 + detail::complete(r1) * detail::complete(r2) * u;
  double R2 = r2 + detail::complete(r2) * u;
  return {R1, R2};
}

// General K-chain form: outcome rate, plus a generation bonus when a later
// completed task used this task's skills, plus a usage bonus when this
// completed task used any earlier task's skills. First task has no usage
// term; last task has no generation term.
inline RewardRecord skill_integrated_general(const ChainOutcome& o) {
  detail::validate_outcome(o, 2);
  RewardRecord rec;
  rec.design = RewardDesign::SkillIntegrated;
  std::size_t K = o.K();
  for (std::size_t k = 0; k < K; ++k) {
    double r = o.rs[k];
    double generation = 0.0;
    if (k + 1 < K) {
      double best = 0.0;
      for (std::size_t i = k + 1; i < K; ++i)
        best = std::max(best, detail::complete(o.rs[i]) * (o.used[i][k] ? 1.0 : 0.0));
      generation = detail::complete(r) * best;
    }
    double usage = 0.0;
    if (k > 0) usage = detail::complete(r) * (o.used_any(k) ? 1.0 : 0.0);
    rec.Rs.push_back(r + generation + usage);
  }
  return rec;
}

inline RewardRecord outcome_reward(const ChainOutcome& o) {
  detail::validate_outcome(o, 1);
  return {RewardDesign::Outcome, o.rs};
}

// A shared +1.0 bonus when the whole two-task chain succeeds.
inline RewardRecord chain_based_reward(const ChainOutcome& o) {
  detail::validate_outcome(o, 2);
  if (o.K() != 2)
    throw std::invalid_argument("chain_based_reward is defined for K = 2");
  double bonus = detail::complete(o.rs[0]) * detail::complete(o.rs[1]);
  return {RewardDesign::ChainBased, {o.rs[0] + bonus, o.rs[1] + bonus}};
}

// The -1.0 penalty for tasks ended by a no-code response. Replace mode sets
// the reward to -1.0; additive mode subtracts 1.0.
inline RewardRecord apply_no_code_penalty(RewardRecord rec, const ChainOutcome& o,
                                          PenaltyMode mode = PenaltyMode::Replace) {
  if (rec.Rs.size() != o.K())
    throw std::invalid_argument("reward record and outcome disagree on K");
  for (std::size_t k = 0; k < o.K(); ++k)
    if (o.no_code[k]) {
      if (mode == PenaltyMode::Replace)
        rec.Rs[k] = -1.0;
      else
        rec.Rs[k] += -1.0;
    }
  return rec;
}

inline RewardRecord compute_reward(const ChainOutcome& o, RewardDesign design,
                                   PenaltyMode penalty = PenaltyMode::Replace) {
  RewardRecord rec;
  switch (design) {
    case RewardDesign::SkillIntegrated: rec = skill_integrated_general(o); break;
    case RewardDesign::Outcome: rec = outcome_reward(o); break;
    case RewardDesign::ChainBased: rec = chain_based_reward(o); break;
  }
  return apply_no_code_penalty(std::move(rec), o, penalty);
}

// ---------------------------------------------------------------------------
// Bridging a rolled-out member to a ChainOutcome. Attribution follows skill
// provenance: task k "used task j's skill" when some error-free call in task
// k hit a skill that existed at task-k start and originated from chain task j.

inline ChainOutcome chain_outcome_from(const MemberRecord& member, const TaskChain& chain) {
  ChainOutcome o;
  std::size_t K = member.trajectories.size();
  for (std::size_t k = 0; k < K; ++k) {
    const Trajectory& traj = member.trajectories[k];
    o.rs.push_back(traj.outcome_r);
    o.no_code.push_back(traj.termination == Termination::NoCode);
    std::vector<bool> row(k, false);
    for (const SkillEvent& e : traj.skill_events) {
      if (e.kind != SkillEvent::Kind::Usage || !e.execution_ok) continue;
      const Skill* s = traj.library_at_start.find(e.skill_name);
      if (!s) continue;
      for (std::size_t j = 0; j < k; ++j)
        if (chain.tasks[j].task_id == s->origin_task_id) row[j] = true;
    }
    o.used.push_back(std::move(row));
  }
  return o;
}

}  // namespace skillrl
