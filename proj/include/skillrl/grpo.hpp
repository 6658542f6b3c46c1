#pragma once
// Numeric engine for group-relative policy optimization: mean-centered group
// advantages (std-normalized variant for the baseline formulation), the
// clipped masked token objective over task chains, and the optional KL term.
// Computes objective values only; no parameter updates happen here.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "skillrl/common.hpp"
#include "skillrl/rollout.hpp"

namespace skillrl {

// Mean-only advantage: A_i = R_i - mean(R). No std division. Degenerate
// all-equal groups yield exact zeros and stay in the batch.
inline std::vector<double> group_advantage(const std::vector<double>& rewards) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantage: need at least 2 rewards");
  bool all_equal = true;
  for (double r : rewards)
    if (r != rewards.front()) all_equal = false;
  if (all_equal) return std::vector<double>(rewards.size(), 0.0);
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r - mean);
  return out;
}

struct ZeroStdError : std::runtime_error {
  ZeroStdError() : std::runtime_error("group_advantage_std: zero standard deviation") {}
};

// Baseline variant: (R - mean) / std with the population convention.
inline std::vector<double> group_advantage_std(const std::vector<double>& rewards) {
  std::vector<double> centered = group_advantage(rewards);
  double var = 0.0;
  for (double c : centered) var += c * c;
  var /= static_cast<double>(rewards.size());
  double std_dev = std::sqrt(var);
  if (std_dev == 0.0) throw ZeroStdError();
  for (double& c : centered) c /= std_dev;
  return centered;
}

// ---------------------------------------------------------------------------

struct TokenEntry {
  double logp_new = 0.0;
  double logp_old = 0.0;
  bool mask = false;  // true iff an agent-generated token: contributes to sums
  double logp_ref = std::numeric_limits<double>::quiet_NaN();
};

using TokenSeq = std::vector<TokenEntry>;

struct TokenBatch {
  // sequences[i][k]: tokens of member i's output for chain task k
  std::vector<std::vector<TokenSeq>> sequences;
};

// J = (1/G) sum_i sum_k (1/|o_i^k|) sum_t min(s*A, clip(s, 1-eps, 1+eps)*A)
// over masked-in tokens only, s = exp(logp_new - logp_old), |o_i^k| the
// masked-in token count of that member-task.
inline double clipped_token_objective(const TokenBatch& batch,
                                      const std::vector<std::vector<double>>& advantages,
                                      double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  if (batch.sequences.size() != advantages.size())
    throw std::invalid_argument("batch and advantages disagree on group size");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.sequences.size(); ++i) {
    if (batch.sequences[i].size() != advantages[i].size())
      throw std::invalid_argument("batch and advantages disagree on chain length");
    for (std::size_t k = 0; k < batch.sequences[i].size(); ++k) {
      long count = 0;
      double inner = 0.0;
      double adv = advantages[i][k];
      for (const TokenEntry& t : batch.sequences[i][k]) {
        if (!t.mask) continue;
        ++count;
        double s = std::exp(t.logp_new - t.logp_old);
        double clipped = std::min(std::max(s, 1.0 - epsilon), 1.0 + epsilon);
        inner += std::min(s * adv, clipped * adv);
      }
      if (count > 0) total += inner / static_cast<double>(count);
    }
  }
  return total / static_cast<double>(batch.sequences.size());
}

// beta * mean over masked-in tokens of exp(d) - d - 1, d = logp_ref - logp_new.
// Nonnegative by convexity. The trained objective omits this term; it exists
// for the baseline formulation only.
inline double kl_penalty(const TokenBatch& batch, double beta) {
  double sum = 0.0;
  long count = 0;
  for (const auto& member : batch.sequences)
    for (const TokenSeq& seq : member)
      for (const TokenEntry& t : seq) {
        if (!t.mask) continue;
        if (std::isnan(t.logp_ref))
          throw std::invalid_argument("kl_penalty: reference logprobs missing");
        double d = t.logp_ref - t.logp_new;
        sum += std::exp(d) - d - 1.0;
        ++count;
      }
  if (count == 0) return 0.0;
  return beta * sum / static_cast<double>(count);
}

// Full chain objective: mean-centered advantages per chain position composed
// with the clipped masked token objective. rewards[i][k] must come from the
// same group the batch was built from.
inline double chain_objective(const std::vector<std::vector<double>>& rewards,
                              const TokenBatch& batch, double epsilon) {
  if (rewards.size() != batch.sequences.size())
    throw std::invalid_argument("rewards and batch disagree on group size");
  std::size_t G = rewards.size();
  if (G < 2) throw std::invalid_argument("chain objective needs a group of >= 2");
  std::size_t K = rewards[0].size();
  for (const auto& r : rewards)
    if (r.size() != K) throw std::invalid_argument("ragged reward matrix");

  std::vector<std::vector<double>> advantages(G, std::vector<double>(K, 0.0));
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> column;
    column.reserve(G);
    for (std::size_t i = 0; i < G; ++i) column.push_back(rewards[i][k]);
    std::vector<double> adv = group_advantage(column);
    for (std::size_t i = 0; i < G; ++i) advantages[i][k] = adv[i];
  }
  return clipped_token_objective(batch, advantages, epsilon);
}

// Builds an on-policy batch from recorded trajectories: agent tokens carry
// their recorded logprobs as both new and old; other turns mask out. Requires
// logprobs on every agent turn.
inline TokenBatch token_batch_from(const GroupRollout& group) {
  TokenBatch batch;
  for (const MemberRecord& m : group.members) {
    std::vector<TokenSeq> per_task;
    for (const Trajectory& traj : m.trajectories) {
      TokenSeq seq;
      for (const TurnRecord& turn : traj.turns) {
        if (turn.actor == Actor::Agent) {
          if (!turn.logprobs)
            throw std::invalid_argument("token_batch_from: agent turn lacks logprobs");
          for (const auto& [id, lp] : *turn.logprobs) seq.push_back({lp, lp, true});
        } else {
          for (int t = 0; t < turn.token_count; ++t) seq.push_back({0.0, 0.0, false});
        }
      }
      per_task.push_back(std::move(seq));
    }
    batch.sequences.push_back(std::move(per_task));
  }
  return batch;
}

}  // namespace skillrl
