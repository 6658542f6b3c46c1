#pragma once
// Run configuration: JSON schema with strict unknown-key rejection, defaults
// pinned to the rollout constants (40 turns, 1,500-token turns, 28,048-token
// context, G=8, thresholds 0.5 / 0.65, top-k 5).

#include <set>
#include <string>

#include <json.hpp>

#include "skillrl/agent_loop.hpp"
#include "skillrl/eval.hpp"
#include "skillrl/policy.hpp"
#include "skillrl/reward.hpp"

namespace skillrl {

enum class PolicyKind { Scripted, Stochastic, Remote };

inline std::string policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Scripted: return "scripted";
    case PolicyKind::Stochastic: return "stochastic";
    case PolicyKind::Remote: return "remote";
  }
  return "scripted";
}

inline PolicyKind policy_kind_from_name(const std::string& s) {
  if (s == "scripted") return PolicyKind::Scripted;
  if (s == "stochastic") return PolicyKind::Stochastic;
  if (s == "remote") return PolicyKind::Remote;
  throw ConfigError("unknown policy kind '" + s + "'");
}

inline RewardDesign reward_design_from_name(const std::string& s) {
  if (s == "skill_integrated") return RewardDesign::SkillIntegrated;
  if (s == "outcome") return RewardDesign::Outcome;
  if (s == "chain_based") return RewardDesign::ChainBased;
  throw ConfigError("unknown reward design '" + s + "'");
}

inline PenaltyMode penalty_mode_from_name(const std::string& s) {
  if (s == "replace") return PenaltyMode::Replace;
  if (s == "additive") return PenaltyMode::Additive;
  throw ConfigError("unknown penalty mode '" + s + "'");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::Scripted;
  double error_rate = 0.25;  // stochastic only
  std::string endpoint;      // remote only
  std::string model;
  double temperature = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int n_scenarios = 5;
  int chain_k = 2;
  int group_size = 8;
  PolicySpec policy;
  Limits limits;
  RewardDesign reward = RewardDesign::SkillIntegrated;
  PenaltyMode penalty_mode = PenaltyMode::Replace;
  RetrievalMode retrieval = RetrievalMode::SameScenario;
  double ngram_threshold = 0.5;
  double embed_threshold = 0.65;
  int top_k = 5;
  std::string embed_endpoint;  // empty: built-in hashing embedder
  int embed_dim = 64;
  double epsilon = 0.2;
  int workers = 1;
  int runs = 1;
  bool no_skills = false;
  bool early_stop = false;
  std::string out_dir = "out";
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown config key '" + key + "' in " + where);
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"seed", "world", "chain", "group_size", "policy", "limits",
                             "reward", "penalty_mode", "retrieval", "epsilon", "workers",
                             "runs", "no_skills", "early_stop", "out"},
                         "top level");
  RunConfig c;
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("world")) {
    detail::reject_unknown(j["world"], {"n_scenarios"}, "world");
    if (j["world"].contains("n_scenarios")) c.n_scenarios = j["world"]["n_scenarios"];
  }
  if (j.contains("chain")) {
    detail::reject_unknown(j["chain"], {"k"}, "chain");
    if (j["chain"].contains("k")) c.chain_k = j["chain"]["k"];
  }
  if (j.contains("group_size")) c.group_size = j["group_size"];
  if (j.contains("policy")) {
    const auto& p = j["policy"];
    detail::reject_unknown(p, {"kind", "error_rate", "endpoint", "model", "temperature"},
                           "policy");
    if (p.contains("kind")) c.policy.kind = policy_kind_from_name(p["kind"]);
    if (p.contains("error_rate")) c.policy.error_rate = p["error_rate"];
    if (p.contains("endpoint")) c.policy.endpoint = p["endpoint"];
    if (p.contains("model")) c.policy.model = p["model"];
    if (p.contains("temperature")) c.policy.temperature = p["temperature"];
  }
  if (j.contains("limits")) {
    const auto& l = j["limits"];
    detail::reject_unknown(l, {"max_turns", "turn_token_cap", "context_token_cap"},
                           "limits");
    if (l.contains("max_turns")) c.limits.max_turns = l["max_turns"];
    if (l.contains("turn_token_cap")) c.limits.turn_token_cap = l["turn_token_cap"];
    if (l.contains("context_token_cap")) c.limits.context_token_cap = l["context_token_cap"];
  }
  if (j.contains("reward")) c.reward = reward_design_from_name(j["reward"]);
  if (j.contains("penalty_mode")) c.penalty_mode = penalty_mode_from_name(j["penalty_mode"]);
  if (j.contains("retrieval")) {
    const auto& r = j["retrieval"];
    detail::reject_unknown(r, {"mode", "ngram_threshold", "embed_threshold", "top_k",
                               "embed_endpoint", "embed_dim"},
                           "retrieval");
    if (r.contains("mode")) c.retrieval = retrieval_mode_from_name(r["mode"]);
    if (r.contains("ngram_threshold")) c.ngram_threshold = r["ngram_threshold"];
    if (r.contains("embed_threshold")) c.embed_threshold = r["embed_threshold"];
    if (r.contains("top_k")) c.top_k = r["top_k"];
    if (r.contains("embed_endpoint")) c.embed_endpoint = r["embed_endpoint"];
    if (r.contains("embed_dim")) c.embed_dim = r["embed_dim"];
  }
  if (j.contains("epsilon")) c.epsilon = j["epsilon"];
  if (j.contains("workers")) c.workers = j["workers"];
  if (j.contains("runs")) c.runs = j["runs"];
  if (j.contains("no_skills")) c.no_skills = j["no_skills"];
  if (j.contains("early_stop")) c.early_stop = j["early_stop"];
  if (j.contains("out")) c.out_dir = j["out"];

  if (c.n_scenarios < 1) throw ConfigError("world.n_scenarios must be >= 1");
  if (c.chain_k < 2 || c.chain_k > 3) throw ConfigError("chain.k must be 2 or 3");
  if (c.group_size < 2) throw ConfigError("group_size must be >= 2");
  if (c.policy.error_rate < 0 || c.policy.error_rate > 1)
    throw ConfigError("policy.error_rate must be in [0,1]");
  if (c.epsilon <= 0) throw ConfigError("epsilon must be positive");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"world", {{"n_scenarios", c.n_scenarios}}},
          {"chain", {{"k", c.chain_k}}},
          {"group_size", c.group_size},
          {"policy",
           {{"kind", policy_kind_name(c.policy.kind)},
            {"error_rate", c.policy.error_rate},
            {"endpoint", c.policy.endpoint},
            {"model", c.policy.model},
            {"temperature", c.policy.temperature}}},
          {"limits",
           {{"max_turns", c.limits.max_turns},
            {"turn_token_cap", c.limits.turn_token_cap},
            {"context_token_cap", c.limits.context_token_cap}}},
          {"reward", reward_design_name(c.reward)},
          {"penalty_mode", c.penalty_mode == PenaltyMode::Replace ? "replace" : "additive"},
          {"retrieval",
           {{"mode", retrieval_mode_name(c.retrieval)},
            {"ngram_threshold", c.ngram_threshold},
            {"embed_threshold", c.embed_threshold},
            {"top_k", c.top_k},
            {"embed_endpoint", c.embed_endpoint},
            {"embed_dim", c.embed_dim}}},
          {"epsilon", c.epsilon},
          {"workers", c.workers},
          {"runs", c.runs},
          {"no_skills", c.no_skills},
          {"early_stop", c.early_stop},
          {"out", c.out_dir}};
}

}  // namespace skillrl
