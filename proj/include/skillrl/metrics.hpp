#pragma once
// Evaluation metrics: task/scenario goal completion, step and token
// averages, skill-usage analytics, and multi-run aggregation. "Success" is
// outcome_r == 1 exactly, the same indicator the reward engine uses.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillrl/common.hpp"

namespace skillrl {

struct EvalTaskResult {
  std::string task_id;
  std::string scenario_id;
  double outcome_r = 0.0;
  int step_count = 0;
  long gen_token_count = 0;
  bool had_library = false;  // nonempty skill context at task start
  bool used_skill = false;   // 1_skill indicator
  std::vector<std::string> used_skill_names;
};

inline void to_json(nlohmann::json& j, const EvalTaskResult& r) {
  j = {{"type", "task"},
       {"task_id", r.task_id},           {"scenario_id", r.scenario_id},
       {"outcome_r", r.outcome_r},       {"step_count", r.step_count},
       {"gen_token_count", r.gen_token_count}, {"had_library", r.had_library},
       {"used_skill", r.used_skill},     {"used_skill_names", r.used_skill_names}};
}

inline void from_json(const nlohmann::json& j, EvalTaskResult& r) {
  j.at("task_id").get_to(r.task_id);
  j.at("scenario_id").get_to(r.scenario_id);
  j.at("outcome_r").get_to(r.outcome_r);
  j.at("step_count").get_to(r.step_count);
  j.at("gen_token_count").get_to(r.gen_token_count);
  j.at("had_library").get_to(r.had_library);
  j.at("used_skill").get_to(r.used_skill);
  j.at("used_skill_names").get_to(r.used_skill_names);
}

// Task Goal Completion: fraction of tasks with outcome exactly 1.
inline double tgc(const std::vector<EvalTaskResult>& results) {
  if (results.empty()) throw std::invalid_argument("tgc: empty result set");
  long complete = 0;
  for (const auto& r : results)
    if (r.outcome_r == 1.0) ++complete;
  return static_cast<double>(complete) / static_cast<double>(results.size());
}

// Scenario Goal Completion: fraction of scenarios whose tasks all completed.
inline double sgc(const std::vector<EvalTaskResult>& results) {
  if (results.empty()) throw std::invalid_argument("sgc: empty result set");
  std::map<std::string, bool> all_complete;
  for (const auto& r : results) {
    auto [it, inserted] = all_complete.try_emplace(r.scenario_id, true);
    it->second = it->second && r.outcome_r == 1.0;
  }
  long complete = 0;
  for (const auto& [id, ok] : all_complete)
    if (ok) ++complete;
  return static_cast<double>(complete) / static_cast<double>(all_complete.size());
}

inline double avg_steps(const std::vector<EvalTaskResult>& results) {
  if (results.empty()) throw std::invalid_argument("avg_steps: empty result set");
  double sum = 0;
  for (const auto& r : results) sum += r.step_count;
  return sum / static_cast<double>(results.size());
}

inline double avg_tokens(const std::vector<EvalTaskResult>& results) {
  if (results.empty()) throw std::invalid_argument("avg_tokens: empty result set");
  double sum = 0;
  for (const auto& r : results) sum += static_cast<double>(r.gen_token_count);
  return sum / static_cast<double>(results.size());
}

struct SkillMetrics {
  std::optional<double> usage_rate;          // used / had-library
  std::optional<double> success_usage_rate;  // complete among used; absent when no usage
  long library_size = 0;                     // distinct generated skill names
  long used_skill_num = 0;                   // distinct names actually used
};

inline SkillMetrics skill_metrics(const std::vector<EvalTaskResult>& results,
                                  long library_size) {
  SkillMetrics m;
  m.library_size = library_size;
  long had = 0, used = 0, used_and_complete = 0;
  std::set<std::string> names;
  for (const auto& r : results) {
    if (r.had_library) ++had;
    if (r.used_skill) {
      ++used;
      if (r.outcome_r == 1.0) ++used_and_complete;
    }
    for (const auto& n : r.used_skill_names) names.insert(n);
  }
  if (had > 0) m.usage_rate = static_cast<double>(used) / static_cast<double>(had);
  if (used > 0)
    m.success_usage_rate = static_cast<double>(used_and_complete) / static_cast<double>(used);
  m.used_skill_num = static_cast<long>(names.size());
  return m;
}

// ---------------------------------------------------------------------------
// Multi-run aggregation: mean and sample standard deviation (n-1) per metric.

struct Aggregate {
  double mean = 0.0;
  std::optional<double> std_dev;  // absent for a single run
};

inline std::map<std::string, Aggregate> aggregate_runs(
    const std::vector<std::map<std::string, double>>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
  std::map<std::string, Aggregate> out;
  for (const auto& [metric, first_value] : runs.front()) {
    std::vector<double> values;
    for (const auto& run : runs) {
      auto it = run.find(metric);
      if (it != run.end()) values.push_back(it->second);
    }
    Aggregate agg;
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    out[metric] = agg;
  }
  return out;
}

}  // namespace skillrl
