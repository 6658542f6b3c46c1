#pragma once
// Evaluation pipeline: iterates scenarios sequentially, picks each task's
// starting library through the configured retrieval mode, runs the task, and
// indexes newly saved skills back into the store. Same-scenario mode shares
// one accumulating library across a scenario's tasks; the no-skills ablation
// forces an empty library everywhere.

#include <set>
#include <string>
#include <vector>

#include "skillrl/agent_loop.hpp"
#include "skillrl/metrics.hpp"
#include "skillrl/retrieval.hpp"
#include "skillrl/world.hpp"

namespace skillrl {

enum class RetrievalMode { SameScenario, QueryNgram, QueryEmbedding, SkillEmbedding };

inline std::string retrieval_mode_name(RetrievalMode m) {
  switch (m) {
    case RetrievalMode::SameScenario: return "same_scenario";
    case RetrievalMode::QueryNgram: return "query_ngram";
    case RetrievalMode::QueryEmbedding: return "query_embedding";
    case RetrievalMode::SkillEmbedding: return "skill_embedding";
  }
  return "same_scenario";
}

inline RetrievalMode retrieval_mode_from_name(const std::string& s) {
  if (s == "same_scenario") return RetrievalMode::SameScenario;
  if (s == "query_ngram") return RetrievalMode::QueryNgram;
  if (s == "query_embedding") return RetrievalMode::QueryEmbedding;
  if (s == "skill_embedding") return RetrievalMode::SkillEmbedding;
  throw ConfigError("unknown retrieval mode '" + s + "'");
}

struct EvalOptions {
  RetrievalMode mode = RetrievalMode::SameScenario;
  bool no_skills = false;
  double ngram_threshold = 0.5;
  double embed_threshold = 0.65;
  int top_k = 5;
  Limits limits;
};

struct EvalRun {
  std::vector<EvalTaskResult> results;
  std::vector<Trajectory> trajectories;  // aligned with results
  SkillStore store;
  long library_size = 0;  // distinct skill names generated during the run
};

inline SkillLibrary select_library(const SkillStore& store, const Task& task,
                                   const EvalOptions& opt, Embedder* embedder) {
  if (opt.no_skills) return {};
  switch (opt.mode) {
    case RetrievalMode::SameScenario:
      return same_scenario(store, task.scenario_id);
    case RetrievalMode::QueryNgram:
      return retrieve_query_ngram(store, task.instruction, opt.ngram_threshold);
    case RetrievalMode::QueryEmbedding: {
      if (!embedder) throw ConfigError("query_embedding retrieval needs an embedder");
      return retrieve_query_embedding(store, task.instruction, *embedder,
                                      opt.embed_threshold);
    }
    case RetrievalMode::SkillEmbedding: {
      if (!embedder) throw ConfigError("skill_embedding retrieval needs an embedder");
      SkillLibrary lib;
      for (const Skill& s :
           retrieve_skill_embedding(store, task.instruction, *embedder, opt.top_k))
        lib.insert_raw(s);
      return lib;
    }
  }
  return {};
}

inline EvalRun run_evaluation(const std::vector<Scenario>& scenarios, const Policy& policy,
                              const EvalOptions& opt, Embedder* embedder = nullptr,
                              SkillStore initial_store = {}) {
  EvalRun run;
  run.store = std::move(initial_store);
  std::set<std::string> generated;
  for (const Scenario& scenario : scenarios) {
    for (const Task& task : scenario.tasks) {
      SkillLibrary library_in = select_library(run.store, task, opt, embedder);
      bool had_library = !library_in.empty();

      RunTaskResult result = run_task(policy, task, std::move(library_in), opt.limits);
      const Trajectory& traj = result.trajectory;

      EvalTaskResult row;
      row.task_id = task.task_id;
      row.scenario_id = task.scenario_id;
      row.outcome_r = traj.outcome_r;
      row.step_count = traj.step_count;
      row.gen_token_count = traj.gen_token_count;
      row.had_library = had_library;
      row.used_skill = detect_skill_usage(traj);
      std::set<std::string> used_names;
      for (const SkillEvent& e : traj.skill_events) {
        if (e.kind == SkillEvent::Kind::Usage && e.execution_ok)
          used_names.insert(e.skill_name);
        if (e.kind == SkillEvent::Kind::Save) generated.insert(e.skill_name);
      }
      row.used_skill_names.assign(used_names.begin(), used_names.end());
      run.results.push_back(std::move(row));
      run.trajectories.push_back(traj);

      if (!opt.no_skills)
        for (const Skill& s : result.library.entries()) run.store.index_skill(s);
    }
  }
  run.library_size = static_cast<long>(generated.size());
  return run;
}

inline std::map<std::string, double> summary_metrics(const EvalRun& run) {
  std::map<std::string, double> out;
  out["tgc"] = tgc(run.results);
  out["sgc"] = sgc(run.results);
  out["avg_steps"] = avg_steps(run.results);
  out["avg_tokens"] = avg_tokens(run.results);
  SkillMetrics sm = skill_metrics(run.results, run.library_size);
  if (sm.usage_rate) out["usage_rate"] = *sm.usage_rate;
  if (sm.success_usage_rate) out["success_usage_rate"] = *sm.success_usage_rate;
  out["library_size"] = static_cast<double>(sm.library_size);
  out["used_skill_num"] = static_cast<double>(sm.used_skill_num);
  return out;
}

}  // namespace skillrl
