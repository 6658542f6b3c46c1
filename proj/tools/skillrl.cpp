// skillrl command line: world generation, rollout, evaluation under the four
// retrieval modes, reward auditing, metric reports, and deterministic replay.
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "skillrl/config.hpp"
#include "skillrl/eval.hpp"
#include "skillrl/grpo.hpp"
#include "skillrl/http_embedder.hpp"
#include "skillrl/remote_policy.hpp"
#include "skillrl/reward.hpp"
#include "skillrl/rollout.hpp"
#include "skillrl/trajectory_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skillrl;

namespace {

// ---------------------------------------------------------------------------
// Config assembly: defaults, then --config file, then command-line overrides.

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> world;
  std::optional<int> chains;
  std::optional<int> group_size;
  std::optional<std::string> policy;
  std::optional<double> error_rate;
  std::optional<std::string> retrieval;
  std::optional<std::string> reward;
  std::optional<std::string> penalty_mode;
  std::optional<double> epsilon;
  std::optional<int> workers;
  std::optional<int> runs;
  bool no_skills = false;
  std::optional<std::string> out;
  std::optional<std::string> config_path;
  std::optional<std::string> library_path;
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "root seed");
  cmd->add_option("--config", ov.config_path, "JSON config file");
  cmd->add_option("--world", ov.world, "number of scenarios");
  cmd->add_option("--chains", ov.chains, "task chain length K (2 or 3)");
  cmd->add_option("--group-size", ov.group_size, "rollout group size G");
  cmd->add_option("--policy", ov.policy, "scripted | stochastic | remote");
  cmd->add_option("--error-rate", ov.error_rate, "stochastic corruption rate");
  cmd->add_option("--retrieval", ov.retrieval,
                  "same_scenario | query_ngram | query_embedding | skill_embedding");
  cmd->add_option("--reward", ov.reward, "skill_integrated | outcome | chain_based");
  cmd->add_option("--penalty-mode", ov.penalty_mode, "replace | additive");
  cmd->add_option("--epsilon", ov.epsilon, "clip ratio");
  cmd->add_option("--workers", ov.workers, "rollout worker threads");
  cmd->add_option("--runs", ov.runs, "evaluation repetitions");
  cmd->add_flag("--no-skills", ov.no_skills, "force empty skill libraries");
  cmd->add_option("--out", ov.out, "output directory");
  cmd->add_option("--library", ov.library_path, "initial skill library JSONL");
}

RunConfig resolve_config(const Overrides& ov) {
  json base = json::object();
  if (ov.config_path) {
    json parsed = json::parse(read_text_file(*ov.config_path), nullptr, false);
    if (parsed.is_discarded())
      throw ConfigError("config file " + *ov.config_path + " is not valid JSON");
    base = parsed;
  }
  RunConfig cfg = config_from_json(base);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.world) cfg.n_scenarios = *ov.world;
  if (ov.chains) cfg.chain_k = *ov.chains;
  if (ov.group_size) cfg.group_size = *ov.group_size;
  if (ov.policy) cfg.policy.kind = policy_kind_from_name(*ov.policy);
  if (ov.error_rate) cfg.policy.error_rate = *ov.error_rate;
  if (ov.retrieval) cfg.retrieval = retrieval_mode_from_name(*ov.retrieval);
  if (ov.reward) cfg.reward = reward_design_from_name(*ov.reward);
  if (ov.penalty_mode) cfg.penalty_mode = penalty_mode_from_name(*ov.penalty_mode);
  if (ov.epsilon) cfg.epsilon = *ov.epsilon;
  if (ov.workers) cfg.workers = *ov.workers;
  if (ov.runs) cfg.runs = *ov.runs;
  if (ov.no_skills) cfg.no_skills = true;
  if (ov.out) cfg.out_dir = *ov.out;
  // revalidate after overrides
  return config_from_json(config_to_json(cfg));
}

Policy build_policy(const RunConfig& cfg, std::uint64_t seed) {
  switch (cfg.policy.kind) {
    case PolicyKind::Scripted:
      return scripted_policy(miniworld_script_table());
    case PolicyKind::Stochastic:
      return stochastic_policy(miniworld_script_table(), seed, cfg.policy.error_rate);
    case PolicyKind::Remote: {
      RemoteConfig rc;
      rc.endpoint_url = cfg.policy.endpoint;
      rc.model = cfg.policy.model;
      rc.temperature = cfg.policy.temperature;
      if (rc.endpoint_url.empty())
        throw ConfigError("remote policy requires policy.endpoint");
      return remote_policy(rc);
    }
  }
  throw ConfigError("unknown policy kind");
}

SeededPolicyFactory build_policy_factory(const RunConfig& cfg) {
  return [cfg](std::uint64_t task_seed) { return build_policy(cfg, task_seed); };
}

std::unique_ptr<Embedder> build_embedder(const RunConfig& cfg) {
  if (!cfg.embed_endpoint.empty())
    return std::make_unique<HttpEmbedder>(cfg.embed_endpoint, cfg.embed_dim);
  return std::make_unique<HashingEmbedder>(cfg.embed_dim, 1);
}

SkillLibrary load_initial_library(const Overrides& ov) {
  if (!ov.library_path) return {};
  return SkillLibrary::deserialize(read_text_file(*ov.library_path));
}

std::string two_digit(int v) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// generate-world

int cmd_generate_world(const Overrides& ov) {
  RunConfig cfg = resolve_config(ov);
  auto scenarios = generate_world(cfg.seed, cfg.n_scenarios);
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/world.json",
                  world_to_json(cfg.seed, scenarios).dump(2) + "\n");
  json manifest = {{"command", "generate-world"}, {"config", config_to_json(cfg)}};
  write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << scenarios.size() << " scenarios ("
            << scenarios.size() * 3 << " tasks) to " << cfg.out_dir << "/world.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rollout

int cmd_rollout(const Overrides& ov) {
  RunConfig cfg = resolve_config(ov);
  SkillLibrary init = load_initial_library(ov);
  auto scenarios = generate_world(cfg.seed, cfg.n_scenarios);
  auto chains = build_chains(scenarios, cfg.chain_k, cfg.seed);
  SeededPolicyFactory factory = build_policy_factory(cfg);

  fs::create_directories(cfg.out_dir + "/trajectories");

  std::vector<GroupRollout> groups;
  groups.reserve(chains.size());
  for (const TaskChain& chain : chains)
    groups.push_back(group_rollout(factory, chain, cfg.group_size, cfg.seed, cfg.limits,
                                   cfg.workers, init));

  // Optional deterministic early stop over the whole batch.
  std::vector<std::vector<bool>> cancelled(groups.size());
  if (cfg.early_stop) {
    std::vector<MemberPlan> plans;
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (const MemberRecord& m : groups[g].members) {
        MemberPlan plan;
        plan.chain_index = static_cast<int>(g);
        for (const Trajectory& t : m.trajectories) plan.task_steps.push_back(t.step_count);
        plans.push_back(plan);
      }
    std::vector<bool> flat = plan_early_stop(plans);
    std::size_t at = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      cancelled[g].assign(groups[g].members.size(), false);
      for (std::size_t m = 0; m < groups[g].members.size(); ++m) cancelled[g][m] = flat[at++];
    }
  } else {
    for (std::size_t g = 0; g < groups.size(); ++g)
      cancelled[g].assign(groups[g].members.size(), false);
  }

  json manifest_chains = json::array();
  json manifest_groups = json::array();
  json excluded = json::array();
  long written = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const GroupRollout& group = groups[g];
    json task_ids = json::array();
    for (const Task& t : group.chain.tasks) task_ids.push_back(t.task_id);
    manifest_chains.push_back(
        {{"scenario_id", group.chain.scenario_id}, {"task_ids", task_ids}});

    json members = json::array();
    for (const MemberRecord& m : group.members) {
      bool is_cancelled = cancelled[g][static_cast<std::size_t>(m.member_index)];
      json files = json::array();
      for (std::size_t k = 0; k < m.trajectories.size(); ++k) {
        std::string file = "chain" + two_digit(static_cast<int>(g)) + "_member" +
                           two_digit(m.member_index) + "_task" + std::to_string(k) +
                           ".jsonl";
        write_text_file(cfg.out_dir + "/trajectories/" + file,
                        trajectory_to_jsonl(m.trajectories[k]));
        files.push_back(file);
        ++written;
      }
      members.push_back({{"member_index", m.member_index},
                         {"cancelled", is_cancelled},
                         {"files", files}});
      if (is_cancelled)
        excluded.push_back(
            {{"chain_index", g}, {"member_index", m.member_index},
             {"note", "early stop: excluded from reward groups"}});
    }
    manifest_groups.push_back({{"chain_index", g}, {"members", members}});
  }

  json manifest = {{"command", "rollout"},
                   {"config", config_to_json(cfg)},
                   {"chains", manifest_chains},
                   {"groups", manifest_groups},
                   {"excluded_members", excluded}};
  write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "rolled out " << chains.size() << " chains x " << cfg.group_size
            << " members (" << written << " trajectories) to " << cfg.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const Overrides& ov) {
  RunConfig cfg = resolve_config(ov);
  auto scenarios = generate_world(cfg.seed, cfg.n_scenarios);
  Policy policy = build_policy(cfg, cfg.seed);
  auto embedder = build_embedder(cfg);

  EvalOptions opt;
  opt.mode = cfg.retrieval;
  opt.no_skills = cfg.no_skills;
  opt.ngram_threshold = cfg.ngram_threshold;
  opt.embed_threshold = cfg.embed_threshold;
  opt.top_k = cfg.top_k;
  opt.limits = cfg.limits;

  SkillStore initial;
  for (const Skill& s : load_initial_library(ov).entries()) initial.index_skill(s);
  EvalRun run = run_evaluation(scenarios, policy, opt, embedder.get(), std::move(initial));

  fs::create_directories(cfg.out_dir + "/trajectories");
  std::string rows;
  for (const EvalTaskResult& r : run.results) {
    rows += json(r).dump();
    rows += '\n';
  }
  rows += json{{"type", "run_stats"}, {"library_size", run.library_size}}.dump();
  rows += '\n';
  write_text_file(cfg.out_dir + "/eval.jsonl", rows);
  for (std::size_t i = 0; i < run.trajectories.size(); ++i)
    write_text_file(cfg.out_dir + "/trajectories/" + run.results[i].task_id + ".jsonl",
                    trajectory_to_jsonl(run.trajectories[i]));
  if (!cfg.no_skills) save_store(run.store, cfg.out_dir + "/store");

  auto metrics = summary_metrics(run);
  json summary = json::object();
  for (const auto& [k, v] : metrics) summary[k] = v;
  SkillMetrics sm = skill_metrics(run.results, run.library_size);
  if (!sm.usage_rate) summary["usage_rate"] = nullptr;
  if (!sm.success_usage_rate) summary["success_usage_rate"] = nullptr;
  json manifest = {{"command", "evaluate"}, {"config", config_to_json(cfg)}};
  write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  write_text_file(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");

  std::cout << "evaluated " << run.results.size() << " tasks under "
            << retrieval_mode_name(cfg.retrieval) << (cfg.no_skills ? " (no skills)" : "")
            << "\n";
  for (const auto& [k, v] : metrics) std::cout << "  " << k << " = " << v << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// reward-audit

int cmd_reward_audit(const std::string& in_dir, const Overrides& ov) {
  json manifest = json::parse(read_text_file(in_dir + "/manifest.json"));
  RunConfig cfg = config_from_json(manifest.at("config"));
  if (ov.reward) cfg.reward = reward_design_from_name(*ov.reward);
  if (ov.penalty_mode) cfg.penalty_mode = penalty_mode_from_name(*ov.penalty_mode);

  json audit = json::array();
  std::cout << "chain member task           r  used no_code       R       A\n";
  for (const auto& jgroup : manifest.at("groups")) {
    std::size_t chain_index = jgroup.at("chain_index").get<std::size_t>();
    const json& jchain = manifest.at("chains")[chain_index];
    TaskChain chain;
    chain.scenario_id = jchain.at("scenario_id").get<std::string>();
    for (const auto& tid : jchain.at("task_ids")) {
      Task stub;
      stub.task_id = tid.get<std::string>();
      chain.tasks.push_back(stub);
    }

    std::vector<MemberRecord> members;
    for (const auto& jmember : jgroup.at("members")) {
      if (jmember.at("cancelled").get<bool>()) continue;
      MemberRecord m;
      m.member_index = jmember.at("member_index").get<int>();
      for (const auto& f : jmember.at("files"))
        m.trajectories.push_back(trajectory_from_jsonl(
            read_text_file(in_dir + "/trajectories/" + f.get<std::string>())));
      members.push_back(std::move(m));
    }
    if (members.empty()) continue;

    std::vector<ChainOutcome> outcomes;
    std::vector<RewardRecord> records;
    for (const MemberRecord& m : members) {
      ChainOutcome o = chain_outcome_from(m, chain);
      records.push_back(compute_reward(o, cfg.reward, cfg.penalty_mode));
      outcomes.push_back(std::move(o));
    }

    std::size_t K = chain.tasks.size();
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> rewards;
      for (const RewardRecord& rec : records) rewards.push_back(rec.Rs[k]);
      std::vector<double> advantages =
          members.size() >= 2 ? group_advantage(rewards)
                              : std::vector<double>(rewards.size(), 0.0);
      for (std::size_t i = 0; i < members.size(); ++i) {
        json row = {{"chain_index", chain_index},
                    {"member_index", members[i].member_index},
                    {"task_index", k},
                    {"task_id", chain.tasks[k].task_id},
                    {"r", outcomes[i].rs[k]},
                    {"used", outcomes[i].used_any(k)},
                    {"no_code", outcomes[i].no_code[k]},
                    {"R", records[i].Rs[k]},
                    {"advantage", advantages[i]}};
        audit.push_back(row);
        std::ostringstream line;
        line << std::setw(5) << chain_index << " " << std::setw(6)
             << members[i].member_index << " " << std::setw(4) << k << " "
             << std::setw(11) << chain.tasks[k].task_id << " " << std::setw(5)
             << outcomes[i].rs[k] << " " << std::setw(5)
             << (outcomes[i].used_any(k) ? "yes" : "no") << " " << std::setw(7)
             << (outcomes[i].no_code[k] ? "yes" : "no") << " " << std::setw(7)
             << records[i].Rs[k] << " " << std::setw(7) << advantages[i];
        std::cout << line.str() << "\n";
      }
    }
  }
  std::string out_dir = ov.out ? *ov.out : in_dir;
  write_text_file(out_dir + "/audit.json", audit.dump(2) + "\n");
  std::cout << "wrote " << audit.size() << " rows to " << out_dir << "/audit.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// metrics

void print_metric_table(const std::map<std::string, Aggregate>& agg) {
  std::cout << std::left << std::setw(20) << "metric" << std::setw(12) << "mean"
            << "std\n";
  for (const auto& [name, a] : agg) {
    std::cout << std::left << std::setw(20) << name << std::setw(12) << a.mean;
    if (a.std_dev)
      std::cout << *a.std_dev;
    else
      std::cout << "-";
    std::cout << "\n";
  }
}

int cmd_metrics(const std::string& in_file, const Overrides& ov) {
  RunConfig cfg = resolve_config(ov);
  if (!in_file.empty()) {
    EvalRun run;
    std::string text = read_text_file(in_file);
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      if (end > start) {
        json row = json::parse(text.substr(start, end - start));
        if (row.value("type", "task") == "run_stats")
          run.library_size = row.at("library_size").get<long>();
        else
          run.results.push_back(row.get<EvalTaskResult>());
      }
      start = end + 1;
    }
    if (run.results.empty()) throw std::runtime_error("no task rows in " + in_file);
    auto metrics = summary_metrics(run);
    std::map<std::string, Aggregate> agg;
    for (const auto& [k, v] : metrics) agg[k] = {v, std::nullopt};
    print_metric_table(agg);
    json out = json::object();
    for (const auto& [k, v] : metrics) out[k] = v;
    fs::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir + "/metrics.json", out.dump(2) + "\n");
    return 0;
  }

  // Repeat evaluation with seeds S..S+N-1 and aggregate.
  auto embedder = build_embedder(cfg);
  EvalOptions opt;
  opt.mode = cfg.retrieval;
  opt.no_skills = cfg.no_skills;
  opt.ngram_threshold = cfg.ngram_threshold;
  opt.embed_threshold = cfg.embed_threshold;
  opt.top_k = cfg.top_k;
  opt.limits = cfg.limits;

  std::vector<std::map<std::string, double>> runs;
  for (int i = 0; i < cfg.runs; ++i) {
    std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    auto scenarios = generate_world(seed, cfg.n_scenarios);
    Policy policy = build_policy(cfg, seed);
    EvalRun run = run_evaluation(scenarios, policy, opt, embedder.get());
    runs.push_back(summary_metrics(run));
  }
  auto agg = aggregate_runs(runs);
  print_metric_table(agg);
  json out = json::object();
  for (const auto& [name, a] : agg) {
    out[name] = {{"mean", a.mean}};
    if (a.std_dev) out[name]["std"] = *a.std_dev;
  }
  fs::create_directories(cfg.out_dir);
  write_text_file(cfg.out_dir + "/aggregate.json", out.dump(2) + "\n");
  std::cout << "aggregated " << cfg.runs << " runs (seeds " << cfg.seed << ".."
            << cfg.seed + static_cast<std::uint64_t>(cfg.runs) - 1 << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// replay

int cmd_replay(const std::string& in_file, const std::string& manifest_path) {
  json manifest = json::parse(read_text_file(manifest_path));
  RunConfig cfg = config_from_json(manifest.at("config"));
  Trajectory traj = trajectory_from_jsonl(read_text_file(in_file));

  auto scenarios = generate_world(cfg.seed, cfg.n_scenarios);
  const Task* task = nullptr;
  for (const auto& sc : scenarios)
    for (const auto& t : sc.tasks)
      if (t.task_id == traj.task_id) task = &t;
  if (!task) throw std::runtime_error("task " + traj.task_id + " not in the seeded world");

  ReplayReport report = replay_trajectory(*task, traj);
  if (report.ok) {
    std::cout << "replay ok: " << traj.task_id << " (" << traj.turns.size()
              << " turns, outcome " << traj.outcome_r << ")\n";
    return 0;
  }
  std::cerr << "replay diverged: " << report.detail << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skill-library agent rollout and evaluation harness"};
  app.require_subcommand(1);

  Overrides ov_world, ov_rollout, ov_eval, ov_audit, ov_metrics;
  std::string audit_in, metrics_in, replay_in, replay_manifest;

  CLI::App* gen = app.add_subcommand("generate-world", "emit the seeded world fixture");
  add_common_options(gen, ov_world);

  CLI::App* roll = app.add_subcommand("rollout", "group sequential rollouts over chains");
  add_common_options(roll, ov_rollout);

  CLI::App* eval = app.add_subcommand("evaluate", "scenario evaluation with retrieval");
  add_common_options(eval, ov_eval);

  CLI::App* audit = app.add_subcommand("reward-audit", "per-member per-task reward table");
  audit->add_option("--in", audit_in, "rollout output directory")->required();
  add_common_options(audit, ov_audit);

  CLI::App* metrics = app.add_subcommand("metrics", "metric summary / multi-run aggregate");
  metrics->add_option("--in", metrics_in, "evaluation JSONL to summarize");
  add_common_options(metrics, ov_metrics);

  CLI::App* replay = app.add_subcommand("replay", "re-execute and verify a trajectory log");
  replay->add_option("--in", replay_in, "trajectory JSONL")->required();
  replay->add_option("--manifest", replay_manifest, "manifest.json of the run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate_world(ov_world);
    if (roll->parsed()) return cmd_rollout(ov_rollout);
    if (eval->parsed()) return cmd_evaluate(ov_eval);
    if (audit->parsed()) return cmd_reward_audit(audit_in, ov_audit);
    if (metrics->parsed()) return cmd_metrics(metrics_in, ov_metrics);
    if (replay->parsed()) return cmd_replay(replay_in, replay_manifest);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
