// Acceptance suite: one check per criterion, one pass/fail line each.
// Exit code 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <vector>

#include <json.hpp>

#include "skillrl/config.hpp"
#include "skillrl/eval.hpp"
#include "skillrl/grpo.hpp"
#include "skillrl/retrieval.hpp"
#include "skillrl/reward.hpp"
#include "skillrl/rollout.hpp"
#include "skillrl/trajectory_io.hpp"

using namespace skillrl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

bool expect(bool ok, std::string& why, const std::string& message) {
  if (!ok && why.empty()) why = message;
  return ok;
}

// ---------------------------------------------------------------------------
// 1. Reward oracle equivalence. The oracle below is written term by term from
// the chain-reward definition, independently of reward.hpp.

namespace oracle {

double indicator(double r) { return r == 1.0 ? 1.0 : 0.0; }

std::vector<double> chain_reward(const std::vector<double>& rs,
                                 const std::vector<std::vector<bool>>& used,
                                 const std::vector<bool>& no_code) {
  const std::size_t K = rs.size();
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    double generation = 0.0;
    for (std::size_t i = k + 1; i < K; ++i) {
      double term = indicator(rs[i]) * (used[i][k] ? 1.0 : 0.0);
      if (term > generation) generation = term;  // max over later tasks
    }
    double usage = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (used[k][j]) usage = 1.0;
    out[k] = rs[k] + indicator(rs[k]) * generation + indicator(rs[k]) * usage;
  }
  for (std::size_t k = 0; k < K; ++k)
    if (no_code[k]) out[k] = -1.0;  // replacement penalty
  return out;
}

}  // namespace oracle

bool criterion_reward_oracle(std::string& why) {
  auto start = std::chrono::steady_clock::now();
  const double rates[] = {0.0, 0.5, 1.0};

  for (int K : {2, 3}) {
    int usage_bits = K == 2 ? 1 : 3;
    std::vector<double> rs(static_cast<std::size_t>(K));
    std::vector<int> idx(static_cast<std::size_t>(K), 0);
    // enumerate rs in {0, 0.5, 1}^K
    long combos = 1;
    for (int i = 0; i < K; ++i) combos *= 3;
    for (long c = 0; c < combos; ++c) {
      long rem = c;
      for (int i = 0; i < K; ++i) {
        rs[static_cast<std::size_t>(i)] = rates[rem % 3];
        rem /= 3;
      }
      for (int ub = 0; ub < (1 << usage_bits); ++ub) {
        std::vector<std::vector<bool>> used;
        int bit = 0;
        for (int k = 0; k < K; ++k) {
          std::vector<bool> row;
          for (int j = 0; j < k; ++j) row.push_back((ub >> bit++) & 1);
          used.push_back(row);
        }
        for (int nb = 0; nb < (1 << K); ++nb) {
          std::vector<bool> no_code;
          for (int k = 0; k < K; ++k) no_code.push_back((nb >> k) & 1);

          ChainOutcome o{rs, used, no_code};
          RewardRecord rec = compute_reward(o, RewardDesign::SkillIntegrated);
          std::vector<double> expected = oracle::chain_reward(rs, used, no_code);
          if (rec.Rs != expected) return expect(false, why, "general form mismatch");

          if (K == 2 && nb == 0) {
            // closed two-task equations, written out literally
            double r1 = rs[0], r2 = rs[1];
            double u = used[1][0] ? 1.0 : 0.0;
            double R1 = r1 + (r1 == 1.0 ? 1.0 : 0.0) * (r2 == 1.0 ? 1.0 : 0.0) * u;
            double R2 = r2 + (r2 == 1.0 ? 1.0 : 0.0) * u;
            auto [got1, got2] = skill_integrated_2(r1, r2, used[1][0]);
            if (got1 != R1 || got2 != R2)
              return expect(false, why, "closed form mismatch");
            if (rec.Rs[0] != R1 || rec.Rs[1] != R2)
              return expect(false, why, "closed form and general form disagree");
          }
        }
      }
    }
  }
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return expect(elapsed < 1000, why,
                "runtime " + std::to_string(elapsed) + " ms exceeds 1 s");
}

// ---------------------------------------------------------------------------
// 2. Advantage zero-sum.

bool criterion_advantage_zero_sum(std::string& why) {
  SplitMix rng(202);
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t G = 2 + rng.below(15);  // G in [2,16]
    std::vector<double> rewards;
    for (std::size_t i = 0; i < G; ++i) rewards.push_back(-1.0 + 3.0 * rng.uniform());
    std::vector<double> adv = group_advantage(rewards);
    double sum = 0.0;
    for (double a : adv) sum += a;
    if (std::abs(sum) > 1e-12)
      return expect(false, why, "advantage sum " + std::to_string(sum));
  }
  for (double level : {-1.0, 0.0, 0.5, 2.0}) {
    std::vector<double> flat(8, level);
    for (double a : group_advantage(flat))
      if (a != 0.0) return expect(false, why, "all-equal group not all-zero");
  }
  return true;
}

// ---------------------------------------------------------------------------
// 3. Objective numerics at epsilon = 0.2.

bool criterion_objective_numerics(std::string& why) {
  const double eps = 0.2;
  SplitMix rng(303);

  // unclipped region: J equals s*A exactly
  for (int iter = 0; iter < 200; ++iter) {
    double logp_old = -2.0 * rng.uniform();
    double s = 1.0 - eps + 2.0 * eps * rng.uniform();  // |s-1| <= eps
    double logp_new = logp_old + std::log(s);
    double adv = -2.0 + 4.0 * rng.uniform();
    TokenBatch b;
    b.sequences.push_back({TokenSeq{{logp_new, logp_old, true}}});
    double J = clipped_token_objective(b, {{adv}}, eps);
    double s_exact = std::exp(logp_new - logp_old);
    if (std::abs(s_exact - 1.0) <= eps && J != s_exact * adv)
      return expect(false, why, "unclipped token J != s*A");
  }

  // finite differences: s*A at unclipped tokens, 0 at strictly clipped ones
  const double h = 1e-6;
  struct Probe {
    double s, adv;
    bool strictly_clipped;
  };
  for (const Probe& p : std::vector<Probe>{{1.05, 1.3, false},
                                           {0.9, -0.8, false},
                                           {1.5, 0.7, true},
                                           {0.5, -1.1, true},
                                           {1.0, 2.0, false}}) {
    double logp_old = -1.0;
    double logp_new = logp_old + std::log(p.s);
    auto J = [&](double lp) {
      TokenBatch b;
      b.sequences.push_back({TokenSeq{{lp, logp_old, true}}});
      return clipped_token_objective(b, {{p.adv}}, eps);
    };
    double grad = (J(logp_new + h) - J(logp_new - h)) / (2 * h);
    if (p.strictly_clipped) {
      if (std::abs(grad) > 1e-9) return expect(false, why, "clipped gradient nonzero");
    } else {
      double want = std::exp(logp_new - logp_old) * p.adv;
      if (std::abs(grad - want) > 1e-5 * std::abs(want))
        return expect(false, why, "finite-difference gradient off at unclipped token");
    }
  }

  // masked tokens: perturbation changes the objective by exactly 0
  TokenBatch batch;
  for (int i = 0; i < 4; ++i) {
    TokenSeq seq;
    for (int t = 0; t < 24; ++t)
      seq.push_back({-0.5 + 0.01 * t, -0.6, t % 3 != 0});
    batch.sequences.push_back({seq, seq});
  }
  std::vector<std::vector<double>> adv = {{1, -1}, {0.5, 0.2}, {-0.4, 0}, {2, -2}};
  double before = clipped_token_objective(batch, adv, eps);
  TokenBatch perturbed = batch;
  for (auto& member : perturbed.sequences)
    for (auto& seq : member)
      for (auto& t : seq)
        if (!t.mask) {
          t.logp_new += 123.0;
          t.logp_old -= 45.0;
        }
  double after = clipped_token_objective(perturbed, adv, eps);
  if (before != after) return expect(false, why, "masked perturbation changed J");
  return true;
}

// ---------------------------------------------------------------------------
// 4. Skill-library isolation over 50 stochastic groups with G = 8.

bool criterion_library_isolation(std::string& why) {
  auto scenarios = generate_world(404, 50);
  auto chains = build_chains(scenarios, 2, 404);
  SeededPolicyFactory factory = [](std::uint64_t seed) {
    return stochastic_policy(miniworld_script_table(), seed, 0.3);
  };
  long violations = 0;
  for (const TaskChain& chain : chains) {
    GroupRollout group = group_rollout(factory, chain, 8, 404, Limits{}, 4);
    for (const MemberRecord& m : group.members) {
      if (!m.libraries_at_start[0].empty()) ++violations;
      if (!(m.libraries_at_start[1] == m.trajectories[0].library_at_end)) ++violations;
      if (!(m.final_library == m.trajectories[1].library_at_end)) ++violations;
      for (const Skill& s : m.libraries_at_start[1].entries()) {
        if (s.origin_task_id != chain.tasks[0].task_id) ++violations;
        bool saved_by_this_member = false;
        for (const SkillEvent& e : m.trajectories[0].skill_events)
          if (e.kind == SkillEvent::Kind::Save && e.skill_name == s.name)
            saved_by_this_member = true;
        if (!saved_by_this_member) ++violations;
      }
    }
  }
  return expect(violations == 0, why, std::to_string(violations) + " violations");
}

// ---------------------------------------------------------------------------
// 5. Rollout constants, bit-exact.

bool criterion_rollout_constants(std::string& why) {
  auto scenarios = generate_world(505, 1);
  Task task = scenarios[0].tasks[0];

  // truncation at 12,000 chars + notice
  Session session = reset(task);
  std::string big(12001, 'q');
  Observation obs = execute(session, "print(\"" + big + "\")");
  if (!obs.truncated) return expect(false, why, "truncation flag not set");
  if (obs.text.size() != 12000 + kTruncationNotice.size())
    return expect(false, why, "truncated length wrong");
  if (obs.text.substr(0, 12000) != big.substr(0, 12000))
    return expect(false, why, "truncated prefix wrong");
  if (obs.text.substr(12000) != "Observation truncated for display.")
    return expect(false, why, "notice text wrong");

  // exactly 40 agent turns on a never-finishing policy
  Policy stubborn = [](const PolicyRequest&) {
    PolicyResponse r;
    r.text = "print(\"retry\")";
    r.token_count = ws_token_count(r.text);
    return r;
  };
  Trajectory never = run_task(stubborn, task, SkillLibrary{}).trajectory;
  if (never.step_count != 40 || never.termination != Termination::MaxTurns)
    return expect(false, why, "max_turns stop not at 40");

  // context cap at 28,048 tokens: wide turns cross the budget mid-episode
  std::string wide = "print(\"x\")";
  for (int i = 0; i < 1399; ++i) wide += " print(\"x\")";
  Policy wordy = [&wide](const PolicyRequest&) {
    PolicyResponse r;
    r.text = wide;
    r.token_count = ws_token_count(r.text);
    return r;
  };
  Trajectory capped = run_task(wordy, task, SkillLibrary{}).trajectory;
  if (capped.termination != Termination::ContextLimit)
    return expect(false, why, "context termination missing");
  long total = ws_token_count(
      assemble_prompt(task, {}, default_prompt_template()));
  for (const TurnRecord& t : capped.turns) total += t.token_count;
  long minus_last = total - capped.turns.back().token_count;
  if (!(total > 28048 && minus_last <= 28048))
    return expect(false, why, "context cap did not trip at the 28,048 boundary");

  // early-stop predicate boundary cases
  RolloutProgress p;
  p.planned_total = 288;
  p.completed_total = 260;
  p.completed_per_task = {6, 7, 247};
  p.unfinished_steps = {25, 31};
  if (!early_stop_ready(p)) return expect(false, why, "260/288 case should stop");
  p.completed_total = 258;
  if (early_stop_ready(p)) return expect(false, why, "258/288 case should not stop");
  p.completed_total = 260;
  p.unfinished_steps = {25, 24};
  if (early_stop_ready(p)) return expect(false, why, "24-step case should not stop");
  return true;
}

// ---------------------------------------------------------------------------
// 6. Directional skill benefit on 30 scenarios.

bool criterion_skill_benefit(std::string& why) {
  auto start = std::chrono::steady_clock::now();
  auto scenarios = generate_world(606, 30);
  Policy policy = scripted_policy(miniworld_script_table());

  EvalOptions with;
  with.mode = RetrievalMode::SameScenario;
  EvalRun with_run = run_evaluation(scenarios, policy, with);

  EvalOptions without = with;
  without.no_skills = true;
  EvalRun without_run = run_evaluation(scenarios, policy, without);

  double steps_with = avg_steps(with_run.results);
  double steps_without = avg_steps(without_run.results);
  if (!(steps_with <= 0.8 * steps_without))
    return expect(false, why, "avg steps " + std::to_string(steps_with) + " vs " +
                                  std::to_string(steps_without));
  if (!(sgc(with_run.results) >= sgc(without_run.results)))
    return expect(false, why, "SGC regressed with skills");
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  return expect(elapsed < 60000, why, "runtime exceeds 60 s");
}

// ---------------------------------------------------------------------------
// 7. Retrieval parity on a 50-scenario corpus.

bool criterion_retrieval_parity(std::string& why) {
  auto scenarios = generate_world(707, 50);
  Policy policy = scripted_policy(miniworld_script_table());
  SkillStore store;
  long agree = 0, total = 0;
  for (const Scenario& scenario : scenarios)
    for (const Task& task : scenario.tasks) {
      SkillLibrary lib_same = same_scenario(store, task.scenario_id);
      SkillLibrary lib_ngram = retrieve_query_ngram(store, task.instruction, 0.5);
      ++total;
      if (lib_same == lib_ngram) ++agree;
      RunTaskResult result = run_task(policy, task, lib_same);
      for (const Skill& s : result.library.entries()) store.index_skill(s);
    }
  if (agree < static_cast<long>(std::ceil(0.95 * static_cast<double>(total))))
    return expect(false, why,
                  "parity " + std::to_string(agree) + "/" + std::to_string(total));

  // bigram oracle on 100 random pairs
  SplitMix rng(717);
  const std::vector<std::string> vocab = {"send", "the", "note", "to",   "friend",
                                          "pay",  "rent", "like", "song", "list"};
  auto sentence = [&]() {
    std::string s;
    int len = static_cast<int>(rng.below(9));
    for (int i = 0; i < len; ++i) {
      if (i) s += " ";
      s += vocab[rng.below(vocab.size())];
    }
    return s;
  };
  auto oracle_jaccard = [](const std::string& a, const std::string& b) {
    auto grams = [](const std::string& text) {
      std::vector<std::pair<std::string, std::string>> out;
      std::vector<std::string> w = split_ws(text);
      for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        std::pair<std::string, std::string> g{w[i], w[i + 1]};
        bool dup = false;
        for (const auto& e : out)
          if (e == g) dup = true;
        if (!dup) out.push_back(g);
      }
      return out;
    };
    auto A = grams(a);
    auto B = grams(b);
    if (A.empty() && B.empty()) return a == b ? 1.0 : 0.0;
    int inter = 0;
    for (const auto& g : A)
      for (const auto& h : B)
        if (g == h) ++inter;
    return static_cast<double>(inter) /
           static_cast<double>(A.size() + B.size() - inter);
  };
  for (int i = 0; i < 100; ++i) {
    std::string a = sentence();
    std::string b = sentence();
    if (jaccard_2gram(a, b) != oracle_jaccard(a, b))
      return expect(false, why, "bigram oracle mismatch on '" + a + "' vs '" + b + "'");
  }

  // embedding threshold boundary honors >=
  SkillStore tiny;
  Skill s;
  s.name = "pay_rent";
  s.params = {"user"};
  s.body = "# pays\napi auth.login(user, user)";
  s.origin_task_id = "t";
  s.origin_scenario_id = "s";
  s.origin_query = "send the rent payment now";
  tiny.index_skill(s);
  HashingEmbedder embedder(64, 1);
  auto vecs = embedder.embed({"send the rent payment today", s.origin_query});
  double best = cosine(vecs[0], vecs[1]);
  if (retrieve_query_embedding(tiny, "send the rent payment today", embedder, best).empty())
    return expect(false, why, "boundary score not retrieved under >=");
  if (!retrieve_query_embedding(tiny, "send the rent payment today", embedder,
                                std::nextafter(best, 2.0))
           .empty())
    return expect(false, why, "score below threshold retrieved");
  return true;
}

// ---------------------------------------------------------------------------
// 8. Metrics correctness.

bool criterion_metrics(std::string& why) {
  SplitMix rng(808);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<EvalTaskResult> rs;
    int scenarios = rng.range(1, 8);
    for (int s = 0; s < scenarios; ++s) {
      for (int t = 0; t < 3; ++t) {  // scenarios carry exactly three tasks
        EvalTaskResult r;
        r.task_id = "s" + std::to_string(s) + "_t" + std::to_string(t);
        r.scenario_id = "s" + std::to_string(s);
        r.outcome_r = static_cast<double>(rng.below(5)) / 4.0;
        rs.push_back(r);
      }
    }
    if (sgc(rs) > tgc(rs)) return expect(false, why, "SGC > TGC");
  }

  // hand-computed skill-usage counters
  auto row = [](const std::string& sc, double r, bool had, bool used,
                std::vector<std::string> names) {
    EvalTaskResult out;
    out.scenario_id = sc;
    out.task_id = sc + "_t";
    out.outcome_r = r;
    out.had_library = had;
    out.used_skill = used;
    out.used_skill_names = std::move(names);
    return out;
  };
  std::vector<EvalTaskResult> fixture = {
      row("a", 1.0, true, true, {"pay_rent"}),
      row("a", 0.5, true, true, {"note_items"}),
      row("a", 1.0, true, false, {}),
      row("b", 0.0, true, false, {}),
      row("b", 1.0, false, false, {}),
  };
  SkillMetrics sm = skill_metrics(fixture, 3);
  if (!sm.usage_rate || *sm.usage_rate != 0.5)
    return expect(false, why, "usage_rate wrong");
  if (!sm.success_usage_rate || *sm.success_usage_rate != 0.5)
    return expect(false, why, "success_usage_rate wrong");
  if (sm.library_size != 3 || sm.used_skill_num != 2)
    return expect(false, why, "library counters wrong");
  SkillMetrics none = skill_metrics({row("a", 1.0, true, false, {})}, 1);
  if (none.success_usage_rate.has_value())
    return expect(false, why, "empty denominator must report absent");

  auto agg = aggregate_runs({{{"tgc", 70.0}}, {{"tgc", 72.0}}, {{"tgc", 74.0}}});
  if (agg.at("tgc").mean != 72.0) return expect(false, why, "aggregate mean wrong");
  if (!agg.at("tgc").std_dev || *agg.at("tgc").std_dev != 2.0)
    return expect(false, why, "aggregate sample std wrong");
  return true;
}

// ---------------------------------------------------------------------------
// 9. End-to-end determinism through the CLI, independent of --workers.

bool criterion_determinism(std::string& why) {
  fs::path base = fs::temp_directory_path() / "skillrl_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);

  auto run = [&](const std::string& args) {
    std::string command = std::string(SKILLRL_CLI) + " " + args + " > " +
                          (base / "log.txt").string() + " 2>&1";
    int status = std::system(command.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  auto slurp = [&](const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
      all += fs::relative(f, dir).string() + "\n";
      all += read_text_file(f.string());
    }
    return all;
  };

  std::string flags = "--seed 17 --world 3 --group-size 4 --policy stochastic "
                      "--error-rate 0.35 ";
  for (const auto& [name, workers] :
       std::vector<std::pair<std::string, std::string>>{{"a", "1"}, {"b", "1"}, {"c", "4"}}) {
    if (!run("rollout " + flags + "--workers " + workers + " --out " +
             (base / ("roll_" + name)).string()))
      return expect(false, why, "rollout invocation failed");
    if (!run("evaluate --seed 17 --world 3 --out " + (base / ("eval_" + name)).string()))
      return expect(false, why, "evaluate invocation failed");
  }

  std::string roll_a = slurp(base / "roll_a" / "trajectories");
  if (roll_a != slurp(base / "roll_b" / "trajectories"))
    return expect(false, why, "re-run produced different trajectory logs");
  if (roll_a != slurp(base / "roll_c" / "trajectories"))
    return expect(false, why, "worker count changed trajectory logs");

  auto eval_files = [&](const std::string& name) {
    return read_text_file((base / ("eval_" + name) / "eval.jsonl").string()) +
           read_text_file((base / ("eval_" + name) / "summary.json").string()) +
           slurp(base / ("eval_" + name) / "trajectories");
  };
  if (eval_files("a") != eval_files("b") || eval_files("a") != eval_files("c"))
    return expect(false, why, "evaluation outputs differ across runs");

  fs::remove_all(base);
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"1 reward oracle equivalence (K=2,3 exhaustive, exact)", criterion_reward_oracle},
      {"2 advantage zero-sum (1000 random groups, 1e-12)", criterion_advantage_zero_sum},
      {"3 objective numerics (clip identity, FD gradient, mask)", criterion_objective_numerics},
      {"4 skill-library isolation (50 groups, G=8)", criterion_library_isolation},
      {"5 rollout constants (12000+notice, 40 turns, 28048, early stop)",
       criterion_rollout_constants},
      {"6 directional skill benefit (30 scenarios, steps & SGC)", criterion_skill_benefit},
      {"7 retrieval parity (>=95%, bigram oracle, >= boundary)", criterion_retrieval_parity},
      {"8 metrics correctness (SGC<=TGC, counters, mean±std)", criterion_metrics},
      {"9 end-to-end determinism (reruns and --workers)", criterion_determinism},
  };

  int failures = 0;
  for (Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string why;
    bool ok = false;
    try {
      ok = c.run(why);
    } catch (const std::exception& e) {
      why = e.what();
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - start)
                  .count();
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << " (" << ms << " ms)";
    if (!ok && !why.empty()) std::cout << " -- " << why;
    std::cout << "\n";
    if (!ok) ++failures;
  }
  if (failures) std::cout << failures << " criteria failed\n";
  return failures == 0 ? 0 : 1;
}
