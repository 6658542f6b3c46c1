#include <catch2/catch_amalgamated.hpp>

#include "skillrl/reward.hpp"

using namespace skillrl;

namespace {

// Independent term-by-term oracle for the general K-chain reward, written
// straight from the three-term definition with explicit loops. Kept separate
// from the implementation on purpose.
std::vector<double> oracle_skill_integrated(const std::vector<double>& rs,
                                            const std::vector<std::vector<bool>>& used) {
  std::size_t K = rs.size();
  std::vector<double> out(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double value = rs[k];
    bool task_complete = rs[k] == 1.0;
    // generation bonus: some later complete task used a skill from task k
    if (k + 1 < K && task_complete) {
      bool any = false;
      for (std::size_t i = k + 1; i < K; ++i)
        if (rs[i] == 1.0 && used[i][k]) any = true;
      if (any) value += 1.0;
    }
    // usage bonus: this complete task used a skill from some earlier task
    if (k > 0 && task_complete) {
      bool any = false;
      for (std::size_t j = 0; j < k; ++j)
        if (used[k][j]) any = true;
      if (any) value += 1.0;
    }
    out[k] = value;
  }
  return out;
}

ChainOutcome make_outcome(const std::vector<double>& rs,
                          const std::vector<std::vector<bool>>& used,
                          const std::vector<bool>& no_code) {
  return ChainOutcome{rs, used, no_code};
}

}  // namespace

TEST_CASE("two-task closed form") {
  CHECK(skill_integrated_2(1, 1, true) == std::pair{2.0, 2.0});
  CHECK(skill_integrated_2(1, 1, false) == std::pair{1.0, 1.0});
  CHECK(skill_integrated_2(0.5, 1, true) == std::pair{0.5, 2.0});
  CHECK(skill_integrated_2(1, 0.5, true) == std::pair{1.0, 0.5});
  CHECK(skill_integrated_2(0, 0, true) == std::pair{0.0, 0.0});
  CHECK_THROWS_AS(skill_integrated_2(1.5, 0, false), std::invalid_argument);
}

TEST_CASE("general form on the worked three-task case") {
  // rs=(1,1,1), only task 3 used task 1's skill
  auto o = make_outcome({1, 1, 1}, {{}, {false}, {true, false}}, {false, false, false});
  auto rec = skill_integrated_general(o);
  CHECK(rec.Rs == std::vector<double>{2, 1, 2});
}

TEST_CASE("general form at K=2 equals the closed form everywhere") {
  for (double r1 : {0.0, 0.5, 1.0})
    for (double r2 : {0.0, 0.5, 1.0})
      for (bool used : {false, true}) {
        auto o = make_outcome({r1, r2}, {{}, {used}}, {false, false});
        auto rec = skill_integrated_general(o);
        auto [R1, R2] = skill_integrated_2(r1, r2, used);
        CHECK(rec.Rs[0] == R1);
        CHECK(rec.Rs[1] == R2);
      }
}

TEST_CASE("exhaustive agreement with the oracle at K=3") {
  const double rates[] = {0.0, 0.5, 1.0};
  for (double r1 : rates)
    for (double r2 : rates)
      for (double r3 : rates)
        for (int bits = 0; bits < 8; ++bits) {
          std::vector<std::vector<bool>> used = {
              {}, {(bits & 1) != 0}, {(bits & 2) != 0, (bits & 4) != 0}};
          auto o = make_outcome({r1, r2, r3}, used, {false, false, false});
          auto rec = skill_integrated_general(o);
          auto expect = oracle_skill_integrated({r1, r2, r3}, used);
          CHECK(rec.Rs == expect);
        }
}

TEST_CASE("outcome reward is the identity on rates") {
  auto o = make_outcome({0.3, 1.0}, {{}, {true}}, {false, false});
  CHECK(outcome_reward(o).Rs == std::vector<double>{0.3, 1.0});
  auto zeros = make_outcome({0, 0}, {{}, {false}}, {false, false});
  CHECK(outcome_reward(zeros).Rs == std::vector<double>{0, 0});
}

TEST_CASE("chain-based reward shares one bonus") {
  auto full = make_outcome({1, 1}, {{}, {false}}, {false, false});
  CHECK(chain_based_reward(full).Rs == std::vector<double>{2, 2});

  auto partial = make_outcome({1, 0.9}, {{}, {false}}, {false, false});
  CHECK(chain_based_reward(partial).Rs == std::vector<double>{1, 0.9});

  // symmetry of the bonus across random rates
  SplitMix rng(3);
  for (int i = 0; i < 100; ++i) {
    double r1 = rng.below(3) * 0.5;
    double r2 = rng.below(3) * 0.5;
    auto o = make_outcome({r1, r2}, {{}, {false}}, {false, false});
    auto rec = chain_based_reward(o);
    CHECK(rec.Rs[0] - r1 == rec.Rs[1] - r2);
  }

  auto k3 = make_outcome({1, 1, 1}, {{}, {false}, {false, false}}, {false, false, false});
  CHECK_THROWS_AS(chain_based_reward(k3), std::invalid_argument);
}

TEST_CASE("no-code penalty replaces by default") {
  auto o = make_outcome({1, 1}, {{}, {true}}, {false, true});
  auto rec = apply_no_code_penalty(skill_integrated_general(o), o);
  // R1 keeps the bonus computed on the graded r2; R2 becomes -1
  CHECK(rec.Rs == std::vector<double>{2, -1});

  auto clean = make_outcome({1, 1}, {{}, {true}}, {false, false});
  CHECK(apply_no_code_penalty(skill_integrated_general(clean), clean).Rs ==
        std::vector<double>{2, 2});

  auto first = make_outcome({0.5, 1}, {{}, {false}}, {true, false});
  CHECK(apply_no_code_penalty(outcome_reward(first), first).Rs ==
        std::vector<double>{-1, 1});
}

TEST_CASE("additive penalty subtracts instead") {
  auto o = make_outcome({1, 1}, {{}, {true}}, {false, true});
  auto rec = apply_no_code_penalty(skill_integrated_general(o), o, PenaltyMode::Additive);
  CHECK(rec.Rs == std::vector<double>{2, 1});  // 2 + (-1)
}

TEST_CASE("reward bounds hold over random outcomes") {
  SplitMix rng(11);
  for (int iter = 0; iter < 500; ++iter) {
    std::size_t K = 2 + rng.below(2);
    std::vector<double> rs;
    std::vector<std::vector<bool>> used;
    std::vector<bool> no_code;
    for (std::size_t k = 0; k < K; ++k) {
      rs.push_back(static_cast<double>(rng.below(5)) / 4.0);
      std::vector<bool> row;
      for (std::size_t j = 0; j < k; ++j) row.push_back(rng.below(2) == 0);
      used.push_back(row);
      no_code.push_back(rng.below(4) == 0);
    }
    auto o = make_outcome(rs, used, no_code);
    auto skill = compute_reward(o, RewardDesign::SkillIntegrated).Rs;
    for (std::size_t k = 0; k < skill.size(); ++k) {
      CHECK(skill[k] >= -1.0);
      // middle tasks of longer chains can earn both bonuses
      bool middle = k > 0 && k + 1 < skill.size();
      CHECK(skill[k] <= (middle ? 3.0 : 2.0));
    }
    for (double R : compute_reward(o, RewardDesign::Outcome).Rs) {
      CHECK(R >= -1.0);
      CHECK(R <= 1.0);
    }
    if (K == 2)
      for (double R : compute_reward(o, RewardDesign::ChainBased).Rs) {
        CHECK(R >= -1.0);
        CHECK(R <= 2.0);
      }
  }
}

TEST_CASE("bonus terms are gated on exact completion") {
  auto near = make_outcome({1.0 - 1e-9, 1}, {{}, {true}}, {false, false});
  auto rec = skill_integrated_general(near);
  CHECK(rec.Rs[0] == 1.0 - 1e-9);  // no generation bonus without exact 1
  CHECK(rec.Rs[1] == 2.0);
}

TEST_CASE("reward is nondecreasing in its own rate for fixed usage") {
  SplitMix rng(13);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::vector<bool>> used = {{}, {rng.below(2) == 0}, {rng.below(2) == 0, rng.below(2) == 0}};
    std::vector<double> rs = {static_cast<double>(rng.below(5)) / 4.0,
                              static_cast<double>(rng.below(5)) / 4.0,
                              static_cast<double>(rng.below(5)) / 4.0};
    std::size_t k = rng.below(3);
    auto low = rs;
    auto high = rs;
    low[k] = 0.5;
    high[k] = 1.0;
    auto o_low = make_outcome(low, used, {false, false, false});
    auto o_high = make_outcome(high, used, {false, false, false});
    CHECK(skill_integrated_general(o_low).Rs[k] <= skill_integrated_general(o_high).Rs[k]);
  }
}

TEST_CASE("malformed usage matrix is rejected") {
  ChainOutcome bad;
  bad.rs = {1, 1};
  bad.used = {{}, {true, true}};  // row 1 must have exactly 1 entry
  bad.no_code = {false, false};
  CHECK_THROWS_AS(skill_integrated_general(bad), std::invalid_argument);
}

TEST_CASE("chain outcome derives usage attribution from provenance") {
  auto scenarios = generate_world(31, 1);
  auto chain = build_chains(scenarios, 2, 5)[0];
  auto member = sequential_rollout(
      [](std::uint64_t) { return scripted_policy(miniworld_script_table()); }, chain,
      SkillLibrary{}, 1);
  ChainOutcome o = chain_outcome_from(member, chain);
  REQUIRE(o.K() == 2);
  CHECK(o.rs == std::vector<double>{1.0, 1.0});
  CHECK(o.used[1][0]);  // task 2 used the task-1 skill
  CHECK_FALSE(o.no_code[0]);
  auto rec = compute_reward(o, RewardDesign::SkillIntegrated);
  CHECK(rec.Rs == std::vector<double>{2, 2});
}
