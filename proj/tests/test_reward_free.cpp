#include <catch2/catch_amalgamated.hpp>

#include "mailbench/analysis.hpp"
#include "mailbench/envs.hpp"
#include "mailbench/matrix_nash.hpp"
#include "mailbench/reward_free.hpp"

using namespace mailbench;

namespace {

// Two states, two actions: action 0 advances to state 1 which absorbs,
// action 1 stays put. Deterministic.
InducedMdp chain_mdp(int horizon, int target_state, int target_stage) {
  const int S = 2, A = 2;
  std::vector<Vec> t(horizon, Vec(static_cast<size_t>(S) * A * S, 0.0));
  for (int h = 0; h < horizon; ++h) {
    auto at = [&](int s, int a, int sp) -> double& {
      return t[h][(static_cast<size_t>(s) * A + a) * S + sp];
    };
    at(0, 0, 1) = 1.0;
    at(0, 1, 0) = 1.0;
    at(1, 0, 1) = 1.0;
    at(1, 1, 1) = 1.0;
  }
  return InducedMdp(horizon, S, A, Vec{1.0, 0.0}, std::move(t),
                    indicator_reward(horizon, S, A, target_state, target_stage));
}

InducedMdp lower_bound_induced(double rho3 = 0.5) {
  auto env = make_lower_bound_game(1.0, rho3);
  return induce_mdp(env.game, Player::two, env.experts.nu,
                    indicator_reward(2, 3, 2, lb::kS3, 1));
}

}  // namespace

TEST_CASE("euler solves a deterministic reachability problem", "[reward_free]") {
  auto mdp = chain_mdp(3, 1, 2);
  Rng rng(7);
  auto result = euler(mdp, EulerConfig{50, 0.1}, rng);
  REQUIRE(result.policies.size() == 50);
  CHECK(evaluate_mdp_value(mdp, result.policies.back()) == Catch::Approx(1.0).margin(1e-12));
  CHECK(max_visitation(mdp, 1, 2).prob == Catch::Approx(1.0));
}

TEST_CASE("euler with one episode returns the uniform policy", "[reward_free]") {
  auto mdp = chain_mdp(2, 1, 1);
  Rng rng(3);
  auto result = euler(mdp, EulerConfig{1, 0.1}, rng);
  REQUIRE(result.policies.size() == 1);
  CHECK(result.policies[0] == StagePolicy::uniform(2, 2, 2));
}

TEST_CASE("euler on an unreachable target", "[reward_free]") {
  auto mdp = lower_bound_induced();
  Rng rng(11);
  auto result = euler(mdp, EulerConfig{2000, 0.1}, rng);
  for (const auto& policy : result.policies)
    CHECK(evaluate_mdp_value(mdp, policy) == 0.0);
  CHECK(result.optimistic_values.back() < 0.25);
  CHECK(result.optimistic_values.back() < result.optimistic_values.front());
}

TEST_CASE("euler optimistic values dominate the true optimum", "[reward_free]") {
  int optimistic = 0, total = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto game = make_random_game(4, 2, 2, 3, seed);
    auto nu = zero_sum_value_iteration(game).pair.nu;
    auto mdp = induce_mdp(game, Player::two, nu, indicator_reward(3, 4, 2, 2, 2));
    const double truth = best_response(mdp).value;
    Rng rng(derive_seed(500, {seed}));
    auto result = euler(mdp, EulerConfig{30, 0.1}, rng);
    for (double v : result.optimistic_values) {
      ++total;
      if (v >= truth - 1e-12) ++optimistic;
    }
  }
  CHECK(static_cast<double>(optimistic) / total >= 0.95);
}

TEST_CASE("euler optimistic values are monotone on deterministic problems", "[reward_free]") {
  for (auto mdp : {chain_mdp(3, 1, 2), lower_bound_induced()}) {
    Rng rng(23);
    auto result = euler(mdp, EulerConfig{60, 0.1}, rng);
    for (size_t k = 1; k < result.optimistic_values.size(); ++k)
      CHECK(result.optimistic_values[k] <= result.optimistic_values[k - 1] + 1e-9);
  }
}

TEST_CASE("euler rejects non-indicator rewards", "[reward_free]") {
  auto env = make_lower_bound_game(1.0, 0.5);
  auto mdp = induce_mdp(env.game, Player::two, env.experts.nu,
                        induced_reward(env.game, Player::two, env.experts.nu));
  Rng rng(1);
  CHECK_THROWS_AS(euler(mdp, EulerConfig{5, 0.1}, rng), std::invalid_argument);
}

TEST_CASE("qlearning planner", "[reward_free]") {
  SECTION("reaches a deterministic target") {
    auto mdp = chain_mdp(4, 1, 3);
    Rng rng(5);
    auto policy = qlearning_planner(mdp, QLearningConfig{100, 0.1}, rng);
    CHECK(occupancy_mdp(mdp, policy).state_prob(3, 1) >= 0.99);
  }
  SECTION("unreachable target yields zero reach for any output") {
    auto mdp = lower_bound_induced();
    Rng rng(6);
    auto policy = qlearning_planner(mdp, QLearningConfig{100, 0.1}, rng);
    CHECK(occupancy_mdp(mdp, policy).state_prob(1, lb::kS3) == 0.0);
  }
}

TEST_CASE("warmup structure on the lower-bound game", "[reward_free]") {
  auto env = make_lower_bound_game(1.0, 0.5);
  GameDynamics dyn(env.game);
  WarmupConfig cfg;
  cfg.n0 = 4;
  cfg.seed = 17;
  auto result = warmup(dyn, Player::two, env.experts.nu, cfg);
  SECTION("set size is S*H*N0") { CHECK(result.set.size() == 3 * 2 * 4); }
  SECTION("policies are uniform at and after their target stage") {
    for (const auto& entry : result.set.entries)
      for (int h = entry.target_stage; h < 2; ++h)
        for (int s = 0; s < 3; ++s)
          for (int a = 0; a < 2; ++a) CHECK(entry.policy->prob(h, s, a) == Catch::Approx(0.5));
  }
  SECTION("unreachable targets contribute zero-value uniform policies") {
    auto probe = lower_bound_induced();
    for (const auto& entry : result.set.entries)
      if (entry.target_state == lb::kS3)
        CHECK(evaluate_mdp_value(probe, *entry.policy) == 0.0);
  }
  SECTION("query accounting is episodes times horizon") {
    CHECK(result.expert_queries == result.episodes * 2);
  }
}

TEST_CASE("mixture distribution", "[reward_free]") {
  auto env = make_lower_bound_game(1.0, 0.5);
  GameDynamics dyn(env.game);
  SECTION("singleton set reduces to occupancy times policy") {
    Rng rng(2);
    auto policy = std::make_shared<const StagePolicy>(make_random_policy(2, 3, 2, rng));
    PolicySet set;
    set.entries.push_back({policy, 0, 0, 0});
    auto mix = mixture_distribution(dyn, Player::two, env.experts.nu, set);
    std::vector<Vec> zero_r(2, Vec(6, 0.0));
    auto occ = occupancy_mdp(induce_mdp(dyn, Player::two, env.experts.nu, zero_r), *policy);
    for (int h = 0; h < 2; ++h)
      for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a)
          CHECK(mix.at(h, s, a) ==
                Catch::Approx(occ.state[h][s] * policy->prob(h, s, a)).margin(1e-12));
  }
  SECTION("stage slices are distributions and the hard state has no mass") {
    WarmupConfig cfg;
    cfg.n0 = 3;
    cfg.seed = 5;
    auto result = warmup(dyn, Player::two, env.experts.nu, cfg);
    auto mix = mixture_distribution(dyn, Player::two, env.experts.nu, result.set);
    for (int h = 0; h < 2; ++h) {
      double sum = 0.0;
      for (double v : mix.p[h]) sum += v;
      CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
    CHECK(mix.at(1, lb::kS3, 0) == 0.0);
    CHECK(mix.at(1, lb::kS3, 1) == 0.0);
  }
  SECTION("coverage certificate at delta=0.05") {
    WarmupConfig cfg;
    cfg.n0 = 10;
    cfg.seed = 9;
    auto result = warmup(dyn, Player::two, env.experts.nu, cfg);
    auto mix = mixture_distribution(dyn, Player::two, env.experts.nu, result.set);
    std::vector<Vec> zero_r(2, Vec(6, 0.0));
    auto base = induce_mdp(dyn, Player::two, env.experts.nu, zero_r);
    const double bound = 2.0 * 3 * 2 * 2;
    for (auto [s, h] : significant_states(dyn, Player::two, env.experts.nu, 0.05)) {
      const double reach = max_visitation(base, s, h).prob;
      for (int a = 0; a < 2; ++a) CHECK(reach / mix.at(h, s, a) <= bound);
    }
  }
}

TEST_CASE("collect_exploratory", "[reward_free]") {
  auto env = make_lower_bound_game(1.0, 0.5);
  GameDynamics dyn(env.game);
  WarmupConfig cfg;
  cfg.n0 = 3;
  cfg.seed = 41;
  auto warm = warmup(dyn, Player::two, env.experts.nu, cfg);
  SECTION("single trajectory bookkeeping") {
    Rng rng(1);
    auto data = collect_exploratory(dyn, Player::two, env.experts.nu, warm.set, 1, rng);
    CHECK(data.records.size() == 2);
    CHECK(data.expert_queries_p2 == 2);
    CHECK(data.expert_queries_p1 == 0);
  }
  SECTION("empirical frequencies approach the mixture") {
    auto mix = mixture_distribution(dyn, Player::two, env.experts.nu, warm.set);
    Rng rng(8);
    const int n = 100'000;
    auto data = collect_exploratory(dyn, Player::two, env.experts.nu, warm.set, n, rng);
    std::vector<Vec> freq(2, Vec(6, 0.0));
    for (const auto& rec : data.records)
      freq[rec.h][static_cast<size_t>(rec.s) * 2 + rec.a] += 1.0 / n;
    for (int h = 0; h < 2; ++h) CHECK(l1_distance(freq[h], mix.p[h]) <= 0.02);
  }
  SECTION("stage total variation shrinks with more data") {
    auto mix = mixture_distribution(dyn, Player::two, env.experts.nu, warm.set);
    Vec avg_tv;
    for (int n : {1'000, 10'000, 100'000}) {
      double tv = 0.0;
      for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(derive_seed(700, {seed, static_cast<uint64_t>(n)}));
        auto data = collect_exploratory(dyn, Player::two, env.experts.nu, warm.set, n, rng);
        std::vector<Vec> freq(2, Vec(6, 0.0));
        for (const auto& rec : data.records)
          freq[rec.h][static_cast<size_t>(rec.s) * 2 + rec.a] += 1.0 / n;
        tv += l1_distance(freq[1], mix.p[1]);
      }
      avg_tv.push_back(tv / 10.0);
    }
    CHECK(avg_tv[1] < avg_tv[0]);
    CHECK(avg_tv[2] < avg_tv[1]);
  }
}
