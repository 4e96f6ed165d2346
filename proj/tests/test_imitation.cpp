#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "mailbench/envs.hpp"
#include "mailbench/imitation.hpp"
#include "mailbench/matrix_nash.hpp"

using namespace mailbench;

TEST_CASE("collect_trajectories", "[imitation]") {
  SECTION("expert play never records the hard state") {
    auto env = make_lower_bound_game(1.0, 0.5);
    Rng rng(1);
    auto data = collect_trajectories(env.game, env.experts, 100, rng);
    CHECK(data.records.size() == 200);
    CHECK(data.expert_queries_p1 == 200);
    CHECK(data.expert_queries_p2 == 200);
    for (const auto& rec : data.records) CHECK(rec.s != lb::kS3);
  }
  SECTION("deterministic chain produces identical trajectories") {
    // Two states, everything moves to state 1 and stays; deterministic pair.
    std::vector<Vec> t(2, Vec{0.0, 1.0, 0.0, 1.0});
    std::vector<Vec> r(2, Vec{0.0, 0.0});
    MarkovGame game(2, 2, 1, 1, Vec{1.0, 0.0}, std::move(t), std::move(r));
    PolicyPair pair{StagePolicy::uniform(2, 2, 1), StagePolicy::uniform(2, 2, 1)};
    Rng rng(5);
    auto data = collect_trajectories(game, pair, 10, rng);
    for (size_t i = 0; i < data.records.size(); i += 2) {
      CHECK(data.records[i].s == 0);
      CHECK(data.records[i + 1].s == 1);
    }
  }
  SECTION("empirical stage frequencies match exact occupancy") {
    auto game = make_random_game(4, 2, 2, 3, 23);
    Rng prng(77);
    PolicyPair pair{make_random_policy(3, 4, 2, prng), make_random_policy(3, 4, 2, prng)};
    auto occ = occupancy(game, pair);
    Rng rng(9);
    auto data = collect_trajectories(game, pair, 100'000, rng);
    std::vector<Vec> freq(3, Vec(4, 0.0));
    for (const auto& rec : data.records) freq[rec.h][rec.s] += 1e-5;
    for (int h = 0; h < 3; ++h)
      CHECK(l1_distance(freq[h], occ.state[h]) <= 0.01);
  }
}

TEST_CASE("collect_from_state_dist", "[imitation]") {
  auto env = make_lower_bound_simplified(0.5);
  SECTION("zero mass never yields a record") {
    auto env0 = make_lower_bound_simplified(0.0);
    Rng rng(2);
    auto data = collect_from_state_dist(env0.game, env0.rho, env0.experts, 500, rng);
    for (const auto& rec : data.records) CHECK(rec.s != lb::kS3);
  }
  SECTION("first hard-state hit is geometric in the rho mass") {
    for (double rho3 : {0.5, 0.25}) {
      auto envr = make_lower_bound_simplified(rho3);
      double mean_index = 0.0;
      const int n_seeds = 400;
      for (int seed = 0; seed < n_seeds; ++seed) {
        Rng rng(derive_seed(99, {static_cast<uint64_t>(seed)}));
        auto data = collect_from_state_dist(envr.game, envr.rho, envr.experts, 200, rng);
        // Sample index (1-based) of the first record at the hard state.
        for (size_t i = 0; i < data.records.size(); ++i)
          if (data.records[i].s == lb::kS3) {
            mean_index += static_cast<double>(i / envr.game.horizon()) + 1.0;
            break;
          }
      }
      mean_index /= n_seeds;
      CHECK(mean_index == Catch::Approx(1.0 / rho3).epsilon(0.12));
    }
  }
  SECTION("invalid rho is rejected") {
    Rng rng(3);
    std::vector<Vec> bad = env.rho;
    bad[1][lb::kS2] += 0.2;
    CHECK_THROWS_AS(collect_from_state_dist(env.game, bad, env.experts, 10, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("bc_fit", "[imitation]") {
  SECTION("point mass on constantly observed action") {
    TrajectoryDataset data;
    for (int i = 0; i < 7; ++i) data.records.push_back({1, 2, 1, 0});
    auto fit = bc_fit(data, Player::one, 3, 4, 2);
    CHECK(fit.to_policy().prob(1, 2, 1) == 1.0);
    CHECK(fit.count(1, 2, 1) == 7);
  }
  SECTION("empty dataset falls back to uniform everywhere") {
    auto fit = bc_fit(TrajectoryDataset{}, Player::two, 2, 3, 4);
    auto policy = fit.to_policy();
    for (int h = 0; h < 2; ++h)
      for (int s = 0; s < 3; ++s)
        for (int b = 0; b < 4; ++b) CHECK(policy.prob(h, s, b) == Catch::Approx(0.25));
  }
  SECTION("record order does not matter and counts reconstruct the histogram") {
    Rng rng(11);
    TrajectoryDataset data;
    std::map<std::tuple<int, int, int>, int> hist;
    for (int i = 0; i < 500; ++i) {
      TrajectoryRecord rec{rng.uniform_int(3), rng.uniform_int(4), rng.uniform_int(2),
                           rng.uniform_int(3)};
      data.records.push_back(rec);
      ++hist[{rec.h, rec.s, rec.b}];
    }
    auto shuffled = data;
    for (size_t i = shuffled.records.size(); i > 1; --i)
      std::swap(shuffled.records[i - 1], shuffled.records[rng.uniform_int(static_cast<int>(i))]);
    auto a = bc_fit(data, Player::two, 3, 4, 3);
    auto b = bc_fit(shuffled, Player::two, 3, 4, 3);
    CHECK(a.to_policy() == b.to_policy());
    for (const auto& [key, count] : hist)
      CHECK(a.count(std::get<0>(key), std::get<1>(key), std::get<2>(key)) ==
            static_cast<uint64_t>(count));
  }
  SECTION("deterministic expert is recovered exactly on visited pairs") {
    auto gw = make_gridworld({4, {1, 0}, {2, 1}});
    auto experts = zero_sum_value_iteration(gw.game).pair;
    Rng rng(21);
    auto data = collect_trajectories(gw.game, experts, 200, rng);
    auto fit = bc_fit(data, Player::one, 4, gw.game.n_states(), 4);
    auto policy = fit.to_policy();
    for (int h = 0; h < 4; ++h)
      for (int s = 0; s < gw.game.n_states(); ++s) {
        if (!fit.visited(h, s)) continue;
        for (int a = 0; a < 4; ++a) {
          if (experts.mu.prob(h, s, a) == 1.0) CHECK(policy.prob(h, s, a) == 1.0);
          if (experts.mu.prob(h, s, a) == 0.0) CHECK(policy.prob(h, s, a) == 0.0);
        }
      }
  }
  SECTION("empirical TV obeys the finite-sample bound") {
    // Fixed state, known row; 50 seeds at n=10^4, delta=0.01.
    const Vec truth = {0.15, 0.35, 0.4, 0.1};
    const int n = 10'000;
    const double bound = std::sqrt(2.0 * 4.0 * std::log(1.0 / 0.01) / n);
    int violations = 0;
    for (int seed = 0; seed < 50; ++seed) {
      Rng rng(derive_seed(1000, {static_cast<uint64_t>(seed)}));
      TrajectoryDataset data;
      for (int i = 0; i < n; ++i)
        data.records.push_back({0, 0, 0, rng.categorical(truth)});
      auto row = bc_fit(data, Player::two, 1, 1, 4).to_policy();
      Vec fitted = {row.prob(0, 0, 0), row.prob(0, 0, 1), row.prob(0, 0, 2), row.prob(0, 0, 3)};
      if (l1_distance(fitted, truth) > bound) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("dataset prefix bookkeeping", "[imitation]") {
  auto env = make_lower_bound_simplified(0.5);
  Rng rng(31);
  auto data = collect_trajectories(env.game, env.experts, 50, rng);
  auto half = data.prefix(50);
  CHECK(half.records.size() == 50);
  CHECK(half.expert_queries_p1 == 50);
  CHECK(std::equal(half.records.begin(), half.records.end(), data.records.begin(),
                   [](const TrajectoryRecord& x, const TrajectoryRecord& y) {
                     return x.h == y.h && x.s == y.s && x.a == y.a && x.b == y.b;
                   }));
}

TEST_CASE("stationary averaging helper pools stage counts", "[imitation]") {
  TrajectoryDataset data;
  data.records.push_back({0, 1, 0, 0});
  data.records.push_back({1, 1, 1, 0});
  auto fit = bc_fit(data, Player::one, 2, 2, 2);
  auto stationary = fit.to_stationary_policy();
  for (int h = 0; h < 2; ++h) {
    CHECK(stationary.prob(h, 1, 0) == Catch::Approx(0.5));
    CHECK(stationary.prob(h, 1, 1) == Catch::Approx(0.5));
  }
}
