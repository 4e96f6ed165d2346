#include <catch2/catch_amalgamated.hpp>

#include "mailbench/envs.hpp"
#include "mailbench/matrix_nash.hpp"
#include "oracles.hpp"

using namespace mailbench;

namespace {

MatrixGame perturbed_pennies(double delta) {
  return MatrixGame{2, 2, {1.0 + delta, -1.0, -1.0, 1.0}};
}

}  // namespace

TEST_CASE("solve_matrix_game closed forms", "[matrix_nash]") {
  SECTION("matching pennies") {
    auto sol = solve_matrix_game(perturbed_pennies(0.0));
    CHECK(sol.value == Catch::Approx(0.0).margin(1e-12));
    CHECK(sol.row_strategy[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(sol.col_strategy[0] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("perturbed pennies at delta=2") {
    auto sol = solve_matrix_game(perturbed_pennies(2.0));
    CHECK(sol.row_strategy[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
    CHECK(sol.row_strategy[1] == Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(sol.value == Catch::Approx(1.0 / 3.0).margin(1e-12));
  }
  SECTION("pure equilibrium of the simplified payoff") {
    auto sol = solve_matrix_game(MatrixGame{2, 2, {1.0, 1.0, 0.0, -12.0}});
    CHECK(sol.row_strategy[0] == Catch::Approx(1.0));
    CHECK(sol.value == Catch::Approx(1.0));
  }
  SECTION("rejects non-finite entries") {
    CHECK_THROWS_AS(solve_matrix_game(MatrixGame{1, 2, {0.0, kInf}}), std::invalid_argument);
  }
}

TEST_CASE("solve_matrix_game pure-deviation certificates", "[matrix_nash]") {
  Rng rng(424242);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 1 + rng.uniform_int(6), n = 1 + rng.uniform_int(8);
    MatrixGame g{m, n, Vec(static_cast<size_t>(m) * n)};
    for (double& v : g.payoff) v = rng.uniform(-2.0, 2.0);
    auto sol = solve_matrix_game(g);
    for (int i = 0; i < m; ++i) {
      double p = 0.0;
      for (int j = 0; j < n; ++j) p += g.at(i, j) * sol.col_strategy[j];
      CHECK(p <= sol.value + 1e-9);
    }
    for (int j = 0; j < n; ++j) {
      double p = 0.0;
      for (int i = 0; i < m; ++i) p += g.at(i, j) * sol.row_strategy[i];
      CHECK(p >= sol.value - 1e-9);
    }
    double xy = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) xy += sol.row_strategy[i] * g.at(i, j) * sol.col_strategy[j];
    CHECK(xy == Catch::Approx(sol.value).margin(1e-9));
  }
}

TEST_CASE("solve_matrix_game scaling invariance", "[matrix_nash]") {
  Rng rng(7);
  MatrixGame g{3, 5, Vec(15)};
  for (double& v : g.payoff) v = rng.uniform(-1.0, 1.0);
  auto base = solve_matrix_game(g);
  for (auto [c, d] : std::vector<std::pair<double, double>>{{2.5, 0.0}, {0.5, -1.0}, {4.0, 3.0}}) {
    MatrixGame scaled = g;
    for (double& v : scaled.payoff) v = c * v + d;
    auto sol = solve_matrix_game(scaled);
    CHECK(sol.value == Catch::Approx(c * base.value + d).margin(c * 1e-9));
    CHECK(matrix_exploitability(scaled, sol) <= c * 1e-9);
  }
}

TEST_CASE("zero_sum_value_iteration", "[matrix_nash]") {
  SECTION("lower-bound game value and safe action") {
    for (double delta : {0.0, 0.5, 2.0}) {
      auto env = make_lower_bound_game(delta, 0.5);
      auto sol = zero_sum_value_iteration(env.game);
      CHECK(sol.nash_value == Catch::Approx(0.0).margin(1e-9));
      if (delta > 0.0) CHECK(sol.pair.nu.prob(0, lb::kS1, 0) == Catch::Approx(1.0).margin(1e-9));
      CHECK(nash_gap(env.game, sol.pair) <= kGapTol);
    }
  }
  SECTION("single-stage single-state game reduces to the matrix solver") {
    MatrixGame m = perturbed_pennies(1.0);
    std::vector<Vec> t(1, Vec(1 * 2 * 2 * 1, 1.0));
    std::vector<Vec> r(1, m.payoff);
    MarkovGame game(1, 1, 2, 2, Vec{1.0}, std::move(t), std::move(r), 2.0);
    auto sol = zero_sum_value_iteration(game);
    auto direct = solve_matrix_game(m);
    CHECK(sol.nash_value == Catch::Approx(direct.value).margin(1e-12));
    CHECK(sol.pair.mu.prob(0, 0, 0) == Catch::Approx(direct.row_strategy[0]).margin(1e-12));
  }
  SECTION("equilibrium on random games certified by nash_gap") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      auto game = make_random_game(4, 2, 3, 3, seed);
      auto sol = zero_sum_value_iteration(game);
      CHECK(nash_gap(game, sol.pair) <= kGapTol);
    }
  }
  SECTION("value matches maximin over deterministic policies on a tiny game") {
    auto game = make_random_game(3, 2, 2, 2, 123);
    auto sol = zero_sum_value_iteration(game);
    // Outer max over deterministic player-1 policies of the exact best
    // response value of player 2.
    double outer = -kInf;
    oracles::for_each_deterministic_policy(2, 3, 2, [&](const StagePolicy& mu) {
      auto mdp = induce_mdp(game, Player::one, mu, negated(induced_reward(game, Player::one, mu)));
      outer = std::max(outer, -best_response(mdp).value);
    });
    // Mixed strategies can only help the maximizer, never hurt.
    CHECK(sol.nash_value >= outer - 1e-9);
    CHECK(nash_gap(game, sol.pair) <= 1e-6);
  }
}

TEST_CASE("nash_gap", "[matrix_nash]") {
  SECTION("uniform player-1 estimate in the simplified game") {
    auto env = make_lower_bound_simplified(0.5);
    PolicyPair pair{StagePolicy::uniform(2, 3, 2), env.experts.nu};
    auto breakdown = nash_gap_breakdown(env.game, pair);
    // DP oracle: the opponent of the uniform row mix collects -5.5 in the
    // hard state while the game value stays 0, so the gap is 5.5 from the
    // start state (and 6.5 measured inside the hard state itself).
    CHECK(breakdown.worst_nu_value == Catch::Approx(-5.5).margin(1e-12));
    CHECK(breakdown.best_mu_value == Catch::Approx(0.0).margin(1e-12));
    CHECK(breakdown.gap == Catch::Approx(5.5).margin(1e-12));
  }
  SECTION("gap is nonnegative for random pairs") {
    Rng rng(3141);
    for (uint64_t seed = 0; seed < 10; ++seed) {
      auto game = make_random_game(4, 2, 2, 3, seed);
      PolicyPair pair{make_random_policy(3, 4, 2, rng), make_random_policy(3, 4, 2, rng)};
      CHECK(nash_gap(game, pair) >= -1e-9);
    }
  }
}

TEST_CASE("mix_equilibria", "[matrix_nash]") {
  SECTION("identity mixture") {
    auto env = make_lower_bound_game(1.0, 0.5);
    auto mixed = mix_equilibria({env.experts}, Vec{1.0});
    CHECK(mixed.mu == env.experts.mu);
    CHECK(mixed.nu == env.experts.nu);
  }
  SECTION("weight validation") {
    auto env = make_lower_bound_game(1.0, 0.5);
    CHECK_THROWS_AS(mix_equilibria({env.experts}, Vec{0.5}), std::invalid_argument);
    CHECK_THROWS_AS(mix_equilibria({env.experts, env.experts}, Vec{1.0}),
                    std::invalid_argument);
  }
}
