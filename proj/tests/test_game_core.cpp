#include <catch2/catch_amalgamated.hpp>

#include "mailbench/envs.hpp"
#include "mailbench/game.hpp"
#include "oracles.hpp"

using namespace mailbench;

namespace {

PolicyPair random_pair(const MarkovGame& g, Rng& rng) {
  return PolicyPair{make_random_policy(g.horizon(), g.n_states(), g.n_actions_p1(), rng),
                    make_random_policy(g.horizon(), g.n_states(), g.n_actions_p2(), rng)};
}

}  // namespace

TEST_CASE("markov game validation rejects bad rows", "[game_core]") {
  std::vector<Vec> t(1, Vec{0.6, 0.39});  // sums to 0.99
  std::vector<Vec> r(1, Vec{0.0});
  CHECK_THROWS_AS(MarkovGame(1, 2, 1, 1, Vec{1.0, 0.0}, t, std::vector<Vec>(1, Vec{0.0, 0.0})),
                  std::invalid_argument);

  // reward outside the declared bound
  std::vector<Vec> t2(1, Vec{1.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(MarkovGame(1, 2, 1, 1, Vec{1.0, 0.0}, t2, std::vector<Vec>(1, Vec{0.0, 1.5})),
                  std::invalid_argument);
  CHECK_NOTHROW(
      MarkovGame(1, 2, 1, 1, Vec{1.0, 0.0}, t2, std::vector<Vec>(1, Vec{0.0, 1.5}), 2.0));
}

TEST_CASE("evaluate matches closed cases", "[game_core]") {
  SECTION("lower-bound game has zero expert value") {
    for (double delta : {0.0, 0.7, 2.0}) {
      auto env = make_lower_bound_game(delta, 0.5);
      CHECK(evaluate(env.game, env.experts).initial_value == Catch::Approx(0.0).margin(1e-12));
    }
  }
  SECTION("zero rewards give identically zero values") {
    auto game = make_random_game(3, 2, 2, 1, 7);
    std::vector<Vec> zero_r(1, Vec(3 * 2 * 2, 0.0));
    MarkovGame zg(1, 3, 2, 2, game.initial_dist(), game.raw_transition(), zero_r);
    Rng rng(3);
    auto vt = evaluate(zg, random_pair(zg, rng));
    for (const auto& stage : vt.v)
      for (double v : stage) CHECK(v == 0.0);
  }
}

TEST_CASE("evaluate agrees with Monte-Carlo rollouts", "[game_core]") {
  auto game = make_random_game(4, 2, 3, 3, 11);
  Rng rng(99);
  auto pair = random_pair(game, rng);
  const double exact = evaluate(game, pair).initial_value;
  Rng mc_rng(1234);
  auto est = oracles::rollout_value(game, pair, 1'000'000, mc_rng);
  CHECK(std::abs(est.mean - exact) <= 3.0 * est.std_error);
}

TEST_CASE("occupancy recursion", "[game_core]") {
  SECTION("expert pair never reaches the perturbed state") {
    auto env = make_lower_bound_game(1.0, 0.5);
    auto occ = occupancy(env.game, env.experts);
    CHECK(occ.state_prob(1, lb::kS2) == Catch::Approx(1.0));
    CHECK(occ.state_prob(1, lb::kS3) == 0.0);
  }
  SECTION("a deviation forces the perturbed state") {
    auto env = make_lower_bound_game(1.0, 0.5);
    std::vector<Vec> nu(2, Vec(3 * 2, 0.5));
    for (int h = 0; h < 2; ++h) {
      nu[h][lb::kS1 * 2 + 0] = 0.0;
      nu[h][lb::kS1 * 2 + 1] = 1.0;
    }
    PolicyPair pair{env.experts.mu, StagePolicy(2, 3, 2, std::move(nu))};
    CHECK(occupancy(env.game, pair).state_prob(1, lb::kS3) == Catch::Approx(1.0));
  }
  SECTION("stage zero equals the initial distribution") {
    auto game = make_random_game(5, 2, 2, 3, 5);
    Rng rng(8);
    auto occ = occupancy(game, random_pair(game, rng));
    for (int s = 0; s < 5; ++s) CHECK(occ.state_prob(0, s) == game.initial_dist()[s]);
  }
  SECTION("stage marginals are distributions") {
    auto game = make_random_game(6, 3, 2, 4, 21);
    Rng rng(13);
    auto occ = occupancy(game, random_pair(game, rng));
    for (int h = 0; h < 4; ++h) {
      double sum = 0.0;
      for (int s = 0; s < 6; ++s) sum += occ.state_prob(h, s);
      CHECK(sum == Catch::Approx(1.0).margin(1e-10));
    }
  }
}

TEST_CASE("value equals occupancy-weighted reward", "[game_core]") {
  for (uint64_t seed : {1, 2, 3}) {
    auto game = make_random_game(4, 3, 2, 3, seed);
    Rng rng(seed + 100);
    auto pair = random_pair(game, rng);
    auto occ = occupancy(game, pair);
    const int A = game.n_actions_p1(), B = game.n_actions_p2();
    double total = 0.0;
    for (int h = 0; h < game.horizon(); ++h)
      for (int s = 0; s < game.n_states(); ++s)
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b)
            total += occ.state_action[h][(static_cast<size_t>(s) * A + a) * B + b] *
                     game.reward(h, s, a, b);
    CHECK(total == Catch::Approx(evaluate(game, pair).initial_value).margin(1e-9));
  }
}

TEST_CASE("induce_mdp marginalizes the fixed player", "[game_core]") {
  SECTION("expert opponent forces the safe successor") {
    auto env = make_lower_bound_game(0.5, 0.5);
    auto mdp = induce_mdp(env.game, Player::two, env.experts.nu,
                          induced_reward(env.game, Player::two, env.experts.nu));
    for (int a = 0; a < 2; ++a) {
      CHECK(mdp.transition_row(0, lb::kS1, a)[lb::kS2] == Catch::Approx(1.0));
      CHECK(mdp.transition_row(0, lb::kS1, a)[lb::kS3] == 0.0);
    }
  }
  SECTION("rows stay stochastic under a random fixed policy") {
    auto game = make_random_game(5, 3, 2, 3, 31);
    Rng rng(17);
    auto nu = make_random_policy(3, 5, 2, rng);
    auto mdp = induce_mdp(game, Player::two, nu, induced_reward(game, Player::two, nu));
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a) {
          double sum = 0.0;
          for (double v : mdp.transition_row(h, s, a)) sum += v;
          CHECK(sum == Catch::Approx(1.0).margin(1e-12));
        }
  }
  SECTION("marginalizing a b-independent game is exact") {
    // Build a game whose transitions and rewards ignore player 2 entirely.
    auto base = make_random_game(4, 2, 1, 2, 41);
    const int S = 4, A = 2, B = 3, H = 2;
    std::vector<Vec> t(H, Vec(static_cast<size_t>(S) * A * B * S, 0.0));
    std::vector<Vec> r(H, Vec(static_cast<size_t>(S) * A * B, 0.0));
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b) {
            auto row = base.transition_row(h, s, a, 0);
            std::copy(row.begin(), row.end(),
                      t[h].begin() + ((static_cast<size_t>(s) * A + a) * B + b) * S);
            r[h][(static_cast<size_t>(s) * A + a) * B + b] = base.reward(h, s, a, 0);
          }
    MarkovGame game(H, S, A, B, base.initial_dist(), std::move(t), std::move(r));
    auto mdp = induce_mdp(game, Player::two, StagePolicy::uniform(H, S, B),
                          induced_reward(game, Player::two, StagePolicy::uniform(H, S, B)));
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          auto got = mdp.transition_row(h, s, a);
          auto want = game.transition_row(h, s, a, 0);
          for (int sp = 0; sp < S; ++sp) CHECK(got[sp] == Catch::Approx(want[sp]).margin(1e-15));
          CHECK(mdp.reward(h, s, a) == Catch::Approx(game.reward(h, s, a, 0)).margin(1e-15));
        }
  }
}

TEST_CASE("induced evaluation is consistent with the joint game", "[game_core]") {
  auto game = make_random_game(4, 2, 3, 3, 77);
  Rng rng(5);
  auto pair = random_pair(game, rng);
  auto mdp = induce_mdp(game, Player::two, pair.nu, induced_reward(game, Player::two, pair.nu));
  CHECK(evaluate_mdp_value(mdp, pair.mu) ==
        Catch::Approx(evaluate(game, pair).initial_value).margin(1e-12));
}

TEST_CASE("best_response", "[game_core]") {
  SECTION("uniform opponent in the simplified hard state is exploited to -5.5") {
    auto env = make_lower_bound_simplified(0.5);
    // Player 1 estimated uniform everywhere; player 2 responds.
    PolicyPair pair{StagePolicy::uniform(2, 3, 2), env.experts.nu};
    auto mdp = induce_mdp(env.game, Player::one, pair.mu,
                          negated(induced_reward(env.game, Player::one, pair.mu)));
    auto br = best_response(mdp);
    // Maximum for the minimizer is reached by entering the hard state.
    CHECK(-br.value == Catch::Approx(-5.5).margin(1e-12));
    CHECK(br.policy.prob(0, lb::kS1, 1) == 1.0);
  }
  SECTION("zero rewards give value zero and lowest-index actions") {
    auto game = make_random_game(3, 2, 2, 2, 51);
    std::vector<Vec> zero_r(2, Vec(3 * 2, 0.0));
    auto mdp = induce_mdp(game, Player::two, StagePolicy::uniform(2, 3, 2), zero_r);
    auto br = best_response(mdp);
    CHECK(br.value == 0.0);
    for (int h = 0; h < 2; ++h)
      for (int s = 0; s < 3; ++s) CHECK(br.policy.prob(h, s, 0) == 1.0);
  }
  SECTION("matches exhaustive policy enumeration") {
    for (uint64_t seed : {3, 4, 5}) {
      auto game = make_random_game(5, 2, 2, 2, seed);
      Rng rng(seed);
      auto nu = make_random_policy(2, 5, 2, rng);
      auto mdp = induce_mdp(game, Player::two, nu, induced_reward(game, Player::two, nu));
      CHECK(best_response(mdp).value ==
            Catch::Approx(oracles::enumerate_optimal_value(mdp)).margin(1e-10));
    }
  }
  SECTION("dominates 100 random alternatives") {
    auto game = make_random_game(4, 3, 2, 3, 61);
    Rng rng(9);
    auto nu = make_random_policy(3, 4, 2, rng);
    auto mdp = induce_mdp(game, Player::two, nu, induced_reward(game, Player::two, nu));
    auto br = best_response(mdp);
    for (int i = 0; i < 100; ++i) {
      auto alt = make_random_policy(3, 4, 3, rng);
      CHECK(br.value >= evaluate_mdp_value(mdp, alt) - 1e-10);
    }
  }
}

TEST_CASE("max_visitation", "[game_core]") {
  auto env = make_lower_bound_game(1.0, 0.5);
  auto mdp = induce_mdp(env.game, Player::two, env.experts.nu,
                        induced_reward(env.game, Player::two, env.experts.nu));
  SECTION("unreachable and forced targets") {
    CHECK(max_visitation(mdp, lb::kS3, 1).prob == 0.0);
    CHECK(max_visitation(mdp, lb::kS2, 1).prob == Catch::Approx(1.0));
  }
  SECTION("matches enumeration on a random induced MDP") {
    auto game = make_random_game(4, 2, 2, 3, 71);
    Rng rng(2);
    auto nu = make_random_policy(3, 4, 2, rng);
    auto rmdp = induce_mdp(game, Player::two, nu, induced_reward(game, Player::two, nu));
    for (int h = 0; h < 3; ++h)
      for (int s = 0; s < 4; ++s)
        CHECK(max_visitation(rmdp, s, h).prob ==
              Catch::Approx(oracles::enumerate_max_visitation(rmdp, s, h)).margin(1e-10));
  }
}
