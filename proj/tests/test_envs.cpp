#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "mailbench/envs.hpp"
#include "mailbench/matrix_nash.hpp"

using namespace mailbench;

TEST_CASE("lower-bound family construction", "[envs]") {
  SECTION("value iteration confirms value 0 and the safe action") {
    auto env = make_lower_bound_game(2.0, 0.25);
    auto sol = zero_sum_value_iteration(env.game);
    CHECK(sol.nash_value == Catch::Approx(0.0).margin(1e-9));
    CHECK(sol.pair.nu.prob(0, lb::kS1, 0) == Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("delta=0 leaves exact matching pennies in the hard state") {
    auto env = make_lower_bound_game(0.0, 0.5);
    CHECK(env.game.reward(1, lb::kS3, 0, 0) == 1.0);
    CHECK(env.game.reward(1, lb::kS3, 0, 1) == -1.0);
    CHECK(env.game.reward(1, lb::kS3, 1, 0) == -1.0);
    CHECK(env.game.reward(1, lb::kS3, 1, 1) == 1.0);
    CHECK(env.experts.mu.prob(1, lb::kS3, 0) == Catch::Approx(0.5));
  }
  SECTION("experts form an equilibrium and avoid the hard state") {
    for (double delta : {0.0, 0.4, 2.0}) {
      auto env = make_lower_bound_game(delta, 0.25);
      CHECK(nash_gap(env.game, env.experts) <= 1e-9);
      auto occ = occupancy(env.game, env.experts);
      CHECK(occ.state_prob(1, lb::kS3) == 0.0);
    }
  }
  SECTION("rho knob") {
    auto env = make_lower_bound_game(1.0, 0.25);
    CHECK(env.rho[0][lb::kS1] == 1.0);
    CHECK(env.rho[1][lb::kS2] == Catch::Approx(0.75));
    CHECK(env.rho[1][lb::kS3] == Catch::Approx(0.25));
  }
}

TEST_CASE("simplified lower-bound game", "[envs]") {
  auto env = make_lower_bound_simplified(0.5);
  SECTION("hard-state payoff has a pure equilibrium of value 1") {
    MatrixGame stage{2, 2, {env.game.reward(1, lb::kS3, 0, 0), env.game.reward(1, lb::kS3, 0, 1),
                            env.game.reward(1, lb::kS3, 1, 0), env.game.reward(1, lb::kS3, 1, 1)}};
    auto sol = solve_matrix_game(stage);
    CHECK(sol.value == Catch::Approx(1.0));
    CHECK(sol.row_strategy[0] == Catch::Approx(1.0));
  }
  SECTION("experts are an equilibrium") { CHECK(nash_gap(env.game, env.experts) <= 1e-9); }
  SECTION("full game value stays 0") {
    CHECK(zero_sum_value_iteration(env.game).nash_value == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("gridworld construction", "[envs]") {
  auto gw = make_gridworld();
  SECTION("state space size") {
    CHECK(GridworldCodec::kLiveStates == 72);
    CHECK(gw.game.n_states() == 73);
  }
  SECTION("codec is a bijection over distinct pairs") {
    std::set<int> seen;
    for (int c1 = 0; c1 < 9; ++c1)
      for (int c2 = 0; c2 < 9; ++c2) {
        if (c1 == c2) continue;
        const int s = GridworldCodec::state_of(c1, c2);
        CHECK(seen.insert(s).second);
        auto [d1, d2] = GridworldCodec::cells_of(s);
        CHECK(d1 == c1);
        CHECK(d2 == c2);
      }
    CHECK(static_cast<int>(seen.size()) == 72);
  }
  SECTION("agents never share a cell in any reachable state") {
    // Exhaustive reachability from the standard start.
    std::set<int> frontier{gw.start_state}, visited{gw.start_state};
    for (int h = 0; h < gw.game.horizon(); ++h) {
      std::set<int> next;
      for (int s : frontier)
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            auto row = gw.game.transition_row(h, s, a, b);
            for (int sp = 0; sp < gw.game.n_states(); ++sp)
              if (row[sp] > 0.0 && visited.insert(sp).second) next.insert(sp);
          }
      frontier = std::move(next);
    }
    for (int s : visited) {
      if (s == GridworldCodec::terminal_state()) continue;
      auto [c1, c2] = GridworldCodec::cells_of(s);
      CHECK(c1 != c2);
    }
  }
  SECTION("both starts are three steps from the goal") {
    auto dist = [](std::pair<int, int> c) {
      return std::abs(c.first - 0) + std::abs(c.second - 2);
    };
    GridworldSpec spec;
    CHECK(dist(spec.start_p1) == 3);
    CHECK(dist(spec.start_p2) == 3);
  }
  SECTION("equidistant start gives game value 0") {
    auto sol = zero_sum_value_iteration(gw.game);
    CHECK(sol.nash_value == Catch::Approx(0.0).margin(1e-9));
    CHECK(nash_gap(gw.game, sol.pair) <= kGapTol);
  }
  SECTION("each player can stand next to the goal at stage 2") {
    auto sol = zero_sum_value_iteration(gw.game);
    auto mdp = induce_mdp(gw.game, Player::two, sol.pair.nu,
                          induced_reward(gw.game, Player::two, sol.pair.nu));
    double best = 0.0;
    for (int s = 0; s < 72; ++s) {
      auto [c1, c2] = GridworldCodec::cells_of(s);
      auto [row, col] = GridworldCodec::cell_coords(c1);
      const bool adjacent = std::abs(row - 0) + std::abs(col - 2) == 1;
      if (adjacent) best = std::max(best, max_visitation(mdp, s, 2).prob);
    }
    CHECK(best > 0.0);
  }
}

TEST_CASE("random games", "[envs]") {
  SECTION("seed determinism") {
    auto a = make_random_game(4, 2, 3, 2, 9);
    auto b = make_random_game(4, 2, 3, 2, 9);
    CHECK(a.raw_transition() == b.raw_transition());
    CHECK(a.raw_reward() == b.raw_reward());
    auto c = make_random_game(4, 2, 3, 2, 10);
    CHECK(a.raw_transition() != c.raw_transition());
  }
  SECTION("construction passes the container invariants") {
    for (uint64_t seed = 0; seed < 5; ++seed) CHECK_NOTHROW(make_random_game(6, 3, 2, 4, seed));
  }
}
