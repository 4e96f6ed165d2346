#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/game.hpp"
#include "mailbench/rng.hpp"

namespace mailbench {

struct EnvBundle {
  MarkovGame game;
  PolicyPair experts;
  std::vector<Vec> rho;  // per-stage dataset state distribution
};

namespace lb {
// Three states, two actions each, two stages. Player 2 controls the stage-0
// transition: the first column action leads to the second state, the other to
// the third, regardless of player 1.
inline constexpr int kS1 = 0, kS2 = 1, kS3 = 2;
}  // namespace lb

namespace detail {

inline EnvBundle make_three_state_game(const std::array<std::array<double, 2>, 2>& s3_payoff,
                                       double reward_bound, const Vec& mu_s3, const Vec& nu_s3,
                                       double rho_s3) {
  require(rho_s3 >= 0.0 && rho_s3 <= 1.0, "lower-bound game: rho_s3 in [0,1]");
  const int H = 2, S = 3, A = 2, B = 2;
  std::vector<Vec> transition(H, Vec(static_cast<size_t>(S) * A * B * S, 0.0));
  std::vector<Vec> reward(H, Vec(static_cast<size_t>(S) * A * B, 0.0));
  auto t_at = [&](int h, int s, int a, int b, int sp) -> double& {
    return transition[h][((static_cast<size_t>(s) * A + a) * B + b) * S + sp];
  };
  auto r_at = [&](int h, int s, int a, int b) -> double& {
    return reward[h][(static_cast<size_t>(s) * A + a) * B + b];
  };
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) {
          if (h == 0 && s == lb::kS1)
            t_at(h, s, a, b, b == 0 ? lb::kS2 : lb::kS3) = 1.0;
          else
            t_at(h, s, a, b, s) = 1.0;  // self-loop everywhere else
          if (s == lb::kS3) r_at(h, s, a, b) = s3_payoff[a][b];
        }
  Vec d0 = {1.0, 0.0, 0.0};
  MarkovGame game(H, S, A, B, std::move(d0), std::move(transition), std::move(reward),
                  reward_bound);

  std::vector<Vec> mu(H, Vec(static_cast<size_t>(S) * A, 0.5));
  std::vector<Vec> nu(H, Vec(static_cast<size_t>(S) * B, 0.5));
  for (int h = 0; h < H; ++h) {
    mu[h][lb::kS3 * A + 0] = mu_s3[0];
    mu[h][lb::kS3 * A + 1] = mu_s3[1];
    nu[h][lb::kS3 * B + 0] = nu_s3[0];
    nu[h][lb::kS3 * B + 1] = nu_s3[1];
    nu[h][lb::kS1 * B + 0] = 1.0;  // equilibrium play avoids the third state
    nu[h][lb::kS1 * B + 1] = 0.0;
  }
  PolicyPair experts{StagePolicy(H, S, A, std::move(mu)), StagePolicy(H, S, B, std::move(nu))};

  std::vector<Vec> rho(H, Vec(S, 0.0));
  rho[0][lb::kS1] = 1.0;
  rho[1][lb::kS2] = 1.0 - rho_s3;
  rho[1][lb::kS3] = rho_s3;
  return EnvBundle{std::move(game), std::move(experts), std::move(rho)};
}

}  // namespace detail

// Closed-form Nash strategy weight and value of the perturbed matching-
// pennies payoff [[1+delta, -1], [-1, 1]].
inline std::pair<double, double> perturbed_mp_nash(double delta) {
  require(delta >= 0.0, "perturbed_mp_nash: delta must be >= 0");
  const double p = 1.0 / (2.0 + delta / 2.0);
  const double value = (delta / 2.0) / (2.0 + delta / 2.0);
  return {p, value};
}

// Hard instance for non-interactive imitation: a perturbed matching-pennies
// game sits in a state that equilibrium play never visits, and rho_s3 tunes
// how much of the dataset covers it.
inline EnvBundle make_lower_bound_game(double delta, double rho_s3) {
  require(delta >= 0.0, "make_lower_bound_game: delta must be >= 0");
  auto [p, value] = perturbed_mp_nash(delta);
  (void)value;
  const std::array<std::array<double, 2>, 2> payoff = {{{1.0 + delta, -1.0}, {-1.0, 1.0}}};
  return detail::make_three_state_game(payoff, 1.0 + delta, {p, 1.0 - p}, {p, 1.0 - p}, rho_s3);
}

// Variant with a pure-equilibrium payoff in the third state (row value 1);
// one observed sample there pins player 1's strategy. Player 2's strategy in
// that state is payoff-irrelevant, kept uniform.
inline EnvBundle make_lower_bound_simplified(double rho_s3) {
  const std::array<std::array<double, 2>, 2> payoff = {{{1.0, 1.0}, {0.0, -12.0}}};
  return detail::make_three_state_game(payoff, 12.0, {1.0, 0.0}, {0.5, 0.5}, rho_s3);
}

// ---------------------------------------------------------------------------
// Two-player 3x3 gridworld
// ---------------------------------------------------------------------------

struct GridworldSpec {
  int horizon = 8;
  // Cells are (row, col) with row 0 at the top; the goal is the top-right
  // corner and both start cells sit three steps from it.
  std::pair<int, int> start_p1 = {1, 0};
  std::pair<int, int> start_p2 = {2, 1};
};

// Maps joint agent positions to dense state indices: rank of (cell1, cell2)
// in lexicographic order over distinct ordered pairs, terminal last.
class GridworldCodec {
 public:
  static constexpr int kSide = 3;
  static constexpr int kCells = kSide * kSide;
  static constexpr int kLiveStates = kCells * (kCells - 1);  // 72
  static constexpr int kGoalCell = 2;                        // (row 0, col 2)

  static int cell_index(int row, int col) { return row * kSide + col; }
  static std::pair<int, int> cell_coords(int cell) { return {cell / kSide, cell % kSide}; }

  static int state_of(int cell1, int cell2) {
    int rank = cell1 * (kCells - 1);
    rank += cell2 < cell1 ? cell2 : cell2 - 1;
    return rank;
  }
  static std::pair<int, int> cells_of(int state) {
    const int cell1 = state / (kCells - 1);
    int cell2 = state % (kCells - 1);
    if (cell2 >= cell1) ++cell2;
    return {cell1, cell2};
  }
  static int terminal_state() { return kLiveStates; }
  static int n_states() { return kLiveStates + 1; }
};

enum class GridAction { left = 0, right = 1, up = 2, down = 3 };

struct GridworldBundle {
  MarkovGame game;
  GridworldCodec codec;
  int start_state = 0;
};

// Deterministic simultaneous-move gridworld. Moves into walls, into the
// opponent's current cell, or into the same empty cell leave the mover in
// place; entering the goal pays +1 to player 1 (or -1 when player 2 enters)
// and drops the game into an absorbing terminal state.
inline GridworldBundle make_gridworld(const GridworldSpec& spec = {}) {
  using C = GridworldCodec;
  require(spec.horizon >= 1, "make_gridworld: horizon must be >= 1");
  require(spec.start_p1 != spec.start_p2, "make_gridworld: start cells must differ");
  const int H = spec.horizon, S = C::n_states(), A = 4, B = 4;

  auto moved = [](int cell, int action) {
    auto [row, col] = C::cell_coords(cell);
    switch (static_cast<GridAction>(action)) {
      case GridAction::left: col -= 1; break;
      case GridAction::right: col += 1; break;
      case GridAction::up: row -= 1; break;
      case GridAction::down: row += 1; break;
    }
    if (row < 0 || row >= C::kSide || col < 0 || col >= C::kSide) return cell;
    return C::cell_index(row, col);
  };

  Vec step_transition(static_cast<size_t>(S) * A * B * S, 0.0);
  Vec step_reward(static_cast<size_t>(S) * A * B, 0.0);
  auto t_at = [&](int s, int a, int b, int sp) -> double& {
    return step_transition[((static_cast<size_t>(s) * A + a) * B + b) * S + sp];
  };
  auto r_at = [&](int s, int a, int b) -> double& {
    return step_reward[(static_cast<size_t>(s) * A + a) * B + b];
  };

  for (int s = 0; s < S; ++s) {
    if (s == C::terminal_state()) {
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) t_at(s, a, b, s) = 1.0;
      continue;
    }
    auto [c1, c2] = C::cells_of(s);
    for (int a = 0; a < A; ++a)
      for (int b = 0; b < B; ++b) {
        int n1 = moved(c1, a);
        int n2 = moved(c2, b);
        if (n1 == c2) n1 = c1;
        if (n2 == c1) n2 = c2;
        if (n1 == n2) {
          n1 = c1;
          n2 = c2;
        }
        const bool p1_scores = n1 == C::kGoalCell && c1 != C::kGoalCell;
        const bool p2_scores = n2 == C::kGoalCell && c2 != C::kGoalCell;
        if (p1_scores || p2_scores) {
          r_at(s, a, b) = p1_scores ? 1.0 : -1.0;
          t_at(s, a, b, C::terminal_state()) = 1.0;
        } else {
          t_at(s, a, b, C::state_of(n1, n2)) = 1.0;
        }
      }
  }

  const int start = C::state_of(C::cell_index(spec.start_p1.first, spec.start_p1.second),
                                C::cell_index(spec.start_p2.first, spec.start_p2.second));
  Vec d0(S, 0.0);
  d0[start] = 1.0;
  std::vector<Vec> transition(H, step_transition);
  std::vector<Vec> reward(H, step_reward);
  MarkovGame game(H, S, A, B, std::move(d0), std::move(transition), std::move(reward), 1.0);
  return GridworldBundle{std::move(game), C{}, start};
}

// Dirichlet(1) transition rows and uniform [-1,1] rewards; fully determined
// by the seed. Property-test fodder.
inline MarkovGame make_random_game(int n_states, int n_actions_p1, int n_actions_p2, int horizon,
                                   uint64_t seed) {
  require(n_states >= 1 && n_actions_p1 >= 1 && n_actions_p2 >= 1 && horizon >= 1,
          "make_random_game: bad dimensions");
  Rng rng(derive_seed(seed, {0x67616d65ULL}));
  const size_t rows = static_cast<size_t>(n_states) * n_actions_p1 * n_actions_p2;
  std::vector<Vec> transition(horizon, Vec(rows * n_states, 0.0));
  std::vector<Vec> reward(horizon, Vec(rows, 0.0));
  for (int h = 0; h < horizon; ++h) {
    for (size_t r = 0; r < rows; ++r)
      rng.dirichlet_row(std::span<double>(transition[h].data() + r * n_states, n_states));
    for (double& v : reward[h]) v = rng.uniform(-1.0, 1.0);
  }
  Vec d0(n_states, 0.0);
  rng.dirichlet_row(std::span<double>(d0.data(), d0.size()));
  return MarkovGame(horizon, n_states, n_actions_p1, n_actions_p2, std::move(d0),
                    std::move(transition), std::move(reward), 1.0);
}

inline StagePolicy make_random_policy(int horizon, int n_states, int n_actions, Rng& rng) {
  std::vector<Vec> probs(horizon, Vec(static_cast<size_t>(n_states) * n_actions, 0.0));
  for (int h = 0; h < horizon; ++h)
    for (int s = 0; s < n_states; ++s)
      rng.dirichlet_row(std::span<double>(probs[h].data() + static_cast<size_t>(s) * n_actions,
                                          n_actions));
  return StagePolicy(horizon, n_states, n_actions, std::move(probs));
}

}  // namespace mailbench
