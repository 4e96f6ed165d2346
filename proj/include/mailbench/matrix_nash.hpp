#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/game.hpp"

namespace mailbench {

// Zero-sum matrix game; the row player maximizes `payoff`.
struct MatrixGame {
  int n_rows = 0, n_cols = 0;
  Vec payoff;  // flattened row-major

  double at(int i, int j) const { return payoff[static_cast<size_t>(i) * n_cols + j]; }
};

struct NashSolution {
  Vec row_strategy;
  Vec col_strategy;
  double value = 0.0;
};

namespace detail {

// Gaussian elimination with partial pivoting; returns nullopt when the system
// is singular to working precision.
inline std::optional<Vec> solve_linear(std::vector<Vec> a, Vec b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return std::nullopt;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Tries one support pair: solve the indifference system for both players and
// verify feasibility plus the off-support deviation conditions.
inline std::optional<NashSolution> try_support(const MatrixGame& g, const std::vector<int>& rows,
                                               const std::vector<int>& cols) {
  const size_t k = rows.size();
  if (cols.size() != k) return std::nullopt;

  // Unknowns (x_{rows}, v): row mix equalizes payoffs across supported columns.
  std::vector<Vec> a(k + 1, Vec(k + 1, 0.0));
  Vec b(k + 1, 0.0);
  for (size_t jc = 0; jc < k; ++jc) {
    for (size_t ir = 0; ir < k; ++ir) a[jc][ir] = g.at(rows[ir], cols[jc]);
    a[jc][k] = -1.0;
  }
  for (size_t ir = 0; ir < k; ++ir) a[k][ir] = 1.0;
  b[k] = 1.0;
  auto xv = solve_linear(a, b);
  if (!xv) return std::nullopt;

  // Unknowns (y_{cols}, v): column mix equalizes payoffs across supported rows.
  std::vector<Vec> c(k + 1, Vec(k + 1, 0.0));
  Vec d(k + 1, 0.0);
  for (size_t ir = 0; ir < k; ++ir) {
    for (size_t jc = 0; jc < k; ++jc) c[ir][jc] = g.at(rows[ir], cols[jc]);
    c[ir][k] = -1.0;
  }
  for (size_t jc = 0; jc < k; ++jc) c[k][jc] = 1.0;
  d[k] = 1.0;
  auto yv = solve_linear(c, d);
  if (!yv) return std::nullopt;

  const double v = (*xv)[k];
  if (std::abs((*yv)[k] - v) > 1e-9) return std::nullopt;

  NashSolution sol;
  sol.value = v;
  sol.row_strategy.assign(g.n_rows, 0.0);
  sol.col_strategy.assign(g.n_cols, 0.0);
  for (size_t i = 0; i < k; ++i) {
    if ((*xv)[i] < -1e-10 || (*yv)[i] < -1e-10) return std::nullopt;
    sol.row_strategy[rows[i]] = std::max(0.0, (*xv)[i]);
    sol.col_strategy[cols[i]] = std::max(0.0, (*yv)[i]);
  }

  // Off-support checks: no pure row beats v against y, no pure column drops
  // below v against x.
  for (int i = 0; i < g.n_rows; ++i) {
    double payoff = 0.0;
    for (int j = 0; j < g.n_cols; ++j) payoff += g.at(i, j) * sol.col_strategy[j];
    if (payoff > v + 1e-10) return std::nullopt;
  }
  for (int j = 0; j < g.n_cols; ++j) {
    double payoff = 0.0;
    for (int i = 0; i < g.n_rows; ++i) payoff += g.at(i, j) * sol.row_strategy[i];
    if (payoff < v - 1e-10) return std::nullopt;
  }
  double sum_r = 0.0, sum_c = 0.0;
  for (double p : sol.row_strategy) sum_r += p;
  for (double p : sol.col_strategy) sum_c += p;
  for (double& p : sol.row_strategy) p /= sum_r;
  for (double& p : sol.col_strategy) p /= sum_c;
  return sol;
}

inline std::optional<NashSolution> solve_by_support_enumeration(const MatrixGame& g) {
  // Enumerate equal-size supports, smallest first, lexicographic within a
  // size, so the returned equilibrium is deterministic.
  std::vector<std::vector<int>> row_subsets, col_subsets;
  auto subsets = [](int n) {
    std::vector<std::vector<int>> out;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> sub;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) sub.push_back(i);
      out.push_back(std::move(sub));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    return out;
  };
  row_subsets = subsets(g.n_rows);
  col_subsets = subsets(g.n_cols);
  for (size_t k = 1; k <= static_cast<size_t>(std::min(g.n_rows, g.n_cols)); ++k)
    for (const auto& rows : row_subsets) {
      if (rows.size() != k) continue;
      for (const auto& cols : col_subsets) {
        if (cols.size() != k) continue;
        if (auto sol = try_support(g, rows, cols)) return sol;
      }
    }
  return std::nullopt;
}

// Dense simplex (Bland's rule) for max 1'w s.t. M'w <= 1, w >= 0 where M' is
// the payoff shifted strictly positive. The optimum gives the column strategy
// directly and the row strategy from the duals under the slack columns.
inline NashSolution solve_by_simplex(const MatrixGame& g) {
  const int m = g.n_rows, n = g.n_cols;
  double shift = 0.0;
  for (double v : g.payoff) shift = std::min(shift, v);
  shift = -shift + 1.0;  // entries of M' = M + shift are >= 1

  const int cols = n + m;  // structural + slack
  std::vector<Vec> tab(m, Vec(cols + 1, 0.0));
  Vec obj(cols + 1, 0.0);
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) tab[i][j] = g.at(i, j) + shift;
    tab[i][n + i] = 1.0;
    tab[i][cols] = 1.0;
    basis[i] = n + i;
  }
  for (int j = 0; j < n; ++j) obj[j] = -1.0;  // maximize sum w

  const int max_iters = 10000;
  for (int iter = 0; iter < max_iters; ++iter) {
    int enter = -1;
    for (int j = 0; j < cols; ++j)
      if (obj[j] < -1e-12) {
        enter = j;
        break;  // Bland: lowest index
      }
    if (enter < 0) break;
    int leave = -1;
    double best_ratio = kInf;
    for (int i = 0; i < m; ++i) {
      if (tab[i][enter] > 1e-12) {
        const double ratio = tab[i][cols] / tab[i][enter];
        if (ratio < best_ratio - 1e-15 ||
            (ratio < best_ratio + 1e-15 && (leave < 0 || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    require(leave >= 0, "solve_matrix_game: simplex unbounded");
    const double piv = tab[leave][enter];
    for (double& v : tab[leave]) v /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = tab[i][enter];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols; ++j) tab[i][j] -= f * tab[leave][j];
    }
    const double fo = obj[enter];
    if (fo != 0.0)
      for (int j = 0; j <= cols; ++j) obj[j] -= fo * tab[leave][j];
    basis[leave] = enter;
  }

  const double inv_value = obj[cols];  // sum of w at optimum = 1/v'
  require(inv_value > 1e-300, "solve_matrix_game: degenerate simplex optimum");
  NashSolution sol;
  sol.col_strategy.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) sol.col_strategy[basis[i]] = std::max(0.0, tab[i][cols]);
  sol.row_strategy.assign(m, 0.0);
  for (int i = 0; i < m; ++i) sol.row_strategy[i] = std::max(0.0, obj[n + i]);  // duals
  double sr = 0.0, sc = 0.0;
  for (double v : sol.row_strategy) sr += v;
  for (double v : sol.col_strategy) sc += v;
  for (double& v : sol.row_strategy) v /= sr;
  for (double& v : sol.col_strategy) v /= sc;
  sol.value = 1.0 / inv_value - shift;
  return sol;
}

}  // namespace detail

// Maximin-optimal mixed strategies. Support enumeration for matrices up to
// 4x4 (exact on the small stage games this library cares about), simplex
// above; the simplex also backs up the rare degenerate enumeration miss.
inline NashSolution solve_matrix_game(const MatrixGame& g) {
  require(g.n_rows >= 1 && g.n_cols >= 1, "solve_matrix_game: empty matrix");
  require(g.payoff.size() == static_cast<size_t>(g.n_rows) * g.n_cols,
          "solve_matrix_game: payoff size mismatch");
  for (double v : g.payoff) require(std::isfinite(v), "solve_matrix_game: non-finite entry");
  if (g.n_rows <= 4 && g.n_cols <= 4)
    if (auto sol = detail::solve_by_support_enumeration(g)) return *sol;
  return detail::solve_by_simplex(g);
}

// Worst pure-deviation slack of a candidate solution; <= tol means the
// strategies are a Nash pair of the matrix game.
inline double matrix_exploitability(const MatrixGame& g, const NashSolution& sol) {
  double best_row = -kInf, worst_col = kInf;
  for (int i = 0; i < g.n_rows; ++i) {
    double p = 0.0;
    for (int j = 0; j < g.n_cols; ++j) p += g.at(i, j) * sol.col_strategy[j];
    best_row = std::max(best_row, p);
  }
  for (int j = 0; j < g.n_cols; ++j) {
    double p = 0.0;
    for (int i = 0; i < g.n_rows; ++i) p += g.at(i, j) * sol.row_strategy[i];
    worst_col = std::min(worst_col, p);
  }
  return best_row - worst_col;
}

struct ZeroSumSolution {
  PolicyPair pair;
  double nash_value = 0.0;
  std::vector<Vec> stage_values;  // per stage, state values of the equilibrium
};

// Options exist to extract distinct equilibria from games with ties: the
// action preference permutations only reorder how the stage matrix is handed
// to the solver, so every variant is still an exact stage-wise equilibrium.
struct ValueIterationOptions {
  std::vector<int> p1_action_order;  // empty = identity
  std::vector<int> p2_action_order;
};

// Backward induction solving the stage matrix game at every (state, stage).
inline ZeroSumSolution zero_sum_value_iteration(const MarkovGame& game,
                                                const ValueIterationOptions& opts = {}) {
  const int H = game.horizon(), S = game.n_states(), A = game.n_actions_p1(),
            B = game.n_actions_p2();
  std::vector<int> ord_a(A), ord_b(B);
  for (int a = 0; a < A; ++a) ord_a[a] = a;
  for (int b = 0; b < B; ++b) ord_b[b] = b;
  if (!opts.p1_action_order.empty()) ord_a = opts.p1_action_order;
  if (!opts.p2_action_order.empty()) ord_b = opts.p2_action_order;
  require(static_cast<int>(ord_a.size()) == A && static_cast<int>(ord_b.size()) == B,
          "zero_sum_value_iteration: bad action order");

  ZeroSumSolution out;
  out.stage_values.assign(H + 1, Vec(S, 0.0));
  std::vector<Vec> mu(H, Vec(static_cast<size_t>(S) * A, 0.0));
  std::vector<Vec> nu(H, Vec(static_cast<size_t>(S) * B, 0.0));
  MatrixGame stage{A, B, Vec(static_cast<size_t>(A) * B, 0.0)};
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      for (int ia = 0; ia < A; ++ia)
        for (int ib = 0; ib < B; ++ib) {
          const int a = ord_a[ia], b = ord_b[ib];
          stage.payoff[static_cast<size_t>(ia) * B + ib] =
              game.reward(h, s, a, b) + dot(game.transition_row(h, s, a, b),
                                            std::span<const double>(out.stage_values[h + 1]));
        }
      NashSolution sol = solve_matrix_game(stage);
      out.stage_values[h][s] = sol.value;
      for (int ia = 0; ia < A; ++ia) mu[h][static_cast<size_t>(s) * A + ord_a[ia]] = sol.row_strategy[ia];
      for (int ib = 0; ib < B; ++ib) nu[h][static_cast<size_t>(s) * B + ord_b[ib]] = sol.col_strategy[ib];
    }
  }
  out.pair = PolicyPair{StagePolicy(H, S, A, std::move(mu)), StagePolicy(H, S, B, std::move(nu))};
  out.nash_value = dot(std::span<const double>(game.initial_dist()),
                       std::span<const double>(out.stage_values[0]));
  return out;
}

struct NashGapBreakdown {
  double gap = 0.0;
  double best_mu_value = 0.0;   // max over player-1 deviations against nu
  double worst_nu_value = 0.0;  // min over player-2 deviations against mu
};

// Exact exploitability via two best responses in the induced MDPs.
inline NashGapBreakdown nash_gap_breakdown(const MarkovGame& game, const PolicyPair& pair) {
  pair.check_dims(game);
  auto vs_nu = best_response(
      induce_mdp(game, Player::two, pair.nu, induced_reward(game, Player::two, pair.nu)));
  auto vs_mu = best_response(
      induce_mdp(game, Player::one, pair.mu, negated(induced_reward(game, Player::one, pair.mu))));
  NashGapBreakdown out;
  out.best_mu_value = vs_nu.value;
  out.worst_nu_value = -vs_mu.value;
  out.gap = out.best_mu_value - out.worst_nu_value;
  return out;
}

inline double nash_gap(const MarkovGame& game, const PolicyPair& pair) {
  return nash_gap_breakdown(game, pair).gap;
}

// Per-state convex combination of the policies. In zero-sum games solved
// stage-wise this stays an equilibrium because the stage value functions are
// unique; callers verify post-hoc with nash_gap.
inline PolicyPair mix_equilibria(const std::vector<PolicyPair>& pairs, const Vec& weights) {
  require(!pairs.empty() && pairs.size() == weights.size(), "mix_equilibria: size mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    require(w >= 0.0, "mix_equilibria: negative weight");
    wsum += w;
  }
  require(std::abs(wsum - 1.0) <= 1e-9, "mix_equilibria: weights must sum to 1");
  const int H = pairs[0].mu.horizon(), S = pairs[0].mu.n_states();
  const int A = pairs[0].mu.n_actions(), B = pairs[0].nu.n_actions();
  std::vector<Vec> mu(H, Vec(static_cast<size_t>(S) * A, 0.0));
  std::vector<Vec> nu(H, Vec(static_cast<size_t>(S) * B, 0.0));
  for (size_t k = 0; k < pairs.size(); ++k) {
    require(pairs[k].mu.horizon() == H && pairs[k].mu.n_states() == S &&
                pairs[k].mu.n_actions() == A && pairs[k].nu.n_actions() == B,
            "mix_equilibria: dimension mismatch");
    const double w = weights[k] / wsum;
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a)
          mu[h][static_cast<size_t>(s) * A + a] += w * pairs[k].mu.prob(h, s, a);
        for (int b = 0; b < B; ++b)
          nu[h][static_cast<size_t>(s) * B + b] += w * pairs[k].nu.prob(h, s, b);
      }
  }
  return PolicyPair{StagePolicy(H, S, A, std::move(mu)), StagePolicy(H, S, B, std::move(nu))};
}

}  // namespace mailbench
