#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/envs.hpp"
#include "mailbench/game.hpp"
#include "mailbench/matrix_nash.hpp"

namespace mailbench {

// ---------------------------------------------------------------------------
// Concentrability
// ---------------------------------------------------------------------------

struct ConcentrabilityReport {
  // Worst occupancy/rho ratio over deviations restricted to exact best
  // responses against the experts.
  double c_expert = 0.0;
  // Same with the best-response restriction dropped: an exact upper bound on
  // the all-policy deviation coefficient, and tight whenever the worst
  // deviation is a best response to something.
  double c_deviation = 0.0;
  // Per-(stage, state) ratio tables, one per deviating player.
  std::vector<Vec> ratios_p1_deviates;  // [h][s]
  std::vector<Vec> ratios_p2_deviates;
  std::vector<Vec> ratios_p1_all;
  std::vector<Vec> ratios_p2_all;
  std::vector<Vec> rho;
};

namespace detail {

// Optimal-action sets of the free player in an induced MDP, up to `tol` of
// the optimal Q. A policy is a best response exactly when, at every state it
// can reach, it only plays actions from these sets; restricting the MDP to
// them therefore makes occupancy maximization over the best-response set an
// ordinary reachability DP.
inline std::vector<std::vector<std::vector<int>>> optimal_action_sets(const InducedMdp& mdp,
                                                                      double tol = 1e-9) {
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  std::vector<std::vector<std::vector<int>>> sets(H, std::vector<std::vector<int>>(S));
  Vec v_next(S, 0.0), v_cur(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      Vec q(A, 0.0);
      double best = -kInf;
      for (int a = 0; a < A; ++a) {
        q[a] = mdp.reward(h, s, a) + dot(mdp.transition_row(h, s, a), std::span<const double>(v_next));
        best = std::max(best, q[a]);
      }
      for (int a = 0; a < A; ++a)
        if (q[a] >= best - tol) sets[h][s].push_back(a);
      v_cur[s] = best;
    }
    v_next = v_cur;
  }
  return sets;
}

// Restricts an induced MDP to the given per-(stage,state) action sets by
// redirecting forbidden actions onto the first allowed one. Occupancy maxima
// over the restricted policy class are unchanged.
inline InducedMdp restrict_actions(const InducedMdp& mdp,
                                   const std::vector<std::vector<std::vector<int>>>& allowed) {
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  std::vector<Vec> transition(H, Vec(static_cast<size_t>(S) * A * S, 0.0));
  std::vector<Vec> reward(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto& ok = allowed[h][s];
        const int use = std::find(ok.begin(), ok.end(), a) != ok.end() ? a : ok.front();
        auto row = mdp.transition_row(h, s, use);
        std::copy(row.begin(), row.end(),
                  transition[h].begin() + (static_cast<size_t>(s) * A + a) * S);
        reward[h][static_cast<size_t>(s) * A + a] = mdp.reward(h, s, use);
      }
  return InducedMdp(H, S, A, mdp.initial_dist(), std::move(transition), std::move(reward));
}

inline double ratio_or_inf(double numerator, double denominator) {
  if (numerator <= 0.0) return 0.0;
  if (denominator <= 0.0) return kInf;
  return numerator / denominator;
}

}  // namespace detail

// max over policies of d_h(s) for every (s,h), one reachability DP per pair.
inline std::vector<Vec> max_visitation_table(const InducedMdp& mdp) {
  std::vector<Vec> table(mdp.horizon(), Vec(mdp.n_states(), 0.0));
  for (int h = 0; h < mdp.horizon(); ++h)
    for (int s = 0; s < mdp.n_states(); ++s) table[h][s] = max_visitation(mdp, s, h).prob;
  return table;
}

// Exact concentrability of the expert pair under rho, plus the all-deviation
// upper bound. Ratios with zero rho mass and positive reach are +inf.
inline ConcentrabilityReport concentrability(const MarkovGame& game, const PolicyPair& experts,
                                             const std::vector<Vec>& rho) {
  experts.check_dims(game);
  const int H = game.horizon(), S = game.n_states();
  require(static_cast<int>(rho.size()) == H, "concentrability: rho stage mismatch");
  for (const auto& r : rho) {
    require(static_cast<int>(r.size()) == S, "concentrability: rho size mismatch");
    Vec copy = r;
    normalize_prob_row(std::span<double>(copy.data(), copy.size()), 1e-9, "concentrability rho");
  }

  ConcentrabilityReport report;
  report.rho = rho;
  report.ratios_p1_deviates.assign(H, Vec(S, 0.0));
  report.ratios_p2_deviates.assign(H, Vec(S, 0.0));
  report.ratios_p1_all.assign(H, Vec(S, 0.0));
  report.ratios_p2_all.assign(H, Vec(S, 0.0));

  auto run_side = [&](Player fixed, std::vector<Vec>& restricted_out, std::vector<Vec>& all_out) {
    const StagePolicy& fixed_policy = fixed == Player::two ? experts.nu : experts.mu;
    // The free player optimizes the true game payoff: player 1 maximizes it,
    // player 2 minimizes, so the fixed-mu side negates.
    auto planning_reward = induced_reward(game, fixed, fixed_policy);
    if (fixed == Player::one) planning_reward = negated(std::move(planning_reward));
    auto mdp = induce_mdp(game, fixed, fixed_policy, std::move(planning_reward));
    auto restricted = detail::restrict_actions(mdp, detail::optimal_action_sets(mdp));
    auto reach_restricted = max_visitation_table(restricted);
    auto reach_all = max_visitation_table(mdp);
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        restricted_out[h][s] = detail::ratio_or_inf(reach_restricted[h][s], rho[h][s]);
        all_out[h][s] = detail::ratio_or_inf(reach_all[h][s], rho[h][s]);
      }
  };
  run_side(Player::two, report.ratios_p1_deviates, report.ratios_p1_all);
  run_side(Player::one, report.ratios_p2_deviates, report.ratios_p2_all);

  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      report.c_expert = std::max({report.c_expert, report.ratios_p1_deviates[h][s],
                                  report.ratios_p2_deviates[h][s]});
      report.c_deviation =
          std::max({report.c_deviation, report.ratios_p1_all[h][s], report.ratios_p2_all[h][s]});
    }
  return report;
}

// (state, stage) pairs reachable with probability at least delta in the MDP
// induced by the fixed expert.
inline std::set<std::pair<int, int>> significant_states(const GameDynamics& game,
                                                        Player fixed_player,
                                                        const StagePolicy& expert, double delta) {
  require(delta > 0.0 && delta <= 1.0, "significant_states: delta in (0,1]");
  const int n_free = game.n_actions(other(fixed_player));
  std::vector<Vec> zero_reward(game.horizon(),
                               Vec(static_cast<size_t>(game.n_states()) * n_free, 0.0));
  auto mdp = induce_mdp(game, fixed_player, expert, std::move(zero_reward));
  auto table = max_visitation_table(mdp);
  std::set<std::pair<int, int>> out;
  for (int h = 0; h < game.horizon(); ++h)
    for (int s = 0; s < game.n_states(); ++s)
      if (table[h][s] >= delta) out.insert({s, h});
  return out;
}

inline std::set<std::pair<int, int>> significant_states(const MarkovGame& game, Player fixed_player,
                                                        const StagePolicy& expert, double delta) {
  return significant_states(GameDynamics(game), fixed_player, expert, delta);
}

// ---------------------------------------------------------------------------
// Closed forms of the perturbed matching-pennies construction
// ---------------------------------------------------------------------------

// Column player's exploitability when playing (q, 1-q) in the payoff
// [[1+delta, -1], [-1, 1]]: best pure row response minus the game value.
inline double exploitability_nu_closed_form(double delta, double q) {
  require(q >= 0.0 && q <= 1.0, "exploitability_nu_closed_form: q in [0,1]");
  const double value = perturbed_mp_nash(delta).second;
  return std::max((2.0 + delta) * q - 1.0, 1.0 - 2.0 * q) - value;
}

// Row player's exploitability when playing (p, 1-p): game value minus the
// worst pure column response.
inline double exploitability_mu_closed_form(double delta, double p) {
  require(p >= 0.0 && p <= 1.0, "exploitability_mu_closed_form: p in [0,1]");
  const double value = perturbed_mp_nash(delta).second;
  return value - std::min((2.0 + delta) * p - 1.0, 1.0 - 2.0 * p);
}

// Strategy family interpolating between the two equilibria of the game pair
// (delta = 2*eps at weight 1, delta = eps at weight 0).
inline double interpolating_strategy(double eps, double weight) {
  return 0.5 - (2.0 * weight * eps / (8.0 + 4.0 * eps) + (1.0 - weight) * eps / (8.0 + 2.0 * eps));
}

// Column exploitability of the interpolating strategy inside the game with
// delta = 2*eps, reduced to closed form.
inline double g1_exploitability_nu(double eps, double beta) {
  return std::max(2.0 * eps * (1.0 + eps) * (1.0 - beta) / ((4.0 + eps) * (2.0 + eps)),
                  -2.0 * eps * (1.0 - beta) / ((2.0 + eps) * (4.0 + eps)));
}

// Same inside the game with delta = eps.
inline double g2_exploitability_nu(double eps, double beta) {
  return std::max(-beta * eps / (4.0 + eps),
                  2.0 * eps * beta / ((2.0 + eps) * (4.0 + eps)));
}

struct StrategyClassMinimizer {
  double q_star = 0.0;
  double beta_star = 0.0;
};

// Worst-case exploitability across the two games as a function of q; its two
// active affine pieces.
inline double strategy_class_objective(double eps, double q) {
  const double f1 = (2.0 + 2.0 * eps) * q - 1.0 - eps / (2.0 + eps);
  const double f4 = 1.0 - 2.0 * q - eps / (4.0 + eps);
  return std::max(f1, f4);
}

inline StrategyClassMinimizer strategy_class_minimizer(double eps) {
  require(eps > 0.0, "strategy_class_minimizer: eps must be positive");
  StrategyClassMinimizer out;
  out.q_star = (2.0 + eps / (2.0 + eps) - eps / (4.0 + eps)) / (2.0 * (2.0 + eps));
  out.beta_star = (eps + 1.0) / (eps + 2.0);
  return out;
}

// ---------------------------------------------------------------------------
// Divergences
// ---------------------------------------------------------------------------

inline double chi2_bernoulli(double r, double s) {
  require(r > 0.0 && r < 1.0 && s > 0.0 && s < 1.0, "chi2_bernoulli: arguments in (0,1)");
  return (r - s) * (r - s) / (s * (1.0 - s));
}

inline double kl_bernoulli(double r, double s) {
  require(r > 0.0 && r < 1.0 && s > 0.0 && s < 1.0, "kl_bernoulli: arguments in (0,1)");
  return r * std::log(r / s) + (1.0 - r) * std::log((1.0 - r) / (1.0 - s));
}

inline double bh_lower(double eps, double n, double kl) {
  return eps / 30.0 * std::exp(-n * kl);
}

// The two equilibrium head probabilities the sample-size argument has to
// distinguish (alpha interpolates the same way as the strategy family).
inline std::pair<double, double> nash_means(double eps, double alpha = 1.0) {
  return {0.5 - 2.0 * alpha * eps / (8.0 + 4.0 * eps), 0.5 - alpha * eps / (8.0 + 2.0 * eps)};
}

// Closed-form divergence proxy between the two equilibrium means, the
// quantity sandwiched by 9 eps^2 / 300 and 16 eps^2 / 128. It upper-bounds
// both the chi-square and the KL of the actual Bernoulli pair on (0,1).
inline double chi2_nash_means_bound(double eps) {
  const double num = eps * eps * (eps - 4.0) * (eps - 4.0);
  const double den = (8.0 + 2.0 * eps) * (4.0 + eps) * (4.0 + 2.0 * eps);
  return num / den;
}

}  // namespace mailbench
