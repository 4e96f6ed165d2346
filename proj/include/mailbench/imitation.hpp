#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/game.hpp"
#include "mailbench/rng.hpp"

namespace mailbench {

struct TrajectoryRecord {
  int h = 0;
  int s = 0;
  int a = 0;  // player-1 action
  int b = 0;  // player-2 action
};

// Ordered record list plus expert-query accounting. A query counter increases
// whenever an expert action is sampled on behalf of that player, whether or
// not the record is kept.
struct TrajectoryDataset {
  std::vector<TrajectoryRecord> records;
  uint64_t expert_queries_p1 = 0;
  uint64_t expert_queries_p2 = 0;
  uint64_t rng_seed = 0;

  void append(const TrajectoryDataset& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    expert_queries_p1 += other.expert_queries_p1;
    expert_queries_p2 += other.expert_queries_p2;
  }

  // First n records; query counters are prorated exactly by record count so
  // nested budget sweeps stay consistent.
  TrajectoryDataset prefix(size_t n) const {
    TrajectoryDataset out;
    n = std::min(n, records.size());
    out.records.assign(records.begin(), records.begin() + n);
    if (!records.empty()) {
      out.expert_queries_p1 = expert_queries_p1 * n / records.size();
      out.expert_queries_p2 = expert_queries_p2 * n / records.size();
    }
    out.rng_seed = rng_seed;
    return out;
  }
};

// Rolls the game forward under the pair; one record per stage per trajectory.
inline TrajectoryDataset collect_trajectories(const MarkovGame& game, const PolicyPair& pair,
                                              int n, Rng& rng) {
  pair.check_dims(game);
  require(n >= 1, "collect_trajectories: n must be >= 1");
  const int H = game.horizon();
  TrajectoryDataset out;
  out.records.reserve(static_cast<size_t>(n) * H);
  for (int i = 0; i < n; ++i) {
    int s = rng.categorical(game.initial_dist());
    for (int h = 0; h < H; ++h) {
      const int a = rng.categorical(pair.mu.row(h, s));
      const int b = rng.categorical(pair.nu.row(h, s));
      out.records.push_back({h, s, a, b});
      s = rng.categorical(game.transition_row(h, s, a, b));
    }
  }
  out.expert_queries_p1 += static_cast<uint64_t>(n) * H;
  out.expert_queries_p2 += static_cast<uint64_t>(n) * H;
  return out;
}

// Non-interactive dataset with states drawn from a per-stage distribution rho
// instead of rolled trajectories; both experts label every drawn state.
inline TrajectoryDataset collect_from_state_dist(const MarkovGame& game,
                                                 const std::vector<Vec>& rho,
                                                 const PolicyPair& experts, int n, Rng& rng) {
  experts.check_dims(game);
  require(n >= 1, "collect_from_state_dist: n must be >= 1");
  const int H = game.horizon();
  require(static_cast<int>(rho.size()) == H, "collect_from_state_dist: rho stage mismatch");
  for (const auto& r : rho) {
    require(static_cast<int>(r.size()) == game.n_states(), "collect_from_state_dist: rho size");
    Vec copy = r;
    normalize_prob_row(std::span<double>(copy.data(), copy.size()), 1e-9,
                       "collect_from_state_dist rho");
  }
  TrajectoryDataset out;
  out.records.reserve(static_cast<size_t>(n) * H);
  for (int i = 0; i < n; ++i)
    for (int h = 0; h < H; ++h) {
      const int s = rng.categorical(rho[h]);
      const int a = rng.categorical(experts.mu.row(h, s));
      const int b = rng.categorical(experts.nu.row(h, s));
      out.records.push_back({h, s, a, b});
    }
  out.expert_queries_p1 += static_cast<uint64_t>(n) * H;
  out.expert_queries_p2 += static_cast<uint64_t>(n) * H;
  return out;
}

// Per-(stage,state) action counts with the derived maximum-likelihood rows.
// Unvisited rows fall back to uniform; no smoothing is applied anywhere else.
class EmpiricalPolicy {
 public:
  EmpiricalPolicy(int horizon, int n_states, int n_actions)
      : horizon_(horizon),
        n_states_(n_states),
        n_actions_(n_actions),
        counts_(static_cast<size_t>(horizon) * n_states * n_actions, 0) {}

  void observe(int h, int s, int action) { ++counts_[index(h, s, action)]; }

  uint64_t count(int h, int s, int action) const { return counts_[index(h, s, action)]; }

  uint64_t visits(int h, int s) const {
    uint64_t t = 0;
    for (int a = 0; a < n_actions_; ++a) t += counts_[index(h, s, a)];
    return t;
  }
  bool visited(int h, int s) const { return visits(h, s) > 0; }

  StagePolicy to_policy() const {
    std::vector<Vec> probs(horizon_, Vec(static_cast<size_t>(n_states_) * n_actions_, 0.0));
    for (int h = 0; h < horizon_; ++h)
      for (int s = 0; s < n_states_; ++s) {
        const uint64_t total = visits(h, s);
        for (int a = 0; a < n_actions_; ++a)
          probs[h][static_cast<size_t>(s) * n_actions_ + a] =
              total == 0 ? 1.0 / n_actions_
                         : static_cast<double>(counts_[index(h, s, a)]) / static_cast<double>(total);
      }
    return StagePolicy(horizon_, n_states_, n_actions_, std::move(probs));
  }

  // Cosmetic helper: pools counts across stages and replicates the pooled row
  // at every stage. Display convenience only; learning stays stage-indexed.
  StagePolicy to_stationary_policy() const {
    std::vector<Vec> probs(horizon_, Vec(static_cast<size_t>(n_states_) * n_actions_, 0.0));
    for (int s = 0; s < n_states_; ++s) {
      Vec pooled(n_actions_, 0.0);
      uint64_t total = 0;
      for (int h = 0; h < horizon_; ++h)
        for (int a = 0; a < n_actions_; ++a) {
          pooled[a] += static_cast<double>(counts_[index(h, s, a)]);
          total += counts_[index(h, s, a)];
        }
      for (int a = 0; a < n_actions_; ++a) {
        const double p = total == 0 ? 1.0 / n_actions_ : pooled[a] / static_cast<double>(total);
        for (int h = 0; h < horizon_; ++h) probs[h][static_cast<size_t>(s) * n_actions_ + a] = p;
      }
    }
    return StagePolicy(horizon_, n_states_, n_actions_, std::move(probs));
  }

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

 private:
  size_t index(int h, int s, int a) const {
    return (static_cast<size_t>(h) * n_states_ + s) * n_actions_ + a;
  }

  int horizon_, n_states_, n_actions_;
  std::vector<uint64_t> counts_;
};

// Tabular behavior cloning: the log-loss minimizer over a finite policy class
// is exactly the per-(stage,state) empirical action frequency.
inline EmpiricalPolicy bc_fit(const TrajectoryDataset& dataset, Player player, int horizon,
                              int n_states, int n_actions) {
  EmpiricalPolicy fit(horizon, n_states, n_actions);
  for (const auto& rec : dataset.records) {
    require(rec.h >= 0 && rec.h < horizon && rec.s >= 0 && rec.s < n_states,
            "bc_fit: record outside game dimensions");
    const int action = player == Player::one ? rec.a : rec.b;
    require(action >= 0 && action < n_actions, "bc_fit: action outside range");
    fit.observe(rec.h, rec.s, action);
  }
  return fit;
}

}  // namespace mailbench
