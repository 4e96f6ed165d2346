#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/game.hpp"
#include "mailbench/imitation.hpp"
#include "mailbench/rng.hpp"

namespace mailbench {

// ---------------------------------------------------------------------------
// EULER (optimistic episodic RL with empirical-Bernstein bonuses)
// ---------------------------------------------------------------------------

struct EulerConfig {
  int n_episodes = 50;      // N0
  double failure_prob = 0.1;

  struct Constants {
    double delta_prime;
    double log_term;  // ln(4 S A N0 / delta')
    double b_p;
    double b_v;
    double j;
  };
  Constants constants(int n_states, int n_actions) const {
    require(n_episodes >= 1, "EulerConfig: n_episodes must be >= 1");
    require(failure_prob > 0.0 && failure_prob < 1.0, "EulerConfig: failure_prob in (0,1)");
    Constants c{};
    c.delta_prime = failure_prob / 7.0;
    c.log_term = std::log(4.0 * n_states * n_actions * n_episodes / c.delta_prime);
    c.b_v = std::sqrt(2.0 * c.log_term);
    return c;
  }
  Constants constants(int n_states, int n_actions, int horizon) const {
    Constants c = constants(n_states, n_actions);
    c.b_p = horizon * c.b_v;
    c.j = horizon / 3.0 * c.log_term;
    return c;
  }
};

struct EulerResult {
  std::vector<StagePolicy> policies;  // the policy played in each episode
  Vec optimistic_values;              // <d0, upper value> after each episode
};

// One full run on an exploration MDP. The policy played in episode k+1 is the
// greedy policy of the optimistic backward pass at the end of episode k; the
// first episode plays uniform. Zero-count (s,a) pairs keep the maximal bonus
// H-h so unexplored actions stay attractive.
inline EulerResult euler(const InducedMdp& mdp, const EulerConfig& cfg, Rng& rng) {
  require(mdp.has_indicator_rewards(), "euler: exploration rewards must be 0/1");
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  const auto con = cfg.constants(S, A, H);

  std::vector<std::vector<uint64_t>> visit(H, std::vector<uint64_t>(static_cast<size_t>(S) * A, 0));
  std::vector<std::vector<uint64_t>> next_count(
      H, std::vector<uint64_t>(static_cast<size_t>(S) * A * S, 0));
  std::vector<Vec> v_up(H + 1, Vec(S, 0.0));
  std::vector<Vec> v_low(H + 1, Vec(S, 0.0));

  EulerResult out;
  StagePolicy policy = StagePolicy::uniform(H, S, A);
  for (int k = 0; k < cfg.n_episodes; ++k) {
    out.policies.push_back(policy);

    int s = rng.categorical(mdp.initial_dist());
    for (int h = 0; h < H; ++h) {
      const int a = rng.categorical(policy.row(h, s));
      const int sp = rng.categorical(mdp.transition_row(h, s, a));
      ++visit[h][static_cast<size_t>(s) * A + a];
      ++next_count[h][(static_cast<size_t>(s) * A + a) * S + sp];
      s = sp;
    }

    std::vector<Vec> greedy(H, Vec(static_cast<size_t>(S) * A, 0.0));
    for (int h = H - 1; h >= 0; --h) {
      for (int st = 0; st < S; ++st) {
        int best_a = 0;
        double best_q = -kInf;
        Vec bonus_of(A, 0.0);
        for (int a = 0; a < A; ++a) {
          const uint64_t n = visit[h][static_cast<size_t>(st) * A + a];
          double q;
          double bonus;
          if (n == 0) {
            bonus = H - h;
            q = std::min<double>(H - h, mdp.reward(h, st, a) + bonus);
          } else {
            const uint64_t* row = next_count[h].data() + (static_cast<size_t>(st) * A + a) * S;
            double mean_up = 0.0, mean_sq = 0.0, spread_sq = 0.0;
            for (int sp = 0; sp < S; ++sp) {
              if (row[sp] == 0) continue;
              const double p = static_cast<double>(row[sp]) / static_cast<double>(n);
              mean_up += p * v_up[h + 1][sp];
              mean_sq += p * v_up[h + 1][sp] * v_up[h + 1][sp];
              const double d = v_up[h + 1][sp] - v_low[h + 1][sp];
              spread_sq += p * d * d;
            }
            const double variance = std::max(0.0, mean_sq - mean_up * mean_up);
            const double nn = static_cast<double>(n);
            const double b = std::sqrt(2.0 * variance * con.log_term / nn) +
                             H * con.log_term / (3.0 * std::max<double>(nn - 1.0, 1.0));
            bonus = b + (1.0 / std::sqrt(nn)) *
                            ((4.0 * con.j + con.b_p) / std::sqrt(nn) +
                             con.b_v * std::sqrt(spread_sq));
            q = std::min<double>(H - h, mdp.reward(h, st, a) + mean_up + bonus);
          }
          bonus_of[a] = bonus;
          if (q > best_q) {
            best_q = q;
            best_a = a;
          }
        }
        greedy[h][static_cast<size_t>(st) * A + best_a] = 1.0;
        v_up[h][st] = best_q;

        const uint64_t n = visit[h][static_cast<size_t>(st) * A + best_a];
        double low = 0.0;
        if (n > 0) {
          const uint64_t* row = next_count[h].data() + (static_cast<size_t>(st) * A + best_a) * S;
          double mean_low = 0.0;
          for (int sp = 0; sp < S; ++sp)
            if (row[sp] > 0)
              mean_low += static_cast<double>(row[sp]) / static_cast<double>(n) * v_low[h + 1][sp];
          low = std::max(0.0, mdp.reward(h, st, best_a) + mean_low - bonus_of[best_a]);
        }
        v_low[h][st] = low;
      }
    }
    policy = StagePolicy(H, S, A, std::move(greedy));
    out.optimistic_values.push_back(
        dot(std::span<const double>(mdp.initial_dist()), std::span<const double>(v_up[0])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Practical planner: episodic tabular Q-learning
// ---------------------------------------------------------------------------

struct QLearningConfig {
  int n_iters = 100;       // episodes per reachability problem
  double epsilon = 0.1;    // exploration rate on top of the optimistic init
};

inline StagePolicy qlearning_planner(const InducedMdp& mdp, const QLearningConfig& cfg, Rng& rng) {
  require(cfg.n_iters >= 1, "qlearning_planner: n_iters must be >= 1");
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  std::vector<Vec> q(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (double& v : q[h]) v = H - h;  // optimistic start
  std::vector<std::vector<uint64_t>> count(H,
                                           std::vector<uint64_t>(static_cast<size_t>(S) * A, 0));

  auto greedy_action = [&](int h, int s) {
    int best = 0;
    double best_q = -kInf;
    for (int a = 0; a < A; ++a) {
      const double val = q[h][static_cast<size_t>(s) * A + a];
      if (val > best_q) {
        best_q = val;
        best = a;
      }
    }
    return best;
  };

  for (int episode = 0; episode < cfg.n_iters; ++episode) {
    int s = rng.categorical(mdp.initial_dist());
    for (int h = 0; h < H; ++h) {
      const int a = rng.uniform() < cfg.epsilon ? rng.uniform_int(A) : greedy_action(h, s);
      const int sp = rng.categorical(mdp.transition_row(h, s, a));
      double target = mdp.reward(h, s, a);
      if (h + 1 < H) target += q[h + 1][static_cast<size_t>(sp) * A + greedy_action(h + 1, sp)];
      const size_t idx = static_cast<size_t>(s) * A + a;
      const double step = 1.0 / static_cast<double>(++count[h][idx]);
      q[h][idx] += step * (target - q[h][idx]);
      s = sp;
    }
  }

  std::vector<Vec> probs(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) probs[h][static_cast<size_t>(s) * A + greedy_action(h, s)] = 1.0;
  return StagePolicy(H, S, A, std::move(probs));
}

// ---------------------------------------------------------------------------
// Warm-up phase
// ---------------------------------------------------------------------------

struct PolicySetEntry {
  std::shared_ptr<const StagePolicy> policy;
  int target_state = 0;
  int target_stage = 0;
  int episode_index = 0;
};

struct PolicySet {
  std::vector<PolicySetEntry> entries;
  size_t size() const { return entries.size(); }
};

enum class WarmupBackend { qlearning, euler };

struct WarmupConfig {
  int n0 = 25;  // policies contributed per (state, stage) target
  WarmupBackend backend = WarmupBackend::qlearning;
  QLearningConfig qlearning;
  double euler_failure_prob = 0.1;
  // Model-known shortcut: targets with zero reach probability emit uniform
  // policies without spending episodes. Turn off to run the loop as written.
  bool skip_unreachable = true;
  uint64_t seed = 0;
};

struct WarmupResult {
  PolicySet set;
  uint64_t episodes = 0;        // environment episodes consumed
  uint64_t expert_queries = 0;  // fixed-player expert actions drawn (episodes * H)
};

namespace detail {

inline std::shared_ptr<const StagePolicy> uniformize_tail(const StagePolicy& policy,
                                                          int from_stage) {
  const int H = policy.horizon(), S = policy.n_states(), A = policy.n_actions();
  std::vector<Vec> probs(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        probs[h][static_cast<size_t>(s) * A + a] = h >= from_stage ? 1.0 / A : policy.prob(h, s, a);
  return std::make_shared<const StagePolicy>(H, S, A, std::move(probs));
}

}  // namespace detail

// Solves one indicator-reward reachability problem per (state, stage) in the
// MDP induced by the fixed expert and pools the resulting policies. Stages at
// and after the target stage are uniformized: the reachability problem is
// over by then, and the uniform tail is what gives the mixture its action
// coverage at the target.
inline WarmupResult warmup(const GameDynamics& game, Player fixed_player,
                           const StagePolicy& expert, const WarmupConfig& cfg) {
  require(cfg.n0 >= 1, "warmup: n0 must be >= 1");
  const int H = game.horizon(), S = game.n_states();
  const int n_free = game.n_actions(other(fixed_player));
  std::vector<Vec> zero_reward(H, Vec(static_cast<size_t>(S) * n_free, 0.0));
  const InducedMdp base = induce_mdp(game, fixed_player, expert, std::move(zero_reward));

  WarmupResult out;
  auto uniform = std::make_shared<const StagePolicy>(StagePolicy::uniform(H, S, n_free));
  for (int s = 0; s < S; ++s)
    for (int h = 0; h < H; ++h) {
      Rng rng(derive_seed(cfg.seed, {static_cast<uint64_t>(s), static_cast<uint64_t>(h),
                                     static_cast<uint64_t>(fixed_player == Player::one)}));
      const bool reachable = !cfg.skip_unreachable || max_visitation(base, s, h).prob > 0.0;
      if (!reachable) {
        for (int i = 0; i < cfg.n0; ++i) out.set.entries.push_back({uniform, s, h, i});
        continue;
      }
      const InducedMdp problem = base.with_reward(indicator_reward(H, S, n_free, s, h));
      if (cfg.backend == WarmupBackend::euler) {
        EulerConfig euler_cfg{cfg.n0, cfg.euler_failure_prob};
        auto result = euler(problem, euler_cfg, rng);
        out.episodes += static_cast<uint64_t>(cfg.n0);
        for (int i = 0; i < cfg.n0; ++i)
          out.set.entries.push_back({detail::uniformize_tail(result.policies[i], h), s, h, i});
      } else {
        auto policy = detail::uniformize_tail(qlearning_planner(problem, cfg.qlearning, rng), h);
        out.episodes += static_cast<uint64_t>(cfg.qlearning.n_iters);
        for (int i = 0; i < cfg.n0; ++i) out.set.entries.push_back({policy, s, h, i});
      }
    }
  out.expert_queries = out.episodes * static_cast<uint64_t>(H);
  return out;
}

// ---------------------------------------------------------------------------
// Mixture distribution and exploratory data
// ---------------------------------------------------------------------------

struct MixtureDistribution {
  std::vector<Vec> p;  // per stage, flattened [state][free action]
  int n_actions = 0;

  double at(int h, int s, int a) const { return p[h][static_cast<size_t>(s) * n_actions + a]; }
};

// Exact occupancy average over the set: each stage slice is a distribution
// over (state, action) because every component policy contributes exactly one
// unit of stage mass.
inline MixtureDistribution mixture_distribution(const GameDynamics& game, Player fixed_player,
                                                const StagePolicy& expert, const PolicySet& set) {
  require(!set.entries.empty(), "mixture_distribution: empty policy set");
  const int H = game.horizon(), S = game.n_states();
  const int n_free = game.n_actions(other(fixed_player));
  std::vector<Vec> zero_reward(H, Vec(static_cast<size_t>(S) * n_free, 0.0));
  const InducedMdp base = induce_mdp(game, fixed_player, expert, std::move(zero_reward));

  MixtureDistribution out;
  out.n_actions = n_free;
  out.p.assign(H, Vec(static_cast<size_t>(S) * n_free, 0.0));
  std::map<const StagePolicy*, OccupancyTable> cache;
  const double weight = 1.0 / static_cast<double>(set.entries.size());
  for (const auto& entry : set.entries) {
    auto it = cache.find(entry.policy.get());
    if (it == cache.end())
      it = cache.emplace(entry.policy.get(), occupancy_mdp(base, *entry.policy)).first;
    const OccupancyTable& occ = it->second;
    for (int h = 0; h < H; ++h)
      for (size_t i = 0; i < out.p[h].size(); ++i) out.p[h][i] += weight * occ.state_action[h][i];
  }
  return out;
}

// N trajectories, each under a freshly drawn warm-up policy with the fixed
// player glued to the expert; only the expert's actions count as queries.
inline TrajectoryDataset collect_exploratory(const GameDynamics& game, Player fixed_player,
                                             const StagePolicy& expert, const PolicySet& set,
                                             int n, Rng& rng) {
  require(n >= 1, "collect_exploratory: n must be >= 1");
  require(!set.entries.empty(), "collect_exploratory: empty policy set");
  const int H = game.horizon();
  TrajectoryDataset out;
  out.records.reserve(static_cast<size_t>(n) * H);
  for (int i = 0; i < n; ++i) {
    const auto& policy = *set.entries[rng.uniform_int(static_cast<int>(set.entries.size()))].policy;
    int s = rng.categorical(game.initial_dist());
    for (int h = 0; h < H; ++h) {
      const int free_action = rng.categorical(policy.row(h, s));
      const int expert_action = rng.categorical(expert.row(h, s));
      const int a = fixed_player == Player::two ? free_action : expert_action;
      const int b = fixed_player == Player::two ? expert_action : free_action;
      out.records.push_back({h, s, a, b});
      s = rng.categorical(game.transition_row(h, s, a, b));
    }
  }
  if (fixed_player == Player::one)
    out.expert_queries_p1 += static_cast<uint64_t>(n) * H;
  else
    out.expert_queries_p2 += static_cast<uint64_t>(n) * H;
  return out;
}

}  // namespace mailbench
