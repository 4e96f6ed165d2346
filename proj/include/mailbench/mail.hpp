#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/game.hpp"
#include "mailbench/imitation.hpp"
#include "mailbench/reward_free.hpp"
#include "mailbench/rng.hpp"

namespace mailbench {

// ---------------------------------------------------------------------------
// Expert-query accounting
// ---------------------------------------------------------------------------

struct QueryLedgerRow {
  std::string phase;
  Player player = Player::one;
  uint64_t queries = 0;
};

struct QueryLedger {
  std::vector<QueryLedgerRow> rows;

  void add(std::string phase, Player player, uint64_t queries) {
    if (queries > 0) rows.push_back({std::move(phase), player, queries});
  }
  uint64_t total() const {
    uint64_t t = 0;
    for (const auto& r : rows) t += r.queries;
    return t;
  }
  uint64_t total(Player p) const {
    uint64_t t = 0;
    for (const auto& r : rows)
      if (r.player == p) t += r.queries;
    return t;
  }
  uint64_t phase_total(const std::string& phase) const {
    uint64_t t = 0;
    for (const auto& r : rows)
      if (r.phase == phase) t += r.queries;
    return t;
  }
};

// ---------------------------------------------------------------------------
// MAIL-WARM: reward-free warm-up, exploratory data, behavior cloning
// ---------------------------------------------------------------------------

struct MailWarmConfig {
  int n0 = 25;               // warm-up policies per (state, stage)
  int n_trajectories = 1000; // exploratory trajectories per player
  WarmupBackend backend = WarmupBackend::qlearning;
  QLearningConfig qlearning;
  double euler_failure_prob = 0.1;
  bool skip_unreachable = true;
  uint64_t seed = 0;

  WarmupConfig warmup_config(uint64_t stream_seed) const {
    WarmupConfig w;
    w.n0 = n0;
    w.backend = backend;
    w.qlearning = qlearning;
    w.euler_failure_prob = euler_failure_prob;
    w.skip_unreachable = skip_unreachable;
    w.seed = stream_seed;
    return w;
  }
};

struct MailWarmResult {
  PolicyPair pair;
  QueryLedger ledger;
};

// Reward-free by construction: the algorithm only ever sees the dynamics view
// and the queriable experts.
inline MailWarmResult mail_warm(const GameDynamics& game, const PolicyPair& experts,
                                const MailWarmConfig& cfg) {
  require(cfg.n_trajectories >= 1, "mail_warm: n_trajectories must be >= 1");
  const int H = game.horizon(), S = game.n_states();
  MailWarmResult out;

  auto run_side = [&](Player fixed, const StagePolicy& expert, const char* warm_phase,
                      const char* collect_phase, uint64_t tag) {
    auto warm = warmup(game, fixed, expert, cfg.warmup_config(derive_seed(cfg.seed, {tag, 1})));
    out.ledger.add(warm_phase, fixed, warm.expert_queries);
    Rng rng(derive_seed(cfg.seed, {tag, 2}));
    auto data = collect_exploratory(game, fixed, expert, warm.set, cfg.n_trajectories, rng);
    out.ledger.add(collect_phase, fixed,
                   fixed == Player::one ? data.expert_queries_p1 : data.expert_queries_p2);
    return bc_fit(data, fixed, H, S, game.n_actions(fixed)).to_policy();
  };

  StagePolicy nu_hat = run_side(Player::two, experts.nu, "warmup_nu", "collect_nu", 0xb);
  StagePolicy mu_hat = run_side(Player::one, experts.mu, "warmup_mu", "collect_mu", 0xa);
  out.pair = PolicyPair{std::move(mu_hat), std::move(nu_hat)};
  return out;
}

inline MailWarmResult mail_warm(const MarkovGame& game, const PolicyPair& experts,
                                const MailWarmConfig& cfg) {
  return mail_warm(GameDynamics(game), experts, cfg);
}

// ---------------------------------------------------------------------------
// MURMAIL: maximum-uncertainty responses with exponentiated-gradient updates
// ---------------------------------------------------------------------------

enum class MurmailPlanner {
  exact_vi,  // plan exactly against the running reward estimate
  sampled    // optimistic Q-learning over freshly drawn stochastic rewards
};

enum class MurmailOutput { uniform_iterate, last_iterate, average };

struct MurmailConfig {
  int iterations = 100;        // K
  double learning_rate = 50.0; // eta
  int inner_episodes = 10;     // T, used by the sampled planner
  int batch_size = 100;        // update directions averaged per iteration
  MurmailPlanner planner = MurmailPlanner::exact_vi;
  MurmailOutput output = MurmailOutput::uniform_iterate;
  uint64_t seed = 0;
};

struct MurmailResult {
  PolicyPair pair;
  QueryLedger ledger;
};

// One stochastic sample of the squared-distance reward between the learner's
// row and the expert's row, built from two independent expert draws.
inline double uncertainty_sample(std::pair<int, int> expert_draws,
                                 std::span<const double> learner_row) {
  double sq_norm = 0.0;
  for (double p : learner_row) sq_norm += p * p;
  return (expert_draws.first == expert_draws.second ? 1.0 : 0.0) -
         2.0 * learner_row[expert_draws.first] + sq_norm;
}

namespace detail {

// Best response of the free player against a fixed learner policy when the
// reward depends on (stage, state) only. Works directly on the joint
// dynamics; the marginalized transition tensor is never materialized.
inline StagePolicy state_reward_response(const GameDynamics& game, Player fixed,
                                         const StagePolicy& fixed_policy,
                                         const std::vector<Vec>& state_reward) {
  const int H = game.horizon(), S = game.n_states();
  const int A = game.n_actions_p1(), B = game.n_actions_p2();
  const int n_free = game.n_actions(other(fixed));
  Vec v_next(S, 0.0), v_cur(S, 0.0);
  std::vector<Vec> probs(H, Vec(static_cast<size_t>(S) * n_free, 0.0));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      Vec continuation(n_free, 0.0);
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) {
          const int fixed_action = fixed == Player::one ? a : b;
          const int free_action = fixed == Player::one ? b : a;
          const double w = fixed_policy.prob(h, s, fixed_action);
          if (w == 0.0) continue;
          continuation[free_action] +=
              w * dot(game.transition_row(h, s, a, b), std::span<const double>(v_next));
        }
      int best = 0;
      for (int f = 1; f < n_free; ++f)
        if (continuation[f] > continuation[best]) best = f;
      probs[h][static_cast<size_t>(s) * n_free + best] = 1.0;
      v_cur[s] = state_reward[h][s] + continuation[best];
    }
    v_next = v_cur;
  }
  return StagePolicy(H, S, n_free, std::move(probs));
}

// Learner-side state for one player: the evolving policy, the pool of stored
// expert draw pairs (re-scored against the current policy, which keeps every
// stored pair an unbiased sample for it), and output bookkeeping.
struct MurmailSide {
  StagePolicy policy;
  std::vector<std::vector<std::vector<std::pair<int, int>>>> draw_pool;  // [h][s]
  std::vector<Vec> average_weights;  // running sum of iterates
  StagePolicy snapshot;              // iterate chosen for the uniform-index output
  int snapshot_iteration = 0;

  MurmailSide(int horizon, int n_states, int n_actions, int snapshot_k)
      : policy(StagePolicy::uniform(horizon, n_states, n_actions)),
        draw_pool(horizon, std::vector<std::vector<std::pair<int, int>>>(n_states)),
        average_weights(horizon, Vec(static_cast<size_t>(n_states) * n_actions, 0.0)),
        snapshot(policy),
        snapshot_iteration(snapshot_k) {}

  void note_iterate(int k) {
    if (k == snapshot_iteration) snapshot = policy;
    for (int h = 0; h < policy.horizon(); ++h)
      for (int s = 0; s < policy.n_states(); ++s)
        for (int a = 0; a < policy.n_actions(); ++a)
          average_weights[h][static_cast<size_t>(s) * policy.n_actions() + a] +=
              policy.prob(h, s, a);
  }

  StagePolicy averaged(int iterations) const {
    std::vector<Vec> probs = average_weights;
    for (auto& stage : probs)
      for (double& v : stage) v /= iterations;
    return StagePolicy(policy.horizon(), policy.n_states(), policy.n_actions(), std::move(probs));
  }

  // Reward estimate per (stage, state) against the current policy; unvisited
  // states get the maximal squared distance 2 so planning stays optimistic.
  std::vector<Vec> reward_estimate() const {
    const int H = policy.horizon(), S = policy.n_states();
    std::vector<Vec> reward(H, Vec(S, 2.0));
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        if (draw_pool[h][s].empty()) continue;
        double value = 0.0;
        for (auto draws : draw_pool[h][s]) value += uncertainty_sample(draws, policy.row(h, s));
        reward[h][s] = value / static_cast<double>(draw_pool[h][s].size());
      }
    return reward;
  }
};

// Optimistic Q-learning planner for the sampled mode. Rewards are drawn on
// every visit from two fresh expert draws; each visit costs two queries.
inline StagePolicy sampled_uncertainty_response(const InducedMdp& dynamics_only,
                                                const StagePolicy& learner,
                                                const StagePolicy& expert_of_learner,
                                                int episodes, Rng& rng, uint64_t& queries) {
  const int H = dynamics_only.horizon(), S = dynamics_only.n_states(),
            A = dynamics_only.n_actions();
  std::vector<Vec> q(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (double& v : q[h]) v = 2.0 * (H - h);
  std::vector<std::vector<uint64_t>> count(H,
                                           std::vector<uint64_t>(static_cast<size_t>(S) * A, 0));
  auto greedy = [&](int h, int s) {
    int best = 0;
    double best_q = -kInf;
    for (int a = 0; a < A; ++a)
      if (q[h][static_cast<size_t>(s) * A + a] > best_q) {
        best_q = q[h][static_cast<size_t>(s) * A + a];
        best = a;
      }
    return best;
  };
  for (int episode = 0; episode < episodes; ++episode) {
    int s = rng.categorical(dynamics_only.initial_dist());
    for (int h = 0; h < H; ++h) {
      const int a = greedy(h, s);
      std::pair<int, int> draws{rng.categorical(expert_of_learner.row(h, s)),
                                rng.categorical(expert_of_learner.row(h, s))};
      queries += 2;
      const double r = uncertainty_sample(draws, learner.row(h, s));
      const int sp = rng.categorical(dynamics_only.transition_row(h, s, a));
      double target = r;
      if (h + 1 < H) target += q[h + 1][static_cast<size_t>(sp) * A + greedy(h + 1, sp)];
      const size_t idx = static_cast<size_t>(s) * A + a;
      const double step = 1.0 / static_cast<double>(++count[h][idx]);
      q[h][idx] += step * (target - q[h][idx]);
      s = sp;
    }
  }
  std::vector<Vec> probs(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) probs[h][static_cast<size_t>(s) * A + greedy(h, s)] = 1.0;
  return StagePolicy(H, S, A, std::move(probs));
}

}  // namespace detail

inline MurmailResult murmail(const GameDynamics& game, const PolicyPair& experts,
                             const MurmailConfig& cfg) {
  require(cfg.iterations >= 1 && cfg.batch_size >= 1 && cfg.inner_episodes >= 1,
          "murmail: iteration, batch and inner budgets must be positive");
  require(cfg.learning_rate >= 0.0, "murmail: learning rate must be >= 0");
  const int H = game.horizon(), S = game.n_states(), A = game.n_actions_p1(),
            B = game.n_actions_p2();

  Rng rng(derive_seed(cfg.seed, {0x6d75726dULL}));
  const int snapshot_k = rng.uniform_int(cfg.iterations);
  detail::MurmailSide mu_side(H, S, A, snapshot_k);
  detail::MurmailSide nu_side(H, S, B, snapshot_k);
  MurmailResult out;
  uint64_t reward_queries_p1 = 0, reward_queries_p2 = 0;
  uint64_t update_queries_p1 = 0, update_queries_p2 = 0;

  auto run_side = [&](detail::MurmailSide& side, Player learner, const StagePolicy& expert,
                      uint64_t& reward_queries, uint64_t& update_queries) {
    const int free_actions = game.n_actions(other(learner));
    // Response of the other role in the MDP induced by the learner's policy,
    // maximizing the estimated distance-to-expert reward.
    auto induced = induce_mdp(game, learner, side.policy, side.reward_estimate(free_actions));
    StagePolicy response = best_response(induced).policy;
    if (cfg.planner == MurmailPlanner::sampled)
      response = detail::sampled_uncertainty_response(induced, side.policy, expert,
                                                      cfg.inner_episodes, rng, reward_queries);

    // Batched exponentiated-gradient step from states visited under
    // (learner, response).
    const int n_actions = side.policy.n_actions();
    std::vector<Vec> grad(H, Vec(static_cast<size_t>(S) * n_actions, 0.0));
    for (int j = 0; j < cfg.batch_size; ++j) {
      int s = rng.categorical(game.initial_dist());
      const int pick = rng.uniform_int(H);
      int picked_state = 0;
      for (int h = 0; h < H; ++h) {
        if (h == pick) picked_state = s;
        const int own = rng.categorical(side.policy.row(h, s));
        const int other_action = rng.categorical(response.row(h, s));
        const int a = learner == Player::one ? own : other_action;
        const int b = learner == Player::one ? other_action : own;
        s = rng.categorical(game.transition_row(h, s, a, b));
      }
      if (cfg.planner == MurmailPlanner::exact_vi) {
        side.draw_pool[pick][picked_state].push_back(
            {rng.categorical(expert.row(pick, picked_state)),
             rng.categorical(expert.row(pick, picked_state))});
        reward_queries += 2;
      }
      const int expert_action = rng.categorical(expert.row(pick, picked_state));
      update_queries += 1;
      auto row = side.policy.row(pick, picked_state);
      for (int a = 0; a < n_actions; ++a)
        grad[pick][static_cast<size_t>(picked_state) * n_actions + a] +=
            (row[a] - (a == expert_action ? 1.0 : 0.0)) / cfg.batch_size;
    }
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s) {
        Vec updated(n_actions, 0.0);
        bool touched = false;
        for (int a = 0; a < n_actions; ++a) {
          const double g = grad[h][static_cast<size_t>(s) * n_actions + a];
          touched = touched || g != 0.0;
          updated[a] = side.policy.prob(h, s, a) * std::exp(-cfg.learning_rate * g);
        }
        if (!touched) continue;
        double sum = 0.0;
        for (double v : updated) sum += v;
        for (double& v : updated) v /= sum;
        side.policy.set_row(h, s, updated);
      }
  };

  for (int k = 0; k < cfg.iterations; ++k) {
    mu_side.note_iterate(k);
    nu_side.note_iterate(k);
    run_side(mu_side, Player::one, experts.mu, reward_queries_p1, update_queries_p1);
    run_side(nu_side, Player::two, experts.nu, reward_queries_p2, update_queries_p2);
  }

  out.ledger.add("murmail_reward", Player::one, reward_queries_p1);
  out.ledger.add("murmail_update", Player::one, update_queries_p1);
  out.ledger.add("murmail_reward", Player::two, reward_queries_p2);
  out.ledger.add("murmail_update", Player::two, update_queries_p2);

  switch (cfg.output) {
    case MurmailOutput::uniform_iterate:
      out.pair = PolicyPair{mu_side.snapshot, nu_side.snapshot};
      break;
    case MurmailOutput::last_iterate:
      out.pair = PolicyPair{mu_side.policy, nu_side.policy};
      break;
    case MurmailOutput::average:
      out.pair =
          PolicyPair{mu_side.averaged(cfg.iterations), nu_side.averaged(cfg.iterations)};
      break;
  }
  return out;
}

inline MurmailResult murmail(const MarkovGame& game, const PolicyPair& experts,
                             const MurmailConfig& cfg) {
  return murmail(GameDynamics(game), experts, cfg);
}

}  // namespace mailbench
