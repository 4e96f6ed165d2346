#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "mailbench/common.hpp"

namespace mailbench {

enum class Player { one, two };

inline Player other(Player p) { return p == Player::one ? Player::two : Player::one; }

// Stage-indexed stochastic policy for one player: a probability row over that
// player's actions for every (stage, state). Stages run 0..H-1; actions taken
// at stage H-1 are the last ones that matter.
class StagePolicy {
 public:
  StagePolicy() = default;
  StagePolicy(int horizon, int n_states, int n_actions, std::vector<Vec> probs)
      : horizon_(horizon), n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
    require(horizon_ >= 1 && n_states_ >= 1 && n_actions_ >= 1, "StagePolicy: bad dimensions");
    require(static_cast<int>(probs_.size()) == horizon_, "StagePolicy: stage count mismatch");
    for (auto& stage : probs_) {
      require(static_cast<int>(stage.size()) == n_states_ * n_actions_,
              "StagePolicy: stage size mismatch");
      for (int s = 0; s < n_states_; ++s)
        normalize_prob_row(std::span<double>(stage.data() + s * n_actions_, n_actions_),
                           kProbRowTol, "StagePolicy row");
    }
  }

  static StagePolicy uniform(int horizon, int n_states, int n_actions) {
    std::vector<Vec> probs(horizon, Vec(static_cast<size_t>(n_states) * n_actions,
                                        1.0 / n_actions));
    return StagePolicy(horizon, n_states, n_actions, std::move(probs));
  }

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  std::span<const double> row(int h, int s) const {
    return {probs_[h].data() + static_cast<size_t>(s) * n_actions_,
            static_cast<size_t>(n_actions_)};
  }
  double prob(int h, int s, int a) const { return probs_[h][static_cast<size_t>(s) * n_actions_ + a]; }

  // Mutation keeps rows normalized; used by iterative learners.
  void set_row(int h, int s, std::span<const double> p) {
    std::copy(p.begin(), p.end(), probs_[h].begin() + static_cast<size_t>(s) * n_actions_);
    normalize_prob_row(std::span<double>(probs_[h].data() + static_cast<size_t>(s) * n_actions_,
                                         n_actions_),
                       1e-6, "StagePolicy::set_row");
  }

  bool operator==(const StagePolicy& o) const {
    return horizon_ == o.horizon_ && n_states_ == o.n_states_ && n_actions_ == o.n_actions_ &&
           probs_ == o.probs_;
  }

 private:
  int horizon_ = 0, n_states_ = 0, n_actions_ = 0;
  std::vector<Vec> probs_;  // per stage, flattened [state][action]
};

// Finite-horizon two-player zero-sum Markov game with dense tensors. Rewards
// are stored as player 1's payoff; player 2 receives the negation. The
// declared reward bound widens past 1 for perturbed-payoff constructions.
class MarkovGame {
 public:
  MarkovGame(int horizon, int n_states, int n_actions_p1, int n_actions_p2,
             Vec initial_dist, std::vector<Vec> transition, std::vector<Vec> reward,
             double reward_bound = 1.0)
      : horizon_(horizon),
        n_states_(n_states),
        n_actions_p1_(n_actions_p1),
        n_actions_p2_(n_actions_p2),
        reward_bound_(reward_bound),
        initial_dist_(std::move(initial_dist)),
        transition_(std::move(transition)),
        reward_(std::move(reward)) {
    require(horizon_ >= 1 && n_states_ >= 1 && n_actions_p1_ >= 1 && n_actions_p2_ >= 1,
            "MarkovGame: bad dimensions");
    require(reward_bound_ > 0.0, "MarkovGame: reward bound must be positive");
    require(static_cast<int>(initial_dist_.size()) == n_states_, "MarkovGame: d0 size");
    normalize_prob_row(std::span<double>(initial_dist_.data(), initial_dist_.size()),
                       kProbRowTol, "MarkovGame d0");
    require(static_cast<int>(transition_.size()) == horizon_, "MarkovGame: transition stages");
    require(static_cast<int>(reward_.size()) == horizon_, "MarkovGame: reward stages");
    const size_t rows = static_cast<size_t>(n_states_) * n_actions_p1_ * n_actions_p2_;
    for (int h = 0; h < horizon_; ++h) {
      require(transition_[h].size() == rows * n_states_, "MarkovGame: transition size");
      require(reward_[h].size() == rows, "MarkovGame: reward size");
      for (size_t r = 0; r < rows; ++r)
        normalize_prob_row(std::span<double>(transition_[h].data() + r * n_states_, n_states_),
                           kProbRowTol, "MarkovGame transition row");
      for (double v : reward_[h])
        require(std::isfinite(v) && std::abs(v) <= reward_bound_ + 1e-12,
                "MarkovGame: reward outside declared bound");
    }
  }

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions_p1() const { return n_actions_p1_; }
  int n_actions_p2() const { return n_actions_p2_; }
  int n_actions(Player p) const { return p == Player::one ? n_actions_p1_ : n_actions_p2_; }
  double reward_bound() const { return reward_bound_; }
  const Vec& initial_dist() const { return initial_dist_; }

  std::span<const double> transition_row(int h, int s, int a, int b) const {
    return {transition_[h].data() + joint_index(s, a, b) * n_states_,
            static_cast<size_t>(n_states_)};
  }
  double reward(int h, int s, int a, int b) const { return reward_[h][joint_index(s, a, b)]; }

  const std::vector<Vec>& raw_transition() const { return transition_; }
  const std::vector<Vec>& raw_reward() const { return reward_; }

 private:
  size_t joint_index(int s, int a, int b) const {
    return (static_cast<size_t>(s) * n_actions_p1_ + a) * n_actions_p2_ + b;
  }

  int horizon_, n_states_, n_actions_p1_, n_actions_p2_;
  double reward_bound_;
  Vec initial_dist_;
  std::vector<Vec> transition_;  // per stage, flattened [s][a][b][s']
  std::vector<Vec> reward_;      // per stage, flattened [s][a][b]
};

struct PolicyPair {
  StagePolicy mu;  // player 1
  StagePolicy nu;  // player 2

  void check_dims(const MarkovGame& g) const {
    require(mu.horizon() == g.horizon() && nu.horizon() == g.horizon(),
            "PolicyPair: horizon mismatch");
    require(mu.n_states() == g.n_states() && nu.n_states() == g.n_states(),
            "PolicyPair: state count mismatch");
    require(mu.n_actions() == g.n_actions_p1() && nu.n_actions() == g.n_actions_p2(),
            "PolicyPair: action count mismatch");
  }
};

// Transition-marginalized view of the dynamics only. Learning algorithms that
// must stay reward-free take this type instead of the full game.
class GameDynamics {
 public:
  explicit GameDynamics(const MarkovGame& g)
      : horizon_(g.horizon()),
        n_states_(g.n_states()),
        n_actions_p1_(g.n_actions_p1()),
        n_actions_p2_(g.n_actions_p2()),
        initial_dist_(g.initial_dist()),
        transition_(g.raw_transition()) {}

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions_p1() const { return n_actions_p1_; }
  int n_actions_p2() const { return n_actions_p2_; }
  int n_actions(Player p) const { return p == Player::one ? n_actions_p1_ : n_actions_p2_; }
  const Vec& initial_dist() const { return initial_dist_; }

  std::span<const double> transition_row(int h, int s, int a, int b) const {
    size_t idx = (static_cast<size_t>(s) * n_actions_p1_ + a) * n_actions_p2_ + b;
    return {transition_[h].data() + idx * n_states_, static_cast<size_t>(n_states_)};
  }

 private:
  int horizon_, n_states_, n_actions_p1_, n_actions_p2_;
  Vec initial_dist_;
  std::vector<Vec> transition_;
};

// Single-agent MDP obtained by freezing one player. The reward is whatever
// the caller attaches (an indicator for exploration, a marginalized game
// payoff for planning). The transition tensor is immutable and shared across
// reward swaps, so re-rewarding the same dynamics is cheap.
class InducedMdp {
 public:
  InducedMdp(int horizon, int n_states, int n_actions, Vec initial_dist,
             std::vector<Vec> transition, std::vector<Vec> reward)
      : InducedMdp(horizon, n_states, n_actions, std::move(initial_dist),
                   validate_transition(horizon, n_states, n_actions, std::move(transition)),
                   std::move(reward)) {}

  int horizon() const { return horizon_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const Vec& initial_dist() const { return initial_dist_; }

  std::span<const double> transition_row(int h, int s, int a) const {
    return {(*transition_)[h].data() + (static_cast<size_t>(s) * n_actions_ + a) * n_states_,
            static_cast<size_t>(n_states_)};
  }
  double reward(int h, int s, int a) const {
    return reward_[h][static_cast<size_t>(s) * n_actions_ + a];
  }

  // True when every reward entry is exactly 0 or 1 (exploration mode).
  bool has_indicator_rewards() const {
    for (const auto& stage : reward_)
      for (double v : stage)
        if (v != 0.0 && v != 1.0) return false;
    return true;
  }

  InducedMdp with_reward(std::vector<Vec> reward) const {
    return InducedMdp(horizon_, n_states_, n_actions_, initial_dist_, transition_,
                      std::move(reward));
  }

 private:
  static std::shared_ptr<const std::vector<Vec>> validate_transition(int horizon, int n_states,
                                                                     int n_actions,
                                                                     std::vector<Vec> transition) {
    require(horizon >= 1 && n_states >= 1 && n_actions >= 1, "InducedMdp: bad dimensions");
    require(static_cast<int>(transition.size()) == horizon, "InducedMdp: transition stages");
    const size_t rows = static_cast<size_t>(n_states) * n_actions;
    for (int h = 0; h < horizon; ++h) {
      require(transition[h].size() == rows * n_states, "InducedMdp: transition size");
      for (size_t r = 0; r < rows; ++r)
        normalize_prob_row(std::span<double>(transition[h].data() + r * n_states, n_states),
                           kProbRowTol, "InducedMdp transition row");
    }
    return std::make_shared<const std::vector<Vec>>(std::move(transition));
  }

  // Shares already-validated transitions; only the reward needs checking.
  InducedMdp(int horizon, int n_states, int n_actions, Vec initial_dist,
             std::shared_ptr<const std::vector<Vec>> transition, std::vector<Vec> reward)
      : horizon_(horizon),
        n_states_(n_states),
        n_actions_(n_actions),
        initial_dist_(std::move(initial_dist)),
        transition_(std::move(transition)),
        reward_(std::move(reward)) {
    require(static_cast<int>(initial_dist_.size()) == n_states_, "InducedMdp: d0 size");
    normalize_prob_row(std::span<double>(initial_dist_.data(), initial_dist_.size()),
                       kProbRowTol, "InducedMdp d0");
    require(static_cast<int>(reward_.size()) == horizon_, "InducedMdp: reward stages");
    for (int h = 0; h < horizon_; ++h)
      require(reward_[h].size() == static_cast<size_t>(n_states_) * n_actions_,
              "InducedMdp: reward size");
  }

  int horizon_, n_states_, n_actions_;
  Vec initial_dist_;
  std::shared_ptr<const std::vector<Vec>> transition_;  // per stage, [s][a][s']
  std::vector<Vec> reward_;                             // per stage, [s][a]
};

// Stage-wise visitation probabilities. `state[h][s]` always holds the state
// marginal; `state_action[h]` is flattened with stride `action_stride`
// (A*B for joint game occupancies, the free player's A for induced MDPs).
struct OccupancyTable {
  std::vector<Vec> state;
  std::vector<Vec> state_action;
  int action_stride = 0;

  double state_prob(int h, int s) const { return state[h][s]; }
};

struct ValueTables {
  std::vector<Vec> v;  // H+1 stages, v[H] == 0
  std::vector<Vec> q;  // per stage, flattened [s][a][b] (or [s][a] for MDPs)
  double initial_value = 0.0;
};

struct BestResponse {
  StagePolicy policy;
  double value = 0.0;
  std::vector<Vec> q;  // per stage, flattened [s][a]
};

// ---------------------------------------------------------------------------
// Dynamic-programming primitives
// ---------------------------------------------------------------------------

// Exact policy evaluation by backward recursion over stages.
inline ValueTables evaluate(const MarkovGame& game, const PolicyPair& pair) {
  pair.check_dims(game);
  const int H = game.horizon(), S = game.n_states(), A = game.n_actions_p1(),
            B = game.n_actions_p2();
  ValueTables out;
  out.v.assign(H + 1, Vec(S, 0.0));
  out.q.assign(H, Vec(static_cast<size_t>(S) * A * B, 0.0));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double vs = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pa = pair.mu.prob(h, s, a);
        for (int b = 0; b < B; ++b) {
          const double q = game.reward(h, s, a, b) +
                           dot(game.transition_row(h, s, a, b),
                               std::span<const double>(out.v[h + 1]));
          out.q[h][(static_cast<size_t>(s) * A + a) * B + b] = q;
          vs += pa * pair.nu.prob(h, s, b) * q;
        }
      }
      out.v[h][s] = vs;
    }
  }
  out.initial_value = dot(std::span<const double>(game.initial_dist()),
                          std::span<const double>(out.v[0]));
  return out;
}

// Forward stage-occupancy recursion; also fills the joint (s,a,b) table.
inline OccupancyTable occupancy(const MarkovGame& game, const PolicyPair& pair) {
  pair.check_dims(game);
  const int H = game.horizon(), S = game.n_states(), A = game.n_actions_p1(),
            B = game.n_actions_p2();
  OccupancyTable out;
  out.action_stride = A * B;
  out.state.assign(H, Vec(S, 0.0));
  out.state_action.assign(H, Vec(static_cast<size_t>(S) * A * B, 0.0));
  out.state[0] = game.initial_dist();
  for (int h = 0; h < H; ++h) {
    Vec next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      const double ds = out.state[h][s];
      if (ds == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double pa = pair.mu.prob(h, s, a);
        if (pa == 0.0) continue;
        for (int b = 0; b < B; ++b) {
          const double w = ds * pa * pair.nu.prob(h, s, b);
          if (w == 0.0) continue;
          out.state_action[h][(static_cast<size_t>(s) * A + a) * B + b] = w;
          auto row = game.transition_row(h, s, a, b);
          for (int sp = 0; sp < S; ++sp) next[sp] += w * row[sp];
        }
      }
    }
    if (h + 1 < H) out.state[h + 1] = std::move(next);
  }
  return out;
}

// Marginalizes the fixed player's policy into the transitions. The supplied
// reward table (per stage, flattened [s][free_action]) is attached unchanged.
inline InducedMdp induce_mdp(const GameDynamics& game, Player fixed_player,
                             const StagePolicy& policy, std::vector<Vec> reward) {
  const int H = game.horizon(), S = game.n_states();
  const int n_free = game.n_actions(other(fixed_player));
  require(policy.horizon() == H && policy.n_states() == S &&
              policy.n_actions() == game.n_actions(fixed_player),
          "induce_mdp: fixed policy dimension mismatch");
  require(static_cast<int>(reward.size()) == H, "induce_mdp: reward stage mismatch");
  for (auto& stage : reward)
    require(stage.size() == static_cast<size_t>(S) * n_free, "induce_mdp: reward size mismatch");

  std::vector<Vec> transition(H, Vec(static_cast<size_t>(S) * n_free * S, 0.0));
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      auto fixed_row = policy.row(h, s);
      for (int f = 0; f < n_free; ++f) {
        double* dst = transition[h].data() + (static_cast<size_t>(s) * n_free + f) * S;
        for (int x = 0; x < static_cast<int>(fixed_row.size()); ++x) {
          const double w = fixed_row[x];
          if (w == 0.0) continue;
          auto row = fixed_player == Player::two ? game.transition_row(h, s, f, x)
                                                 : game.transition_row(h, s, x, f);
          for (int sp = 0; sp < S; ++sp) dst[sp] += w * row[sp];
        }
      }
    }
  }
  return InducedMdp(H, S, n_free, game.initial_dist(), std::move(transition), std::move(reward));
}

inline InducedMdp induce_mdp(const MarkovGame& game, Player fixed_player,
                             const StagePolicy& policy, std::vector<Vec> reward) {
  return induce_mdp(GameDynamics(game), fixed_player, policy, std::move(reward));
}

// Game payoff marginalized over the fixed player, as seen by the free player.
// Player 1 keeps the sign; when player 1 is fixed the free player 2 minimizes,
// so callers typically negate for best-response computations.
inline std::vector<Vec> induced_reward(const MarkovGame& game, Player fixed_player,
                                       const StagePolicy& policy) {
  const int H = game.horizon(), S = game.n_states();
  const int n_free = game.n_actions(other(fixed_player));
  std::vector<Vec> reward(H, Vec(static_cast<size_t>(S) * n_free, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      auto fixed_row = policy.row(h, s);
      for (int f = 0; f < n_free; ++f) {
        double r = 0.0;
        for (int x = 0; x < static_cast<int>(fixed_row.size()); ++x)
          r += fixed_row[x] * (fixed_player == Player::two ? game.reward(h, s, f, x)
                                                           : game.reward(h, s, x, f));
        reward[h][static_cast<size_t>(s) * n_free + f] = r;
      }
    }
  return reward;
}

inline std::vector<Vec> negated(std::vector<Vec> reward) {
  for (auto& stage : reward)
    for (double& v : stage) v = -v;
  return reward;
}

// Deterministic optimal policy by backward induction; argmax ties break to
// the lowest action index so results are reproducible.
inline BestResponse best_response(const InducedMdp& mdp) {
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  BestResponse out;
  out.q.assign(H, Vec(static_cast<size_t>(S) * A, 0.0));
  Vec v_next(S, 0.0), v_cur(S, 0.0);
  std::vector<Vec> policy(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      int best = 0;
      double best_q = -kInf;
      for (int a = 0; a < A; ++a) {
        const double q = mdp.reward(h, s, a) +
                         dot(mdp.transition_row(h, s, a), std::span<const double>(v_next));
        out.q[h][static_cast<size_t>(s) * A + a] = q;
        if (q > best_q) {
          best_q = q;
          best = a;
        }
      }
      policy[h][static_cast<size_t>(s) * A + best] = 1.0;
      v_cur[s] = best_q;
    }
    v_next = v_cur;
  }
  out.policy = StagePolicy(H, S, A, std::move(policy));
  out.value = dot(std::span<const double>(mdp.initial_dist()), std::span<const double>(v_next));
  return out;
}

inline double evaluate_mdp_value(const InducedMdp& mdp, const StagePolicy& policy) {
  require(policy.horizon() == mdp.horizon() && policy.n_states() == mdp.n_states() &&
              policy.n_actions() == mdp.n_actions(),
          "evaluate_mdp_value: dimension mismatch");
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  Vec v_next(S, 0.0), v_cur(S, 0.0);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double vs = 0.0;
      for (int a = 0; a < A; ++a) {
        const double pa = policy.prob(h, s, a);
        if (pa == 0.0) continue;
        vs += pa * (mdp.reward(h, s, a) +
                    dot(mdp.transition_row(h, s, a), std::span<const double>(v_next)));
      }
      v_cur[s] = vs;
    }
    v_next = v_cur;
  }
  return dot(std::span<const double>(mdp.initial_dist()), std::span<const double>(v_next));
}

inline OccupancyTable occupancy_mdp(const InducedMdp& mdp, const StagePolicy& policy) {
  require(policy.horizon() == mdp.horizon() && policy.n_states() == mdp.n_states() &&
              policy.n_actions() == mdp.n_actions(),
          "occupancy_mdp: dimension mismatch");
  const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
  OccupancyTable out;
  out.action_stride = A;
  out.state.assign(H, Vec(S, 0.0));
  out.state_action.assign(H, Vec(static_cast<size_t>(S) * A, 0.0));
  out.state[0] = mdp.initial_dist();
  for (int h = 0; h < H; ++h) {
    Vec next(S, 0.0);
    for (int s = 0; s < S; ++s) {
      const double ds = out.state[h][s];
      if (ds == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double w = ds * policy.prob(h, s, a);
        if (w == 0.0) continue;
        out.state_action[h][static_cast<size_t>(s) * A + a] = w;
        auto row = mdp.transition_row(h, s, a);
        for (int sp = 0; sp < S; ++sp) next[sp] += w * row[sp];
      }
    }
    if (h + 1 < H) out.state[h + 1] = std::move(next);
  }
  return out;
}

// Indicator reward paying 1 exactly when the process is at `target_state` at
// stage `target_stage`, so the optimal value equals the best reaching
// probability.
inline std::vector<Vec> indicator_reward(int horizon, int n_states, int n_actions,
                                         int target_state, int target_stage) {
  std::vector<Vec> reward(horizon, Vec(static_cast<size_t>(n_states) * n_actions, 0.0));
  for (int a = 0; a < n_actions; ++a)
    reward[target_stage][static_cast<size_t>(target_state) * n_actions + a] = 1.0;
  return reward;
}

struct MaxVisitation {
  double prob = 0.0;
  StagePolicy policy;
};

// max over policies of the probability of being at (target_state, target_stage).
inline MaxVisitation max_visitation(const InducedMdp& mdp, int target_state, int target_stage) {
  require(target_stage >= 0 && target_stage < mdp.horizon(), "max_visitation: stage out of range");
  require(target_state >= 0 && target_state < mdp.n_states(), "max_visitation: state out of range");
  auto br = best_response(mdp.with_reward(
      indicator_reward(mdp.horizon(), mdp.n_states(), mdp.n_actions(), target_state, target_stage)));
  return {std::clamp(br.value, 0.0, 1.0), std::move(br.policy)};
}

}  // namespace mailbench
