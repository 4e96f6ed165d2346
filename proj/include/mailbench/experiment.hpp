#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mailbench/analysis.hpp"
#include "mailbench/envs.hpp"
#include "mailbench/mail.hpp"
#include "mailbench/matrix_nash.hpp"
#include "mailbench/plot.hpp"
#include "mailbench/records.hpp"
#include "mailbench/serialize.hpp"

namespace mailbench {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AlgorithmConfig {
  std::string name;  // "bc" | "mail-warm" | "murmail"
  // mail-warm
  int n0 = 25;
  int q_iters = 100;
  double q_epsilon = 0.1;
  std::string backend = "qlearning";
  // murmail
  double eta = 50.0;
  int batch = 100;
  int inner_episodes = 10;
  std::string output = "average";
};

struct ExperimentConfig {
  std::string experiment;  // lowerbound-bc | gridworld-compare | coverage-audit | formula-suite
  int n_seeds = 10;
  uint64_t master_seed = 0;
  std::vector<uint64_t> checkpoints;
  std::vector<AlgorithmConfig> algorithms;
  std::string out_dir = ".";
  int n_workers = 0;  // 0 = hardware concurrency
  // environment knobs
  Vec rho_s3_values = {1.0, 0.5, 0.25, 0.0};  // lowerbound-bc
  int gridworld_horizon = 8;                  // gridworld-compare
  double coverage_delta = 0.05;               // coverage-audit
  int coverage_n0 = 50;

  static ExperimentConfig from_json(const json& j);
  json to_json() const;
};

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.experiment = j.at("experiment").get<std::string>();
  cfg.n_seeds = j.value("n_seeds", 10);
  cfg.master_seed = j.value("master_seed", 0ull);
  cfg.out_dir = j.value("out_dir", std::string("."));
  cfg.n_workers = j.value("n_workers", 0);
  if (j.contains("checkpoints"))
    cfg.checkpoints = j.at("checkpoints").get<std::vector<uint64_t>>();
  if (j.contains("env")) {
    const auto& env = j.at("env");
    if (env.contains("rho_s3")) cfg.rho_s3_values = env.at("rho_s3").get<Vec>();
    cfg.gridworld_horizon = env.value("horizon", 8);
    cfg.coverage_delta = env.value("delta", 0.05);
    cfg.coverage_n0 = env.value("n0", 50);
  }
  if (j.contains("algorithms")) {
    for (const auto& a : j.at("algorithms")) {
      AlgorithmConfig ac;
      ac.name = a.at("name").get<std::string>();
      ac.n0 = a.value("n0", ac.n0);
      ac.q_iters = a.value("q_iters", ac.q_iters);
      ac.q_epsilon = a.value("q_epsilon", ac.q_epsilon);
      ac.backend = a.value("backend", ac.backend);
      ac.eta = a.value("eta", ac.eta);
      ac.batch = a.value("batch", ac.batch);
      ac.inner_episodes = a.value("inner_episodes", ac.inner_episodes);
      ac.output = a.value("output", ac.output);
      cfg.algorithms.push_back(std::move(ac));
    }
  }
  require(cfg.n_seeds >= 1, "ExperimentConfig: n_seeds must be >= 1");
  for (size_t i = 1; i < cfg.checkpoints.size(); ++i)
    require(cfg.checkpoints[i] > cfg.checkpoints[i - 1],
            "ExperimentConfig: checkpoints must be strictly increasing");
  return cfg;
}

inline json ExperimentConfig::to_json() const {
  json algos = json::array();
  for (const auto& a : algorithms)
    algos.push_back(json{{"name", a.name},
                         {"n0", a.n0},
                         {"q_iters", a.q_iters},
                         {"q_epsilon", a.q_epsilon},
                         {"backend", a.backend},
                         {"eta", a.eta},
                         {"batch", a.batch},
                         {"inner_episodes", a.inner_episodes},
                         {"output", a.output}});
  return json{{"experiment", experiment}, {"n_seeds", n_seeds},
              {"master_seed", master_seed}, {"checkpoints", checkpoints},
              {"algorithms", std::move(algos)},
              {"env",
               json{{"rho_s3", rho_s3_values},
                    {"horizon", gridworld_horizon},
                    {"delta", coverage_delta},
                    {"n0", coverage_n0}}}};
}

struct ExperimentOutput {
  std::vector<ExperimentRecord> records;
  json summary;
  std::vector<std::pair<std::string, std::string>> artifacts;  // extra files (name, bytes)
  bool passed = true;  // only meaningful for audit/formula experiments
};

namespace detail {

inline uint64_t hash_string(const std::string& s) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t task_seed(uint64_t master, const std::string& env, const std::string& algorithm,
                          uint64_t seed) {
  return derive_seed(master, {hash_string(env), hash_string(algorithm), seed});
}

// Runs independent tasks on a small pool; results land in pre-assigned slots
// so the merge order never depends on scheduling.
template <typename Task>
void run_parallel(const std::vector<Task>& tasks, int n_workers) {
  if (tasks.empty()) return;
  unsigned n = n_workers > 0 ? static_cast<unsigned>(n_workers)
                             : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(tasks.size()));
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) tasks[i]();
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

inline void append_summary(json& summary, const std::vector<ExperimentRecord>& records) {
  // mean / std of the gap per (env, algorithm, query count), over seeds
  std::map<std::string, std::map<std::string, std::map<uint64_t, Vec>>> grouped;
  for (const auto& r : records) grouped[r.env][r.algorithm][r.expert_queries].push_back(r.nash_gap);
  json curves = json::object();
  for (const auto& [env, algos] : grouped) {
    json env_json = json::object();
    for (const auto& [algo, by_q] : algos) {
      json points = json::array();
      for (const auto& [q, gaps] : by_q) {
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        var /= static_cast<double>(gaps.size());
        points.push_back(json{{"expert_queries", q},
                              {"mean_nash_gap", mean},
                              {"std_nash_gap", std::sqrt(var)},
                              {"n_seeds", gaps.size()}});
      }
      env_json[algo] = std::move(points);
    }
    curves[env] = std::move(env_json);
  }
  summary["curves"] = std::move(curves);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gridworld expert variants
// ---------------------------------------------------------------------------

// Distinct exact equilibria extracted by permuting the action preference
// inside value iteration. Each candidate is certified by nash_gap before use.
inline std::vector<PolicyPair> gridworld_nash_variants(const MarkovGame& game) {
  const std::vector<std::vector<int>> orders = {
      {0, 1, 2, 3}, {3, 2, 1, 0}, {1, 3, 0, 2}, {2, 0, 3, 1}};
  std::vector<PolicyPair> variants;
  for (const auto& oa : orders)
    for (const auto& ob : {orders[0], orders[1]}) {
      ValueIterationOptions opts;
      opts.p1_action_order = oa;
      opts.p2_action_order = ob;
      auto sol = zero_sum_value_iteration(game, opts);
      if (nash_gap(game, sol.pair) > kGapTol) continue;
      bool duplicate = false;
      for (const auto& seen : variants)
        if (seen.mu == sol.pair.mu && seen.nu == sol.pair.nu) duplicate = true;
      if (!duplicate) variants.push_back(std::move(sol.pair));
    }
  require(!variants.empty(), "gridworld_nash_variants: no certified equilibrium found");
  return variants;
}

// Uniform convex combination of the variants; the caller-visible contract is
// that the mixture is itself a certified equilibrium.
inline PolicyPair gridworld_mixed_experts(const MarkovGame& game) {
  auto variants = gridworld_nash_variants(game);
  Vec weights(variants.size(), 1.0 / static_cast<double>(variants.size()));
  auto mixed = mix_equilibria(variants, weights);
  require(nash_gap(game, mixed) <= kGapTol, "gridworld_mixed_experts: mixture is not a NE");
  return mixed;
}

// ---------------------------------------------------------------------------
// Formula suite
// ---------------------------------------------------------------------------

struct FormulaCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FormulaSuiteOptions {
  // Test hook: evaluates the closed-form equilibrium at -delta to prove the
  // suite can fail. Never set outside tests.
  bool flip_delta_sign = false;
};

inline std::vector<FormulaCheck> formula_suite(const FormulaSuiteOptions& opts = {}) {
  std::vector<FormulaCheck> checks;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  };

  // Equilibrium closed form vs the matrix-game solver.
  for (double delta : {0.0, 0.2, 1.0, 2.0}) {
    const double used = opts.flip_delta_sign ? -delta : delta;
    const double p = 1.0 / (2.0 + used / 2.0);
    const double v = (used / 2.0) / (2.0 + used / 2.0);
    auto sol = solve_matrix_game(MatrixGame{2, 2, {1.0 + delta, -1.0, -1.0, 1.0}});
    const double err = std::max(std::abs(sol.row_strategy[0] - p), std::abs(sol.value - v));
    add("perturbed_mp_nash delta=" + format_double(delta, "%.3g"), err <= 1e-9,
        "max error " + format_double(err, "%.3e"));
  }

  // Simplified hard-state payoff has a pure equilibrium of value 1.
  {
    auto sol = solve_matrix_game(MatrixGame{2, 2, {1.0, 1.0, 0.0, -12.0}});
    add("simplified_payoff_pure_nash",
        std::abs(sol.value - 1.0) <= 1e-9 && std::abs(sol.row_strategy[0] - 1.0) <= 1e-9,
        "value " + format_double(sol.value));
  }

  // Interpolating-strategy exploitability forms vs the DP route.
  {
    double worst = 0.0;
    for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9})
      for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double q = interpolating_strategy(eps, beta);
        worst = std::max(worst, std::abs(g1_exploitability_nu(eps, beta) -
                                         exploitability_nu_closed_form(2.0 * eps, q)));
        worst = std::max(worst, std::abs(g2_exploitability_nu(eps, beta) -
                                         exploitability_nu_closed_form(eps, q)));
      }
    add("exploitability_beta_forms", worst <= 1e-9, "max error " + format_double(worst, "%.3e"));
  }
  {
    bool ok = true;
    for (double delta : {0.0, 0.4, 1.2}) {
      const double q = perturbed_mp_nash(delta).first;
      ok = ok && std::abs(exploitability_nu_closed_form(delta, q)) <= 1e-12 &&
           std::abs(exploitability_mu_closed_form(delta, q)) <= 1e-12;
    }
    add("exploitability_zero_at_nash", ok, "");
  }
  {
    // Full gap of an interpolating pair equals the sum of both closed forms.
    double worst = 0.0;
    for (double eps : {0.1, 0.5, 0.9})
      for (double w : {0.0, 0.5, 1.0}) {
        const double delta = 2.0 * eps;
        const double p = interpolating_strategy(eps, w);
        const double q = interpolating_strategy(eps, 1.0 - w);
        std::vector<Vec> t(1, Vec(4, 1.0));
        std::vector<Vec> r(1, Vec{1.0 + delta, -1.0, -1.0, 1.0});
        MarkovGame game(1, 1, 2, 2, Vec{1.0}, std::move(t), std::move(r), 1.0 + delta);
        PolicyPair pair{StagePolicy(1, 1, 2, {Vec{p, 1.0 - p}}),
                        StagePolicy(1, 1, 2, {Vec{q, 1.0 - q}})};
        const double expected = exploitability_nu_closed_form(delta, q) +
                                exploitability_mu_closed_form(delta, p);
        worst = std::max(worst, std::abs(nash_gap(game, pair) - expected));
      }
    add("gap_equals_exploitability_sum", worst <= 1e-9,
        "max error " + format_double(worst, "%.3e"));
  }

  // Divergence bounds on the 99-point grid.
  {
    bool sandwich = true, dominates = true;
    for (int i = 1; i <= 99; ++i) {
      const double eps = i / 100.0;
      const double bound = chi2_nash_means_bound(eps);
      sandwich = sandwich && bound >= 9.0 * eps * eps / 300.0 - 1e-15 &&
                 bound <= 16.0 * eps * eps / 128.0 + 1e-15;
      auto [r, s] = nash_means(eps);
      dominates = dominates && kl_bernoulli(r, s) <= bound + 1e-15 &&
                  chi2_bernoulli(r, s) <= bound + 1e-15;
    }
    add("chi2_bound_sandwich", sandwich, "9eps^2/300 <= bound <= 16eps^2/128");
    add("divergences_below_bound", dominates, "kl and chi2 below the closed-form bound");
  }
  {
    Rng rng(12);
    bool ok = true;
    for (int i = 0; i < 2'000; ++i) {
      const double r = rng.uniform(0.01, 0.99);
      const double s = rng.uniform(0.01, 0.99);
      ok = ok && kl_bernoulli(r, s) <= chi2_bernoulli(r, s) + 1e-12;
    }
    add("kl_below_chi2", ok, "2000 random Bernoulli pairs");
  }

  // Strategy class lemma.
  {
    bool ok = true;
    for (double eps : {0.1, 0.5, 0.9}) {
      auto m = strategy_class_minimizer(eps);
      double best_q = 0.0, best_val = kInf;
      const int n = 1'000'000;
      for (int i = 0; i <= n; ++i) {
        const double q = static_cast<double>(i) / n;
        const double val = strategy_class_objective(eps, q);
        if (val < best_val) {
          best_val = val;
          best_q = q;
        }
      }
      ok = ok && std::abs(best_q - m.q_star) <= 1e-5;
    }
    add("qstar_grid_search", ok, "1e-6 resolution grid");
  }
  {
    bool ok = true;
    for (int i = 1; i <= 99; ++i) {
      const double eps = i / 100.0;
      auto m = strategy_class_minimizer(eps);
      ok = ok && std::abs(interpolating_strategy(eps, m.beta_star) - m.q_star) <= 1e-12 &&
           m.beta_star > 0.5 && m.beta_star < 1.0;
    }
    add("betastar_reproduces_qstar", ok, "and beta* in (1/2, 1)");
  }
  {
    bool convex = true;
    for (double eps : {0.2, 0.6}) {
      const int n = 10'000;
      double prev = strategy_class_objective(eps, 0.0);
      double cur = strategy_class_objective(eps, 1.0 / n);
      for (int i = 2; i <= n && convex; ++i) {
        const double next = strategy_class_objective(eps, static_cast<double>(i) / n);
        convex = next - 2.0 * cur + prev >= -1e-12;
        prev = cur;
        cur = next;
      }
    }
    add("objective_convexity", convex, "second differences nonnegative");
  }

  // Lower-bound game value and concentrability spot checks.
  {
    auto env = make_lower_bound_game(1.0, 0.25);
    auto sol = zero_sum_value_iteration(env.game);
    add("lower_bound_game_value_zero", std::abs(sol.nash_value) <= 1e-9,
        "value " + format_double(sol.nash_value, "%.3e"));
    auto report = concentrability(env.game, env.experts, env.rho);
    add("lower_bound_concentrability",
        std::abs(report.c_expert - 1.0 / 0.75) <= 1e-9 &&
            std::abs(report.c_deviation - 4.0) <= 1e-9,
        "c_expert " + format_ratio(report.c_expert) + ", c_deviation " +
            format_ratio(report.c_deviation));
  }
  return checks;
}

inline std::string formula_report(const std::vector<FormulaCheck>& checks) {
  std::string out;
  size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  for (const auto& c : checks) {
    out += (c.pass ? "PASS  " : "FAIL  ") + c.name;
    out.append(width - c.name.size() + 2, ' ');
    out += c.detail + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

namespace detail {

struct TrainedCheckpoint {
  uint64_t expert_queries = 0;
  PolicyPair pair;
};

// Non-interactive behavior cloning over nested dataset prefixes. Budgets are
// total expert action draws across both players.
inline std::vector<TrainedCheckpoint> bc_checkpoints(const MarkovGame& game,
                                                     const PolicyPair& experts,
                                                     const std::vector<Vec>* rho,
                                                     const std::vector<uint64_t>& budgets,
                                                     uint64_t seed) {
  const int H = game.horizon();
  const uint64_t per_pass = 2ull * H;  // both experts labeled once per stage
  const int n_max = static_cast<int>(std::max<uint64_t>(1, budgets.back() / per_pass));
  Rng rng(seed);
  TrajectoryDataset data = rho ? collect_from_state_dist(game, *rho, experts, n_max, rng)
                               : collect_trajectories(game, experts, n_max, rng);
  std::vector<TrainedCheckpoint> out;
  for (uint64_t budget : budgets) {
    const uint64_t n = std::min<uint64_t>(n_max, budget / per_pass);
    auto prefix = data.prefix(static_cast<size_t>(n) * H);
    TrainedCheckpoint cp;
    cp.expert_queries = 2ull * n * H;
    cp.pair = PolicyPair{
        bc_fit(prefix, Player::one, H, game.n_states(), game.n_actions_p1()).to_policy(),
        bc_fit(prefix, Player::two, H, game.n_states(), game.n_actions_p2()).to_policy()};
    out.push_back(std::move(cp));
  }
  return out;
}

// Interactive MAIL-WARM sweep: one warm-up per seed, nested exploratory
// prefixes per checkpoint. Budgets cap the imitation-phase queries; the
// warm-up interaction cost is reported separately in the summary.
struct MailWarmSweep {
  std::vector<TrainedCheckpoint> checkpoints;
  uint64_t warmup_queries = 0;
};

inline MailWarmSweep mail_warm_checkpoints(const MarkovGame& game, const PolicyPair& experts,
                                           const AlgorithmConfig& acfg,
                                           const std::vector<uint64_t>& budgets, uint64_t seed) {
  const GameDynamics dyn(game);
  const int H = game.horizon(), S = game.n_states();
  WarmupConfig wcfg;
  wcfg.n0 = acfg.n0;
  wcfg.backend = acfg.backend == "euler" ? WarmupBackend::euler : WarmupBackend::qlearning;
  wcfg.qlearning = QLearningConfig{acfg.q_iters, acfg.q_epsilon};

  MailWarmSweep out;
  wcfg.seed = derive_seed(seed, {0xb, 1});
  auto warm_nu = warmup(dyn, Player::two, experts.nu, wcfg);
  wcfg.seed = derive_seed(seed, {0xa, 1});
  auto warm_mu = warmup(dyn, Player::one, experts.mu, wcfg);
  out.warmup_queries = warm_nu.expert_queries + warm_mu.expert_queries;

  const uint64_t per_traj = 2ull * H;  // one trajectory per player per unit
  const int n_max = static_cast<int>(std::max<uint64_t>(1, budgets.back() / per_traj));
  Rng rng_nu(derive_seed(seed, {0xb, 2}));
  auto data_nu = collect_exploratory(dyn, Player::two, experts.nu, warm_nu.set, n_max, rng_nu);
  Rng rng_mu(derive_seed(seed, {0xa, 2}));
  auto data_mu = collect_exploratory(dyn, Player::one, experts.mu, warm_mu.set, n_max, rng_mu);

  for (uint64_t budget : budgets) {
    const uint64_t n = std::min<uint64_t>(n_max, budget / per_traj);
    auto prefix_nu = data_nu.prefix(static_cast<size_t>(n) * H);
    auto prefix_mu = data_mu.prefix(static_cast<size_t>(n) * H);
    TrainedCheckpoint cp;
    cp.expert_queries = 2ull * n * H;
    cp.pair =
        PolicyPair{bc_fit(prefix_mu, Player::one, H, S, game.n_actions_p1()).to_policy(),
                   bc_fit(prefix_nu, Player::two, H, S, game.n_actions_p2()).to_policy()};
    out.checkpoints.push_back(std::move(cp));
  }
  return out;
}

inline std::vector<TrainedCheckpoint> murmail_checkpoints(const MarkovGame& game,
                                                          const PolicyPair& experts,
                                                          const AlgorithmConfig& acfg,
                                                          const std::vector<uint64_t>& budgets,
                                                          uint64_t seed) {
  const uint64_t per_iteration = 2ull * acfg.batch * 3;  // default estimator: 3 draws/element
  std::vector<TrainedCheckpoint> out;
  for (uint64_t budget : budgets) {
    MurmailConfig mcfg;
    mcfg.iterations = static_cast<int>(std::max<uint64_t>(1, budget / per_iteration));
    mcfg.learning_rate = acfg.eta;
    mcfg.batch_size = acfg.batch;
    mcfg.inner_episodes = acfg.inner_episodes;
    mcfg.output = acfg.output == "last" ? MurmailOutput::last_iterate
                  : acfg.output == "uniform" ? MurmailOutput::uniform_iterate
                                             : MurmailOutput::average;
    mcfg.seed = seed;
    auto result = murmail(game, experts, mcfg);
    out.push_back({result.ledger.total(), result.pair});
  }
  return out;
}

}  // namespace detail

inline ExperimentOutput run_lowerbound_bc(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  std::vector<uint64_t> budgets = cfg.checkpoints;
  if (budgets.empty()) budgets = {4, 8, 16, 32, 64, 128, 256, 512};

  struct Task {
    std::string env;
    double rho_s3;
    uint64_t seed;
  };
  std::vector<Task> tasks;
  for (double rho3 : cfg.rho_s3_values)
    for (int seed = 0; seed < cfg.n_seeds; ++seed)
      tasks.push_back({"lowerbound-rho" + format_double(rho3, "%g"), rho3,
                       static_cast<uint64_t>(seed)});

  std::vector<std::vector<ExperimentRecord>> results(tasks.size());
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < tasks.size(); ++i)
    jobs.emplace_back([&, i] {
      const Task& t = tasks[i];
      auto env = make_lower_bound_simplified(t.rho_s3);
      auto cps = detail::bc_checkpoints(env.game, env.experts, &env.rho, budgets,
                                        detail::task_seed(cfg.master_seed, t.env, "bc", t.seed));
      for (const auto& cp : cps)
        results[i].push_back(
            {t.env, "bc", t.seed, cp.expert_queries, nash_gap(env.game, cp.pair), 0});
    });
  detail::run_parallel(jobs, cfg.n_workers);
  for (auto& r : results) out.records.insert(out.records.end(), r.begin(), r.end());
  detail::append_summary(out.summary, out.records);
  return out;
}

inline ExperimentOutput run_gridworld_compare(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  std::vector<uint64_t> budgets = cfg.checkpoints;
  if (budgets.empty()) budgets = {2'000, 8'000, 32'000, 80'000, 160'000};
  std::vector<AlgorithmConfig> algorithms = cfg.algorithms;
  if (algorithms.empty()) {
    AlgorithmConfig bc;
    bc.name = "bc";
    AlgorithmConfig mw;
    mw.name = "mail-warm";
    AlgorithmConfig mm;
    mm.name = "murmail";
    algorithms = {bc, mw, mm};
  }

  auto gw = make_gridworld({cfg.gridworld_horizon, {1, 0}, {2, 1}});
  const auto pure_experts = zero_sum_value_iteration(gw.game).pair;
  const auto mixed_experts = gridworld_mixed_experts(gw.game);

  struct Task {
    std::string env;
    const PolicyPair* experts;
    AlgorithmConfig algo;
    uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& [env, experts] :
       std::vector<std::pair<std::string, const PolicyPair*>>{{"gridworld1", &pure_experts},
                                                              {"gridworld2", &mixed_experts}})
    for (const auto& algo : algorithms)
      for (int seed = 0; seed < cfg.n_seeds; ++seed)
        tasks.push_back({env, experts, algo, static_cast<uint64_t>(seed)});

  std::vector<std::vector<ExperimentRecord>> results(tasks.size());
  std::mutex summary_mutex;
  json warmup_costs = json::object();
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < tasks.size(); ++i)
    jobs.emplace_back([&, i] {
      const Task& t = tasks[i];
      const uint64_t seed = detail::task_seed(cfg.master_seed, t.env, t.algo.name, t.seed);
      const auto started = std::chrono::steady_clock::now();
      std::vector<detail::TrainedCheckpoint> cps;
      if (t.algo.name == "bc") {
        cps = detail::bc_checkpoints(gw.game, *t.experts, nullptr, budgets, seed);
      } else if (t.algo.name == "mail-warm") {
        auto sweep = detail::mail_warm_checkpoints(gw.game, *t.experts, t.algo, budgets, seed);
        cps = std::move(sweep.checkpoints);
        std::scoped_lock lock(summary_mutex);
        warmup_costs[t.env + "/" + t.algo.name + "/seed" + std::to_string(t.seed)] =
            sweep.warmup_queries;
      } else if (t.algo.name == "murmail") {
        cps = detail::murmail_checkpoints(gw.game, *t.experts, t.algo, budgets, seed);
      } else {
        throw std::invalid_argument("unknown algorithm: " + t.algo.name);
      }
      for (const auto& cp : cps)
        results[i].push_back(
            {t.env, t.algo.name, t.seed, cp.expert_queries, nash_gap(gw.game, cp.pair), 0});
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
      std::scoped_lock lock(summary_mutex);
      std::cerr << "[gridworld-compare] " << t.env << " " << t.algo.name << " seed " << t.seed
                << " done in " << ms << " ms\n";
    });
  detail::run_parallel(jobs, cfg.n_workers);
  for (auto& r : results) out.records.insert(out.records.end(), r.begin(), r.end());
  detail::append_summary(out.summary, out.records);
  out.summary["warmup_expert_queries"] = std::move(warmup_costs);
  return out;
}

inline ExperimentOutput run_coverage_audit(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  struct Env {
    std::string name;
    MarkovGame game;
    PolicyPair experts;
  };
  std::vector<Env> envs;
  {
    auto lb = make_lower_bound_game(1.0, 0.5);
    envs.push_back({"lowerbound", lb.game, lb.experts});
    auto rnd = make_random_game(4, 2, 2, 3, derive_seed(cfg.master_seed, {0x4d47ULL}));
    envs.push_back({"random4", rnd, zero_sum_value_iteration(rnd).pair});
  }

  bool all_ok = true;
  json env_summaries = json::object();
  for (const auto& env : envs) {
    const GameDynamics dyn(env.game);
    std::string csv = "side,s,h,max_visitation,min_p,ratio,bound,ok\n";
    json env_summary = json::object();
    for (Player fixed : {Player::two, Player::one}) {
      const StagePolicy& expert = fixed == Player::two ? env.experts.nu : env.experts.mu;
      const int n_free = dyn.n_actions(other(fixed));
      const double bound = 2.0 * dyn.n_states() * n_free * dyn.horizon();
      WarmupConfig wcfg;
      wcfg.n0 = cfg.coverage_n0;
      wcfg.seed = detail::task_seed(cfg.master_seed, env.name, "coverage",
                                    fixed == Player::two ? 0 : 1);
      auto warm = warmup(dyn, fixed, expert, wcfg);
      auto mix = mixture_distribution(dyn, fixed, expert, warm.set);
      std::vector<Vec> zero_r(dyn.horizon(),
                              Vec(static_cast<size_t>(dyn.n_states()) * n_free, 0.0));
      auto base = induce_mdp(dyn, fixed, expert, zero_r);
      double worst_ratio = 0.0;
      bool side_ok = true;
      for (auto [s, h] : significant_states(dyn, fixed, expert, cfg.coverage_delta)) {
        const double reach = max_visitation(base, s, h).prob;
        double min_p = kInf;
        for (int a = 0; a < n_free; ++a) min_p = std::min(min_p, mix.at(h, s, a));
        const double ratio = min_p > 0.0 ? reach / min_p : kInf;
        worst_ratio = std::max(worst_ratio, ratio);
        const bool ok = ratio <= bound;
        side_ok = side_ok && ok;
        csv += std::string(fixed == Player::two ? "fix_nu" : "fix_mu") + ',' +
               std::to_string(s) + ',' + std::to_string(h) + ',' + format_double(reach) + ',' +
               format_ratio(min_p) + ',' + format_ratio(ratio) + ',' + format_double(bound) +
               ',' + (ok ? "1" : "0") + '\n';
      }
      env_summary[fixed == Player::two ? "fix_nu" : "fix_mu"] =
          json{{"worst_ratio", std::isinf(worst_ratio) ? json("inf") : json(worst_ratio)},
               {"bound", bound},
               {"ok", side_ok}};
      all_ok = all_ok && side_ok;
    }
    out.artifacts.emplace_back("coverage_" + env.name + ".csv", csv);
    env_summaries[env.name] = std::move(env_summary);
  }
  out.summary["coverage"] = std::move(env_summaries);
  out.summary["pass"] = all_ok;
  out.passed = all_ok;
  return out;
}

inline ExperimentOutput run_formula_suite(const ExperimentConfig&) {
  ExperimentOutput out;
  auto checks = formula_suite();
  bool all = true;
  json rows = json::array();
  for (const auto& c : checks) {
    all = all && c.pass;
    rows.push_back(json{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  out.summary["checks"] = std::move(rows);
  out.summary["pass"] = all;
  out.passed = all;
  out.artifacts.emplace_back("formulas.txt", formula_report(checks));
  return out;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  if (cfg.experiment == "lowerbound-bc")
    out = run_lowerbound_bc(cfg);
  else if (cfg.experiment == "gridworld-compare")
    out = run_gridworld_compare(cfg);
  else if (cfg.experiment == "coverage-audit")
    out = run_coverage_audit(cfg);
  else if (cfg.experiment == "formula-suite")
    out = run_formula_suite(cfg);
  else
    throw std::invalid_argument("unknown experiment id: " + cfg.experiment);
  out.summary["experiment"] = cfg.experiment;
  out.summary["master_seed"] = cfg.master_seed;
  out.summary["n_seeds"] = cfg.n_seeds;
  return out;
}

inline void write_experiment_output(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "records.csv").string(), records_to_csv(out.records));
  write_file((fs::path(cfg.out_dir) / "summary.json").string(), out.summary.dump(2) + "\n");
  for (const auto& [name, content] : out.artifacts)
    write_file((fs::path(cfg.out_dir) / name).string(), content);
}

}  // namespace mailbench
