// Command-line experiment harness: seeded runs, CSV/plot emission, the
// closed-form check suite, and concentrability audits of game files.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mailbench/mailbench.hpp"

namespace fs = std::filesystem;
using namespace mailbench;

namespace {

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir,
            const std::optional<uint64_t>& seed, const std::optional<int>& n_seeds,
            const std::vector<uint64_t>& checkpoints) {
  ExperimentConfig cfg = ExperimentConfig::from_json(read_json_file(config_path));
  if (out_dir) cfg.out_dir = *out_dir;
  if (seed) cfg.master_seed = *seed;
  if (n_seeds) cfg.n_seeds = *n_seeds;
  if (!checkpoints.empty()) cfg.checkpoints = checkpoints;

  auto output = run_experiment(cfg);
  write_experiment_output(cfg, output);
  std::cerr << "wrote " << (fs::path(cfg.out_dir) / "records.csv").string() << " ("
            << output.records.size() << " records)\n";
  for (const auto& [name, content] : output.artifacts)
    std::cerr << "wrote " << (fs::path(cfg.out_dir) / name).string() << "\n";
  return output.passed ? 0 : 1;
}

int cmd_plot(const std::string& csv_path, const std::string& out_path) {
  auto records = records_from_csv(read_file(csv_path));
  if (records.empty()) std::cerr << "warning: no records in " << csv_path << "\n";
  auto plots = render_plots(records);
  if (plots.size() == 1) {
    write_file(out_path, plots[0].second);
    std::cerr << "wrote " << out_path << "\n";
    return 0;
  }
  const fs::path base(out_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  for (const auto& [env, svg] : plots) {
    const std::string path = stem + "_" + env + base.extension().string();
    write_file(path, svg);
    std::cerr << "wrote " << path << "\n";
  }
  return 0;
}

int cmd_formulas() {
  auto checks = formula_suite();
  std::cout << formula_report(checks);
  bool all = true;
  for (const auto& c : checks) all = all && c.pass;
  std::cout << (all ? "all checks passed" : "FAILURES present") << " (" << checks.size()
            << " checks)\n";
  return all ? 0 : 1;
}

int cmd_audit(const std::string& game_path, const std::string& experts_path,
              const std::string& rho_path, const std::optional<std::string>& out_dir) {
  auto game = game_from_json(read_json_file(game_path));
  auto experts = pair_from_json(read_json_file(experts_path));
  auto rho = state_dist_from_json(read_json_file(rho_path));
  auto report = concentrability(game, experts, rho);
  std::cout << concentrability_to_json(report).dump(2) << "\n";
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file((fs::path(*out_dir) / "concentrability.json").string(),
               concentrability_to_json(report).dump(2) + "\n");
    write_file((fs::path(*out_dir) / "concentrability.csv").string(),
               concentrability_to_csv(report));
    std::cerr << "wrote concentrability report to " << *out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular zero-sum Markov game imitation-learning benchmark"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
  std::optional<int> n_seeds;
  std::vector<uint64_t> checkpoints;
  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "experiment config JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--n-seeds", n_seeds, "seed count override");
  run->add_option("--checkpoints", checkpoints, "query-budget checkpoints override");

  // plot
  std::string csv_path, svg_path;
  auto* plot = app.add_subcommand("plot", "render mean/std curves from a records CSV");
  plot->add_option("csv", csv_path, "records CSV path")->required();
  plot->add_option("--out", svg_path, "output SVG path")->required();

  // formulas
  auto* formulas = app.add_subcommand("formulas", "run the closed-form check suite");

  // audit
  std::string game_path, experts_path, rho_path;
  std::optional<std::string> audit_out;
  auto* audit = app.add_subcommand("audit", "concentrability report for a game file");
  audit->add_option("game", game_path, "game JSON")->required();
  audit->add_option("experts", experts_path, "expert policy pair JSON")->required();
  audit->add_option("rho", rho_path, "per-stage state distribution JSON")->required();
  audit->add_option("--out", audit_out, "directory for JSON/CSV report files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, n_seeds, checkpoints);
    if (plot->parsed()) return cmd_plot(csv_path, svg_path);
    if (formulas->parsed()) return cmd_formulas();
    if (audit->parsed()) return cmd_audit(game_path, experts_path, rho_path, audit_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
