#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mailbench/analysis.hpp"
#include "mailbench/common.hpp"
#include "mailbench/game.hpp"
#include "mailbench/imitation.hpp"

namespace mailbench {

using json = nlohmann::json;

// Fixed-format float printing: locale-independent and byte-stable, used for
// every CSV and SVG emission.
inline std::string format_double(double v, const char* fmt = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

inline std::string format_ratio(double v) {
  return std::isinf(v) ? "inf" : format_double(v);
}

// ---------------------------------------------------------------------------
// Game files: {"H","S","A","B","r_max","d0","P","R"} with
// P[h][s][a][b][s'] and R[h][s][a][b].
// ---------------------------------------------------------------------------

inline json game_to_json(const MarkovGame& g) {
  const int H = g.horizon(), S = g.n_states(), A = g.n_actions_p1(), B = g.n_actions_p2();
  json p = json::array(), r = json::array();
  for (int h = 0; h < H; ++h) {
    json ph = json::array(), rh = json::array();
    for (int s = 0; s < S; ++s) {
      json ps = json::array(), rs = json::array();
      for (int a = 0; a < A; ++a) {
        json pa = json::array(), ra = json::array();
        for (int b = 0; b < B; ++b) {
          auto row = g.transition_row(h, s, a, b);
          pa.push_back(json(std::vector<double>(row.begin(), row.end())));
          ra.push_back(g.reward(h, s, a, b));
        }
        ps.push_back(std::move(pa));
        rs.push_back(std::move(ra));
      }
      ph.push_back(std::move(ps));
      rh.push_back(std::move(rs));
    }
    p.push_back(std::move(ph));
    r.push_back(std::move(rh));
  }
  return json{{"H", H},          {"S", S},           {"A", A}, {"B", B},
              {"r_max", g.reward_bound()}, {"d0", g.initial_dist()}, {"P", std::move(p)},
              {"R", std::move(r)}};
}

inline MarkovGame game_from_json(const json& j) {
  const int H = j.at("H").get<int>(), S = j.at("S").get<int>();
  const int A = j.at("A").get<int>(), B = j.at("B").get<int>();
  const double r_max = j.value("r_max", 1.0);
  Vec d0 = j.at("d0").get<Vec>();
  const auto& p = j.at("P");
  const auto& r = j.at("R");
  require(static_cast<int>(p.size()) == H && static_cast<int>(r.size()) == H,
          "game_from_json: stage count mismatch");
  std::vector<Vec> transition(H), reward(H);
  for (int h = 0; h < H; ++h) {
    transition[h].reserve(static_cast<size_t>(S) * A * B * S);
    reward[h].reserve(static_cast<size_t>(S) * A * B);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        for (int b = 0; b < B; ++b) {
          const auto& row = p.at(h).at(s).at(a).at(b);
          require(static_cast<int>(row.size()) == S, "game_from_json: transition row size");
          for (const auto& v : row) transition[h].push_back(v.get<double>());
          reward[h].push_back(r.at(h).at(s).at(a).at(b).get<double>());
        }
  }
  return MarkovGame(H, S, A, B, std::move(d0), std::move(transition), std::move(reward), r_max);
}

// ---------------------------------------------------------------------------
// Policies and state distributions
// ---------------------------------------------------------------------------

inline json policy_to_json(const StagePolicy& p) {
  json stages = json::array();
  for (int h = 0; h < p.horizon(); ++h) {
    json states = json::array();
    for (int s = 0; s < p.n_states(); ++s) {
      auto row = p.row(h, s);
      states.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    stages.push_back(std::move(states));
  }
  return stages;
}

inline StagePolicy policy_from_json(const json& j) {
  const int H = static_cast<int>(j.size());
  require(H >= 1, "policy_from_json: empty policy");
  const int S = static_cast<int>(j.at(0).size());
  const int A = static_cast<int>(j.at(0).at(0).size());
  std::vector<Vec> probs(H, Vec(static_cast<size_t>(S) * A, 0.0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        probs[h][static_cast<size_t>(s) * A + a] = j.at(h).at(s).at(a).get<double>();
  return StagePolicy(H, S, A, std::move(probs));
}

inline json pair_to_json(const PolicyPair& pair) {
  return json{{"mu", policy_to_json(pair.mu)}, {"nu", policy_to_json(pair.nu)}};
}

inline PolicyPair pair_from_json(const json& j) {
  return PolicyPair{policy_from_json(j.at("mu")), policy_from_json(j.at("nu"))};
}

inline std::vector<Vec> state_dist_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("rho") : j;
  std::vector<Vec> rho;
  for (const auto& stage : arr) rho.push_back(stage.get<Vec>());
  return rho;
}

// ---------------------------------------------------------------------------
// Datasets: CSV body plus a JSON sidecar with the seed and query counters.
// ---------------------------------------------------------------------------

inline std::string dataset_to_csv(const TrajectoryDataset& d) {
  std::string out = "h,s,a,b\n";
  for (const auto& rec : d.records)
    out += std::to_string(rec.h) + ',' + std::to_string(rec.s) + ',' + std::to_string(rec.a) +
           ',' + std::to_string(rec.b) + '\n';
  return out;
}

inline json dataset_sidecar(const TrajectoryDataset& d) {
  return json{{"seed", d.rng_seed},
              {"queries_p1", d.expert_queries_p1},
              {"queries_p2", d.expert_queries_p2}};
}

inline TrajectoryDataset dataset_from_csv(const std::string& csv, const json& sidecar) {
  TrajectoryDataset out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  require(line == "h,s,a,b", "dataset_from_csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajectoryRecord rec;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d", &rec.h, &rec.s, &rec.a, &rec.b) != 4)
      throw std::invalid_argument("dataset_from_csv: bad row: " + line);
    out.records.push_back(rec);
  }
  out.rng_seed = sidecar.value("seed", 0ull);
  out.expert_queries_p1 = sidecar.value("queries_p1", 0ull);
  out.expert_queries_p2 = sidecar.value("queries_p2", 0ull);
  return out;
}

// ---------------------------------------------------------------------------
// Concentrability reports
// ---------------------------------------------------------------------------

inline json concentrability_to_json(const ConcentrabilityReport& r) {
  auto table = [](const std::vector<Vec>& t) {
    json out = json::array();
    for (const auto& stage : t) {
      json row = json::array();
      for (double v : stage) {
        if (std::isinf(v))
          row.push_back("inf");
        else
          row.push_back(v);
      }
      out.push_back(std::move(row));
    }
    return out;
  };
  json j{{"c_expert", std::isinf(r.c_expert) ? json("inf") : json(r.c_expert)},
         {"c_deviation", std::isinf(r.c_deviation) ? json("inf") : json(r.c_deviation)},
         {"rho", r.rho}};
  j["ratios_p1_deviates"] = table(r.ratios_p1_deviates);
  j["ratios_p2_deviates"] = table(r.ratios_p2_deviates);
  j["ratios_p1_all"] = table(r.ratios_p1_all);
  j["ratios_p2_all"] = table(r.ratios_p2_all);
  return j;
}

// Ratio tables as CSV: one row per (stage, state); infinities print as "inf".
inline std::string concentrability_to_csv(const ConcentrabilityReport& r) {
  std::string out = "h,s,ratio_p1_br,ratio_p2_br,ratio_p1_all,ratio_p2_all,rho\n";
  for (size_t h = 0; h < r.ratios_p1_deviates.size(); ++h)
    for (size_t s = 0; s < r.ratios_p1_deviates[h].size(); ++s)
      out += std::to_string(h) + ',' + std::to_string(s) + ',' +
             format_ratio(r.ratios_p1_deviates[h][s]) + ',' +
             format_ratio(r.ratios_p2_deviates[h][s]) + ',' +
             format_ratio(r.ratios_p1_all[h][s]) + ',' + format_ratio(r.ratios_p2_all[h][s]) +
             ',' + format_double(r.rho[h][s]) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "write_file: cannot open " + path);
  out << content;
  require(out.good(), "write_file: write failed for " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "read_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::string& path) { return json::parse(read_file(path)); }

}  // namespace mailbench
