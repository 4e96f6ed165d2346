#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mailbench/common.hpp"
#include "mailbench/serialize.hpp"

namespace mailbench {

// One experiment measurement. wall_ms is normalized to 0 in emitted CSV so
// output bytes are a pure function of (config, master seed); real timings go
// to the progress log instead.
struct ExperimentRecord {
  std::string env;
  std::string algorithm;
  uint64_t seed = 0;
  uint64_t expert_queries = 0;
  double nash_gap = 0.0;
  uint64_t wall_ms = 0;
};

inline constexpr const char* kRecordCsvHeader = "env,algorithm,seed,expert_queries,nash_gap,wall_ms";

inline std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::string out = std::string(kRecordCsvHeader) + "\n";
  for (const auto& r : records)
    out += r.env + ',' + r.algorithm + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.expert_queries) + ',' + format_double(r.nash_gap) + ',' +
           std::to_string(r.wall_ms) + '\n';
  return out;
}

inline std::vector<ExperimentRecord> records_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "records_from_csv: empty input");
  require(line == kRecordCsvHeader, "records_from_csv: unexpected header: " + line);
  std::vector<ExperimentRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    ExperimentRecord rec;
    std::string field;
    std::getline(row, rec.env, ',');
    std::getline(row, rec.algorithm, ',');
    std::getline(row, field, ',');
    rec.seed = std::stoull(field);
    std::getline(row, field, ',');
    rec.expert_queries = std::stoull(field);
    std::getline(row, field, ',');
    rec.nash_gap = std::stod(field);
    std::getline(row, field, ',');
    rec.wall_ms = std::stoull(field);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace mailbench
