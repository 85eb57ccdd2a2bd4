#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ngm/selection.hpp"
#include "ngm/simulate.hpp"

namespace ngm::sim {

struct BenchmarkConfig {
  DesignSpec design;
  ModelSpec model;
  select::Method method = select::Method::sngm;
  double q = 0.2;
  int reps = 20;
  select::SelectionOptions options;
  RngSeed seed;
  // Repetitions run concurrently on this many workers (0 = all cores).
  unsigned threads = 1;
};

struct RepetitionRecord {
  int rep = 0;
  RngSeed seed;
  Metrics metrics;
  std::optional<double> threshold;
  double runtime_ms = 0.0;
  std::optional<std::string> error;
};

struct BenchmarkSummary {
  std::vector<RepetitionRecord> rows;
  int completed = 0;
  int failed = 0;
  double mean_fdp = 0.0;
  double se_fdp = 0.0;
  double mean_power = 0.0;
  double se_power = 0.0;
};

// Repetition r samples a fresh design, support, coefficients and noise from
// seed.derive(r), runs the method and scores it against the truth. A failed
// repetition is recorded and skipped; if every repetition fails the last
// error is rethrown.
BenchmarkSummary run_benchmark(const BenchmarkConfig& config);

}  // namespace ngm::sim
