#include "ngm/benchmark.hpp"

#include <chrono>
#include <cmath>

#include "ngm/error.hpp"
#include "ngm/parallel.hpp"

namespace ngm::sim {

namespace {

constexpr std::uint64_t kDesignTag = 1;
constexpr std::uint64_t kResponseTag = 2;
constexpr std::uint64_t kSelectTag = 3;

std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}

}  // namespace

BenchmarkSummary run_benchmark(const BenchmarkConfig& config) {
  if (config.reps < 1) fail(ErrorKind::configuration, "reps must be >= 1");
  config.design.validate();
  if (config.q <= 0.0 || config.q >= 1.0) fail(ErrorKind::configuration, "q must lie in (0, 1)");

  BenchmarkSummary out;
  out.rows.resize(static_cast<std::size_t>(config.reps));
  std::vector<std::optional<Error>> errors(out.rows.size());

  parallel_for(out.rows.size(), config.threads, [&](std::size_t r) {
    RepetitionRecord& row = out.rows[r];
    row.rep = static_cast<int>(r);
    row.seed = config.seed.derive(static_cast<std::uint64_t>(r));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      DesignSpec design = config.design;
      design.seed = row.seed.derive(kDesignTag);
      Dataset data;
      data.x = sample_design(design);
      data.names = default_names(design.p);
      Response resp = sample_response(data.x, config.model, row.seed.derive(kResponseTag));
      data.y = std::move(resp.y);

      const auto result =
          select::run_method(config.method, data, config.q, config.options, row.seed.derive(kSelectTag));
      row.metrics = evaluate(result.selected, resp.truth, design.p);
      row.threshold = result.threshold;
    } catch (const Error& e) {
      row.error = e.what();
      errors[r] = e;
    }
    row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<double> fdps, powers;
  std::optional<Error> last_error;
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    if (errors[r]) {
      ++out.failed;
      last_error = errors[r];
      continue;
    }
    ++out.completed;
    fdps.push_back(out.rows[r].metrics.fdp);
    powers.push_back(out.rows[r].metrics.power);
  }

  if (out.completed == 0 && last_error) throw *last_error;
  std::tie(out.mean_fdp, out.se_fdp) = mean_se(fdps);
  std::tie(out.mean_power, out.se_power) = mean_se(powers);
  return out;
}

}  // namespace ngm::sim
