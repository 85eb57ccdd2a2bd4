#include "ngm/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "ngm/error.hpp"
#include "ngm/mirror.hpp"
#include "ngm/parallel.hpp"

namespace ngm::select {

namespace {

constexpr std::uint64_t kScreenTag = 0x5c;
constexpr std::uint64_t kMirrorTag = 0x3a;
constexpr std::uint64_t kNetTag = 0x7e;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_level(double q) {
  if (!(q > 0.0 && q < 1.0)) fail(ErrorKind::configuration, "target FDR level q must lie in (0, 1)");
}

VectorXd standardized_response(const VectorXd& y) { return standardize(y); }

// Both halves of a pair are centered on their own means and divided by one
// shared scale, so x_plus and x_minus stay mirror images of each other.
std::pair<VectorXd, VectorXd> scaled_pair(const mirror::MirrorPair& m) {
  VectorXd a = m.x_plus.array() - m.x_plus.mean();
  VectorXd b = m.x_minus.array() - m.x_minus.mean();
  const double n = static_cast<double>(a.size());
  const double s = std::sqrt((a.squaredNorm() + b.squaredNorm()) / (2.0 * n));
  if (s > 0.0) {
    a /= s;
    b /= s;
  }
  return {std::move(a), std::move(b)};
}

nn::NetConfig network_config(const SelectionOptions& options, Eigen::Index features, Eigen::Index rows,
                             const RngSeed& seed) {
  nn::NetConfig cfg = options.net;
  if (cfg.hidden_sizes.empty()) cfg.hidden_sizes = nn::default_hidden_sizes(features);
  cfg.batch_size = static_cast<int>(std::min<Eigen::Index>(cfg.batch_size, rows));
  cfg.seed = seed;
  return cfg;
}

// The design actually handed to a method after dropping constant columns and
// (optionally) screening.
struct Workspace {
  Dataset data;
  IndexSet columns;  // original index of each working column
};

Workspace prepare(const Dataset& data, double q, const SelectionOptions& options, const RngSeed& rng,
                  SelectionResult& result) {
  data.validate();
  check_level(q);
  options.kernel.validate();
  options.net.validate();
  if (data.n() < 3) fail(ErrorKind::invalid_data, "selection needs at least 3 rows");

  const Eigen::Index p = data.p();
  result.q = q;
  result.seed = rng;
  result.features.assign(static_cast<std::size_t>(p), {});
  result.stats.m = VectorXd::Zero(p);
  result.stats.importance_plus = VectorXd::Zero(p);
  result.stats.importance_minus = VectorXd::Zero(p);

  IndexSet active;
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& rec = result.features[static_cast<std::size_t>(j)];
    rec.name = data.names[static_cast<std::size_t>(j)];
    rec.constant = is_constant(data.x.col(j));
    if (!rec.constant) active.push_back(static_cast<int>(j));
  }

  Workspace ws{data.select_columns(active), active};
  if (!options.screen.enabled || active.empty()) return ws;

  const auto t0 = Clock::now();
  const int m_keep = options.screen.m_keep.value_or(
      static_cast<int>(std::min<Eigen::Index>(data.n() / 2, static_cast<Eigen::Index>(active.size()))));
  ScreenResult sr = screen(ws.data, options.net, m_keep, rng.derive(kScreenTag));

  std::vector<char> in_split(static_cast<std::size_t>(data.n()), 0);
  for (int r : sr.split_indices) in_split[static_cast<std::size_t>(r)] = 1;
  IndexSet rows;
  for (Eigen::Index r = 0; r < data.n(); ++r)
    if (!in_split[static_cast<std::size_t>(r)]) rows.push_back(static_cast<int>(r));

  IndexSet kept_cols;
  std::vector<char> kept_flag(active.size(), 0);
  for (int k : sr.kept) {
    kept_cols.push_back(active[static_cast<std::size_t>(k)]);
    kept_flag[static_cast<std::size_t>(k)] = 1;
  }
  for (std::size_t k = 0; k < active.size(); ++k)
    if (!kept_flag[k]) result.features[static_cast<std::size_t>(active[k])].screened_out = true;

  // Report screening in original column indices.
  ScreenResult reported;
  reported.kept = kept_cols;
  reported.importances = VectorXd::Zero(p);
  for (std::size_t k = 0; k < active.size(); ++k) reported.importances(active[k]) = sr.importances(static_cast<Eigen::Index>(k));
  reported.split_indices = sr.split_indices;
  result.screening = std::move(reported);

  ws.data = ws.data.select_columns(sr.kept).select_rows(rows);
  ws.columns = kept_cols;
  result.timing.screen_ms = elapsed_ms(t0);
  return ws;
}

}  // namespace

double mirror_statistic(double l_plus, double l_minus) {
  return std::abs(l_plus + l_minus) - std::abs(l_plus - l_minus);
}

MirrorStats make_stats(const VectorXd& importance_plus, const VectorXd& importance_minus) {
  if (importance_plus.size() != importance_minus.size())
    fail(ErrorKind::invalid_data, "importance vectors differ in length");
  MirrorStats s{VectorXd(importance_plus.size()), importance_plus, importance_minus};
  for (Eigen::Index j = 0; j < s.m.size(); ++j) s.m(j) = mirror_statistic(importance_plus(j), importance_minus(j));
  return s;
}

double estimate_fdp(const VectorXd& m, double t) {
  if (!(t > 0.0)) fail(ErrorKind::domain, "estimate_fdp needs t > 0");
  const auto neg = (m.array() <= -t).count();
  const auto pos = (m.array() >= t).count();
  return static_cast<double>(neg) / static_cast<double>(std::max<Eigen::Index>(pos, 1));
}

std::vector<std::pair<double, double>> fdp_curve(const VectorXd& m) {
  std::set<double> grid;
  for (Eigen::Index j = 0; j < m.size(); ++j)
    if (m(j) != 0.0 && std::isfinite(m(j))) grid.insert(std::abs(m(j)));
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (double t : grid) curve.emplace_back(t, estimate_fdp(m, t));
  return curve;
}

std::optional<double> adaptive_threshold(const VectorXd& m, double q) {
  check_level(q);
  for (const auto& [t, fdp] : fdp_curve(m))
    if (fdp <= q) return t;
  return std::nullopt;
}

IndexSet select_at(const VectorXd& m, std::optional<double> threshold) {
  IndexSet out;
  if (!threshold) return out;
  for (Eigen::Index j = 0; j < m.size(); ++j)
    if (m(j) >= *threshold) out.push_back(static_cast<int>(j));
  return out;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::ingm: return "ingm";
    case Method::sngm: return "sngm";
    case Method::s_ingm: return "s_ingm";
    case Method::s_sngm: return "s_sngm";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "ingm") return Method::ingm;
  if (name == "sngm") return Method::sngm;
  if (name == "s_ingm" || name == "s-ingm") return Method::s_ingm;
  if (name == "s_sngm" || name == "s-sngm") return Method::s_sngm;
  fail(ErrorKind::configuration, "unknown method '" + name + "'");
}

bool uses_screening(Method m) { return m == Method::s_ingm || m == Method::s_sngm; }

ScreenResult screen(const Dataset& data, const nn::NetConfig& config, int m_keep, const RngSeed& rng) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (m_keep < 1 || m_keep > p)
    fail(ErrorKind::configuration,
         "m_keep = " + std::to_string(m_keep) + " must lie in [1, p = " + std::to_string(p) + "]");
  if (n < 6) fail(ErrorKind::invalid_data, "screening needs n >= 6");

  ScreenResult r;
  IndexSet rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  auto engine = rng.engine();
  std::shuffle(rows.begin(), rows.end(), engine);
  r.split_indices.assign(rows.begin(), rows.begin() + n / 3);
  std::sort(r.split_indices.begin(), r.split_indices.end());

  const Dataset part = data.select_rows(r.split_indices);
  SelectionOptions opts;
  opts.net = config;
  const nn::NetConfig cfg = network_config(opts, p, part.n(), rng.derive(kNetTag));
  const nn::TrainedNet net = nn::train(standardize_columns(part.x), standardized_response(part.y), cfg);
  r.importances = nn::path_importance(net).values.cwiseAbs();

  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r.importances(a) > r.importances(b); });
  r.kept.assign(order.begin(), order.begin() + m_keep);
  std::sort(r.kept.begin(), r.kept.end());
  return r;
}

void finalize(SelectionResult& result) {
  result.fdp_curve = fdp_curve(result.stats.m);
  result.threshold = std::nullopt;
  for (const auto& [t, fdp] : result.fdp_curve)
    if (fdp <= result.q) {
      result.threshold = t;
      break;
    }
  result.selected = select_at(result.stats.m, result.threshold);
}

SelectionResult run_sngm(const Dataset& data, double q, const SelectionOptions& options, const RngSeed& rng) {
  const auto t0 = Clock::now();
  SelectionResult result;
  result.method = options.screen.enabled ? Method::s_sngm : Method::sngm;
  Workspace ws = prepare(data, q, options, rng, result);
  const Eigen::Index pw = ws.data.p();

  if (pw > 0) {
    auto t1 = Clock::now();
    mirror::MirrorOptions mo{options.kernel, options.search, options.conditioning, options.threads};
    const auto mirrors = mirror::make_all_mirrors(ws.data, mo, rng.derive(kMirrorTag));
    result.timing.mirror_ms = elapsed_ms(t1);

    MatrixXd inputs(ws.data.n(), 2 * pw);
    for (Eigen::Index j = 0; j < pw; ++j) {
      auto [a, b] = scaled_pair(mirrors[static_cast<std::size_t>(j)]);
      inputs.col(2 * j) = a;
      inputs.col(2 * j + 1) = b;
    }

    t1 = Clock::now();
    const auto cfg = network_config(options, pw, ws.data.n(), rng.derive(kNetTag));
    const nn::TrainedNet net = nn::train(inputs, standardized_response(ws.data.y), cfg);
    const VectorXd l = nn::path_importance(net).values;
    result.timing.train_ms = elapsed_ms(t1);

    for (Eigen::Index j = 0; j < pw; ++j) {
      const int orig = ws.columns[static_cast<std::size_t>(j)];
      result.stats.importance_plus(orig) = l(2 * j);
      result.stats.importance_minus(orig) = l(2 * j + 1);
      result.stats.m(orig) = mirror_statistic(l(2 * j), l(2 * j + 1));
      result.features[static_cast<std::size_t>(orig)].c = mirrors[static_cast<std::size_t>(j)].c;
      result.features[static_cast<std::size_t>(orig)].residualized = mirrors[static_cast<std::size_t>(j)].residualized;
    }
  }
  finalize(result);
  result.timing.total_ms = elapsed_ms(t0);
  return result;
}

SelectionResult run_ingm(const Dataset& data, double q, const SelectionOptions& options, const RngSeed& rng) {
  const auto t0 = Clock::now();
  SelectionResult result;
  result.method = options.screen.enabled ? Method::s_ingm : Method::ingm;
  Workspace ws = prepare(data, q, options, rng, result);
  const Eigen::Index pw = ws.data.p();
  const Eigen::Index n = ws.data.n();
  const VectorXd y = standardized_response(ws.data.y);
  const MatrixXd xs = standardize_columns(ws.data.x);
  const RngSeed mirror_base = rng.derive(kMirrorTag);
  const RngSeed net_base = rng.derive(kNetTag);

  struct Outcome {
    double c = 0, l_plus = 0, l_minus = 0, mirror_ms = 0, train_ms = 0;
    bool residualized = false;
    std::optional<Error> error;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(pw));

  parallel_for(static_cast<std::size_t>(pw), options.threads, [&](std::size_t jj) {
    const auto j = static_cast<Eigen::Index>(jj);
    Outcome& out = outcomes[jj];
    const std::string& name = ws.data.names[jj];
    try {
      auto t1 = Clock::now();
      const auto m = mirror::make_mirror(ws.data, j, options.kernel, mirror::feature_seed(mirror_base, name),
                                         options.search, options.conditioning);
      out.c = m.c;
      out.residualized = m.residualized;
      out.mirror_ms = elapsed_ms(t1);

      t1 = Clock::now();
      MatrixXd inputs(n, pw + 1);
      auto [a, b] = scaled_pair(m);
      inputs.col(0) = a;
      inputs.col(1) = b;
      Eigen::Index k = 2;
      for (Eigen::Index col = 0; col < pw; ++col)
        if (col != j) inputs.col(k++) = xs.col(col);
      const auto cfg = network_config(options, pw, n, net_base.with_stream(stream_for_name(name)));
      const VectorXd l = nn::path_importance(nn::train(inputs, y, cfg)).values;
      out.l_plus = l(0);
      out.l_minus = l(1);
      out.train_ms = elapsed_ms(t1);
    } catch (const Error& e) {
      out.error = Error(e.kind(), "feature " + name + ": " + e.what());
    }
  });

  const Error* first_error = nullptr;
  for (Eigen::Index j = 0; j < pw; ++j) {
    const Outcome& out = outcomes[static_cast<std::size_t>(j)];
    const int orig = ws.columns[static_cast<std::size_t>(j)];
    auto& rec = result.features[static_cast<std::size_t>(orig)];
    result.timing.mirror_ms += out.mirror_ms;
    result.timing.train_ms += out.train_ms;
    if (out.error) {
      rec.failed = true;
      ++result.failed_features;
      if (!first_error) first_error = &*out.error;
      continue;
    }
    rec.c = out.c;
    rec.residualized = out.residualized;
    result.stats.importance_plus(orig) = out.l_plus;
    result.stats.importance_minus(orig) = out.l_minus;
    result.stats.m(orig) = mirror_statistic(out.l_plus, out.l_minus);
  }
  if (first_error && static_cast<double>(result.failed_features) > 0.1 * static_cast<double>(pw))
    fail(first_error->kind(), std::to_string(result.failed_features) + " of " + std::to_string(pw) +
                                  " features failed; first: " + first_error->what());

  finalize(result);
  result.timing.total_ms = elapsed_ms(t0);
  return result;
}

SelectionResult run_method(Method method, const Dataset& data, double q, SelectionOptions options,
                           const RngSeed& rng) {
  if (uses_screening(method)) options.screen.enabled = true;
  else options.screen.enabled = false;
  if (method == Method::ingm || method == Method::s_ingm) return run_ingm(data, q, options, rng);
  return run_sngm(data, q, options, rng);
}

nlohmann::ordered_json to_json(const SelectionResult& result, const nlohmann::ordered_json& kernel_info) {
  using nlohmann::ordered_json;
  std::set<int> selected(result.selected.begin(), result.selected.end());
  ordered_json features = ordered_json::array();
  for (std::size_t j = 0; j < result.features.size(); ++j) {
    const auto& rec = result.features[j];
    const auto jj = static_cast<Eigen::Index>(j);
    features.push_back({{"index", j},
                        {"name", rec.name},
                        {"M", result.stats.m(jj)},
                        {"L_plus", result.stats.importance_plus(jj)},
                        {"L_minus", result.stats.importance_minus(jj)},
                        {"c", rec.c},
                        {"residualized", rec.residualized},
                        {"selected", selected.count(static_cast<int>(j)) > 0},
                        {"screened", rec.screened_out},
                        {"constant", rec.constant},
                        {"failed", rec.failed}});
  }
  ordered_json curve = ordered_json::array();
  for (const auto& [t, f] : result.fdp_curve) curve.push_back({{"t", t}, {"fdp", f}});

  // Conditioning actually used by the mirrors that were built.
  std::set<bool> modes;
  for (const auto& rec : result.features)
    if (!rec.constant && !rec.screened_out && !rec.failed) modes.insert(rec.residualized);
  ordered_json conditioning = nullptr;
  if (modes.size() == 1) conditioning = *modes.begin() ? "residualized" : "standardized";
  else if (modes.size() == 2) conditioning = "mixed";

  ordered_json screen = nullptr;
  if (result.screening)
    screen = {{"kept", result.screening->kept}, {"split_size", result.screening->split_indices.size()}};

  ordered_json out;
  out["method"] = to_string(result.method);
  out["q"] = result.q;
  out["threshold"] = result.threshold ? ordered_json(*result.threshold) : ordered_json(nullptr);
  out["selected"] = result.selected;
  out["num_selected"] = result.selected.size();
  out["failed_features"] = result.failed_features;
  out["seed"] = {{"seed", result.seed.seed}, {"stream", result.seed.stream}};
  out["kernel"] = kernel_info;
  out["conditioning"] = conditioning;
  out["screening"] = screen;
  out["features"] = features;
  out["fdp_curve"] = curve;
  out["timing"] = {{"screen_ms", result.timing.screen_ms},
                   {"mirror_ms", result.timing.mirror_ms},
                   {"train_ms", result.timing.train_ms},
                   {"total_ms", result.timing.total_ms}};
  return out;
}

}  // namespace ngm::select
