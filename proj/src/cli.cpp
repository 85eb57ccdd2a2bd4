#include "ngm/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ngm/benchmark.hpp"
#include "ngm/error.hpp"
#include "ngm/parallel.hpp"
#include "ngm/selection.hpp"
#include "ngm/simulate.hpp"

namespace ngm::cli {

using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::configuration, "cannot open '" + path + "' for writing");
  return f;
}

}  // namespace

LoadedCsv parse_csv(std::istream& in, const std::string& response, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::invalid_data, source + ": empty file, expected a header row");
  const std::vector<std::string> header = split(line);

  std::optional<std::size_t> resp;
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == response) resp = k;
  if (!resp && !response.empty() && response.find_first_not_of("0123456789") == std::string::npos) {
    const std::size_t idx = std::stoul(response);
    if (idx < header.size()) resp = idx;
  }
  if (!resp) fail(ErrorKind::configuration, source + ": response column '" + response + "' not found");

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      fail(ErrorKind::invalid_data, source + ": line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " fields, header has " +
                                        std::to_string(header.size()));
    std::vector<double> row(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string& c = cells[k];
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      const std::string where =
          source + ": line " + std::to_string(line_no) + ", column '" + header[k] + "'";
      if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size())
        fail(ErrorKind::invalid_data, where + ": cannot parse '" + c + "' as a number");
      if (!std::isfinite(v)) fail(ErrorKind::invalid_data, where + ": non-finite value '" + c + "'");
      row[k] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::invalid_data, source + ": no data rows");

  LoadedCsv out;
  Dataset& d = out.data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size()) - 1;
  d.x.resize(n, p);
  d.y.resize(n);
  d.response_name = header[*resp];
  for (std::size_t k = 0; k < header.size(); ++k)
    if (k != *resp) d.names.push_back(header[k]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k == *resp) d.y(i) = row[k];
      else d.x(i, j++) = row[k];
    }
  }
  for (Eigen::Index j = 0; j < p; ++j)
    if (is_constant(d.x.col(j)))
      out.warnings.push_back("column '" + d.names[static_cast<std::size_t>(j)] +
                             "' is constant; it receives M = 0 and is never selected");
  return out;
}

LoadedCsv load_csv(const std::string& path, const std::string& response) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::configuration, "cannot open input '" + path + "'");
  return parse_csv(f, response, path);
}

void write_csv(std::ostream& out, const Dataset& data) {
  for (const auto& name : data.names) out << name << ',';
  out << data.response_name << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.p(); ++j) out << format_double(data.x(i, j)) << ',';
    out << format_double(data.y(i)) << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& data) {
  auto f = open_out(path);
  write_csv(f, data);
}

IndexSet load_truth(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::configuration, "cannot open truth file '" + path + "'");
  try {
    const auto j = nlohmann::json::parse(f);
    return j.at("truth").get<IndexSet>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_data, path + ": " + e.what());
  }
}

void write_json(const std::string& path, const ordered_json& doc) {
  auto f = open_out(path);
  f << doc.dump(2) << '\n';
}

namespace {

// Flags shared by every command that trains networks or builds mirrors.
struct MethodFlags {
  std::string method = "sngm";
  double q = 0.1;
  std::string kernel = "linear";
  std::optional<double> bandwidth;
  int degree = 2;
  double offset = 1.0;
  std::string conditioning = "automatic";
  std::vector<int> hidden;
  std::string activation = "tanh";
  int epochs = nn::NetConfig{}.epochs;
  int batch_size = nn::NetConfig{}.batch_size;
  double learning_rate = nn::NetConfig{}.learning_rate;
  double init_scale = 1.0;
  std::optional<int> m_keep;

  void add(CLI::App* app) {
    app->add_option("--method", method, "ingm, sngm, s_ingm or s_sngm")->capture_default_str();
    app->add_option("--q", q, "target FDR level in (0, 1)")->capture_default_str();
    app->add_option("--kernel", kernel, "linear, gaussian or polynomial")->capture_default_str();
    app->add_option("--bandwidth", bandwidth, "Gaussian bandwidth (default: median heuristic)");
    app->add_option("--degree", degree, "polynomial degree")->capture_default_str();
    app->add_option("--offset", offset, "polynomial offset")->capture_default_str();
    app->add_option("--conditioning", conditioning, "standardized, residualized or automatic")
        ->capture_default_str();
    app->add_option("--hidden", hidden, "hidden layer widths (default from p)")->delimiter(',');
    app->add_option("--activation", activation, "tanh, relu or identity")->capture_default_str();
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--lr", learning_rate, "learning rate")->capture_default_str();
    app->add_option("--init-scale", init_scale, "weight init scale")->capture_default_str();
    app->add_option("--m-keep", m_keep, "features kept by screening (default min(n/2, p))");
  }

  select::SelectionOptions options(unsigned threads) const {
    select::SelectionOptions o;
    o.kernel.family = kernel::parse_kernel_family(kernel);
    o.kernel.bandwidth = bandwidth;
    o.kernel.degree = degree;
    o.kernel.offset = offset;
    o.conditioning = mirror::parse_conditioning(conditioning);
    o.net.hidden_sizes = hidden;
    o.net.activation = nn::parse_activation(activation);
    o.net.epochs = epochs;
    o.net.batch_size = batch_size;
    o.net.learning_rate = learning_rate;
    o.net.weight_init_scale = init_scale;
    o.screen.m_keep = m_keep;
    o.threads = threads;
    return o;
  }

  ordered_json to_json() const {
    return {{"method", method},
            {"q", q},
            {"kernel", kernel},
            {"bandwidth", bandwidth ? ordered_json(*bandwidth) : ordered_json(nullptr)},
            {"degree", degree},
            {"offset", offset},
            {"conditioning", conditioning},
            {"hidden", hidden},
            {"activation", activation},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"init_scale", init_scale},
            {"m_keep", m_keep ? ordered_json(*m_keep) : ordered_json(nullptr)}};
  }
};

struct DesignFlags {
  Eigen::Index n = 300;
  Eigen::Index p = 50;
  std::string structure = "toeplitz";
  double rho = 0.5;
  std::string model = "linear";
  std::string link = "f1";
  int k = 10;
  std::optional<double> coef_sd;
  double noise_sd = 1.0;

  void add(CLI::App* app) {
    app->add_option("--n", n, "rows")->capture_default_str();
    app->add_option("--p", p, "features")->capture_default_str();
    app->add_option("--structure", structure, "toeplitz, constant or identity")->capture_default_str();
    app->add_option("--rho", rho, "precision parameter in [0, 1)")->capture_default_str();
    app->add_option("--model", model, "linear or single_index")->capture_default_str();
    app->add_option("--link", link, "f1, f2 or f3 (single_index)")->capture_default_str();
    app->add_option("--k", k, "number of signals")->capture_default_str();
    app->add_option("--coef-sd", coef_sd, "coefficient sd (default 20 sqrt(ln p / n))");
    app->add_option("--noise-sd", noise_sd)->capture_default_str();
  }

  sim::DesignSpec design() const {
    sim::DesignSpec d;
    d.n = n;
    d.p = p;
    d.structure = sim::parse_structure(structure);
    d.rho = rho;
    d.validate();
    return d;
  }

  sim::ModelSpec model_spec() const {
    sim::ModelSpec m;
    m.kind = sim::parse_model_kind(model);
    m.link = sim::parse_link(link);
    m.k_signals = k;
    m.coef_sd = coef_sd;
    m.noise_sd = noise_sd;
    return m;
  }

  ordered_json to_json() const {
    return {{"n", n},
            {"p", p},
            {"structure", structure},
            {"rho", rho},
            {"model", model},
            {"link", link},
            {"k", k},
            {"coef_sd", coef_sd ? ordered_json(*coef_sd) : ordered_json(nullptr)},
            {"noise_sd", noise_sd}};
  }
};

unsigned parse_threads(const std::string& s) {
  if (s == "auto") return resolve_threads(0);
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || v < 1) fail(ErrorKind::configuration, "--threads must be a positive integer or 'auto'");
  return static_cast<unsigned>(v);
}

ordered_json versions() {
  return {{"ngm", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__}};
}

ordered_json seed_json(const RngSeed& s) { return {{"seed", s.seed}, {"stream", s.stream}}; }

ordered_json kernel_json(const select::SelectionOptions& o) {
  return {{"family", kernel::to_string(o.kernel.family)},
          {"bandwidth", o.kernel.bandwidth ? ordered_json(*o.kernel.bandwidth) : ordered_json("median")},
          {"degree", o.kernel.degree},
          {"offset", o.kernel.offset}};
}

void write_manifest(const std::string& output, const std::string& command, ordered_json config,
                    const RngSeed& seed, std::vector<std::string> outputs, double total_ms) {
  ordered_json m;
  m["command"] = command;
  m["config"] = std::move(config);
  m["seed"] = seed_json(seed);
  m["versions"] = versions();
  m["outputs"] = std::move(outputs);
  m["timing"] = {{"total_ms", total_ms}};
  write_json(output + ".manifest.json", m);
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot) + suffix;
  return path + suffix;
}

ordered_json metrics_json(const sim::Metrics& m) {
  return {{"fdp", m.fdp}, {"power", m.power}, {"tpr", m.tpr}, {"fpr", m.fpr}, {"selected_count", m.selected_count}};
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  ordered_json e = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  err << e.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature selection in neural networks with Gaussian mirrors", "ngm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::uint64_t seed = 1;
  std::string threads_str = "1";

  // select
  auto* sel = app.add_subcommand("select", "run a selection method on a CSV dataset");
  std::string sel_input, sel_output, sel_response = "y", sel_truth;
  MethodFlags sel_flags;
  sel->add_option("--input,-i", sel_input, "CSV file with a header row")->required();
  sel->add_option("--output,-o", sel_output, "result JSON path")->required();
  sel->add_option("--response", sel_response, "response column name or 0-based index")->capture_default_str();
  sel->add_option("--truth", sel_truth, "truth JSON from `simulate`; writes a metrics sidecar");
  sel_flags.add(sel);

  // simulate
  auto* simc = app.add_subcommand("simulate", "draw a synthetic dataset with known support");
  std::string sim_output, sim_truth;
  DesignFlags sim_flags;
  simc->add_option("--output,-o", sim_output, "dataset CSV path")->required();
  simc->add_option("--truth-output", sim_truth, "truth JSON path (default <output>.truth.json)");
  sim_flags.add(simc);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "repeat simulate -> select -> evaluate");
  std::string bench_output, bench_summary;
  int reps = 20;
  DesignFlags bench_design;
  MethodFlags bench_flags;
  bench_flags.q = 0.2;
  bench->add_option("--output,-o", bench_output, "per-repetition CSV path")->required();
  bench->add_option("--summary", bench_summary, "summary JSON path (default <output>.summary.json)");
  bench->add_option("--reps", reps)->capture_default_str();
  bench_design.add(bench);
  bench_flags.add(bench);

  // roc
  auto* roc = app.add_subcommand("roc", "ROC points of a selection result against a truth file");
  std::string roc_input, roc_truth, roc_output;
  roc->add_option("--input,-i", roc_input, "result JSON from `select`")->required();
  roc->add_option("--truth", roc_truth, "truth JSON")->required();
  roc->add_option("--output,-o", roc_output, "ROC points CSV path")->required();

  for (auto* sub : {sel, simc, bench, roc}) {
    sub->add_option("--seed", seed, "base random seed")->capture_default_str();
    sub->add_option("--threads", threads_str, "worker threads or 'auto'")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    error_record(err, "usage", e.what(), 2);
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const unsigned threads = parse_threads(threads_str);
    const RngSeed base{seed, 0};

    if (sel->parsed()) {
      const auto opts = sel_flags.options(threads);
      auto loaded = load_csv(sel_input, sel_response);
      for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
      const auto result = select::run_method(select::parse_method(sel_flags.method), loaded.data, sel_flags.q, opts, base);
      write_json(sel_output, select::to_json(result, kernel_json(opts)));
      std::vector<std::string> outputs{sel_output};
      if (!sel_truth.empty()) {
        const IndexSet truth = load_truth(sel_truth);
        const auto m = sim::evaluate(result.selected, truth, loaded.data.p());
        const std::string side = with_suffix(sel_output, ".metrics.json");
        ordered_json doc = metrics_json(m);
        doc["selected"] = result.selected;
        doc["truth"] = truth;
        write_json(side, doc);
        outputs.push_back(side);
      }
      ordered_json cfg = {{"input", sel_input}, {"response", sel_response}, {"truth", sel_truth}};
      cfg.update(sel_flags.to_json());
      cfg["threads"] = threads;
      write_manifest(sel_output, "select", cfg, base, outputs, ms_since(t0));
      out << "selected " << result.selected.size() << " of " << loaded.data.p() << " features";
      if (result.threshold) out << " (threshold " << *result.threshold << ")";
      out << '\n';
      return 0;
    }

    if (simc->parsed()) {
      auto design = sim_flags.design();
      design.seed = base.derive(1);
      Dataset d;
      d.x = sim::sample_design(design);
      d.names = default_names(design.p);
      const auto resp = sim::sample_response(d.x, sim_flags.model_spec(), base.derive(2));
      d.y = resp.y;
      write_csv(sim_output, d);
      const std::string truth_path = sim_truth.empty() ? with_suffix(sim_output, ".truth.json") : sim_truth;
      ordered_json t;
      t["truth"] = resp.truth;
      t["beta"] = std::vector<double>(resp.beta.data(), resp.beta.data() + resp.beta.size());
      t["design"] = sim_flags.to_json();
      t["seed"] = seed_json(base);
      write_json(truth_path, t);
      write_manifest(sim_output, "simulate", sim_flags.to_json(), base, {sim_output, truth_path}, ms_since(t0));
      out << "wrote " << design.n << " x " << design.p << " design with " << resp.truth.size() << " signals\n";
      return 0;
    }

    if (bench->parsed()) {
      sim::BenchmarkConfig cfg;
      cfg.design = bench_design.design();
      cfg.model = bench_design.model_spec();
      cfg.method = select::parse_method(bench_flags.method);
      cfg.q = bench_flags.q;
      cfg.reps = reps;
      cfg.options = bench_flags.options(1);
      cfg.seed = base;
      cfg.threads = threads;
      const auto summary = sim::run_benchmark(cfg);

      {
        auto f = open_out(bench_output);
        f << "rep,seed,stream,fdp,power,tpr,fpr,selected,threshold,runtime_ms,error\n";
        for (const auto& r : summary.rows) {
          f << r.rep << ',' << r.seed.seed << ',' << r.seed.stream << ',' << format_double(r.metrics.fdp) << ','
            << format_double(r.metrics.power) << ',' << format_double(r.metrics.tpr) << ','
            << format_double(r.metrics.fpr) << ',' << r.metrics.selected_count << ','
            << (r.threshold ? format_double(*r.threshold) : std::string("")) << ',' << format_double(r.runtime_ms)
            << ',' << (r.error ? "\"" + *r.error + "\"" : std::string("")) << '\n';
        }
      }
      const std::string summary_path =
          bench_summary.empty() ? with_suffix(bench_output, ".summary.json") : bench_summary;
      ordered_json s;
      s["method"] = bench_flags.method;
      s["q"] = bench_flags.q;
      s["reps"] = reps;
      s["completed"] = summary.completed;
      s["failed"] = summary.failed;
      s["mean_fdp"] = summary.mean_fdp;
      s["se_fdp"] = summary.se_fdp;
      s["mean_power"] = summary.mean_power;
      s["se_power"] = summary.se_power;
      s["design"] = bench_design.to_json();
      s["seed"] = seed_json(base);
      write_json(summary_path, s);

      ordered_json mc = bench_design.to_json();
      mc.update(bench_flags.to_json());
      mc["reps"] = reps;
      mc["threads"] = threads;
      write_manifest(bench_output, "benchmark", mc, base, {bench_output, summary_path}, ms_since(t0));
      out << "mean FDP " << summary.mean_fdp << " (se " << summary.se_fdp << "), mean power " << summary.mean_power
          << " (se " << summary.se_power << ") over " << summary.completed << " repetitions\n";
      return 0;
    }

    if (roc->parsed()) {
      std::ifstream f(roc_input);
      if (!f) fail(ErrorKind::configuration, "cannot open result '" + roc_input + "'");
      VectorXd m;
      try {
        const auto doc = nlohmann::json::parse(f);
        const auto& feats = doc.at("features");
        m.resize(static_cast<Eigen::Index>(feats.size()));
        for (std::size_t j = 0; j < feats.size(); ++j) m(static_cast<Eigen::Index>(j)) = feats[j].at("M").get<double>();
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::invalid_data, roc_input + ": " + e.what());
      }
      const auto curve = sim::roc_curve(m, load_truth(roc_truth));
      {
        auto o = open_out(roc_output);
        o << "fpr,tpr\n";
        for (const auto& [fpr, tpr] : curve.points) o << format_double(fpr) << ',' << format_double(tpr) << '\n';
      }
      write_manifest(roc_output, "roc", {{"input", roc_input}, {"truth", roc_truth}}, base, {roc_output},
                     ms_since(t0));
      out << "auc " << curve.auc << '\n';
      return 0;
    }
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    error_record(err, to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    error_record(err, "internal", e.what(), 1);
    return 1;
  }
  return 0;
}

}  // namespace ngm::cli
