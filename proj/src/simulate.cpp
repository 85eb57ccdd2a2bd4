#include "ngm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "ngm/error.hpp"

namespace ngm::sim {

const char* to_string(Structure s) {
  switch (s) {
    case Structure::toeplitz_pc: return "toeplitz";
    case Structure::constant_pc: return "constant";
    case Structure::identity: return "identity";
  }
  return "unknown";
}

Structure parse_structure(const std::string& name) {
  if (name == "toeplitz" || name == "toeplitz_pc") return Structure::toeplitz_pc;
  if (name == "constant" || name == "constant_pc") return Structure::constant_pc;
  if (name == "identity") return Structure::identity;
  fail(ErrorKind::configuration, "unknown design structure '" + name + "'");
}

const char* to_string(ModelKind k) { return k == ModelKind::linear ? "linear" : "single_index"; }

const char* to_string(Link l) {
  switch (l) {
    case Link::f1: return "f1";
    case Link::f2: return "f2";
    case Link::f3: return "f3";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "linear") return ModelKind::linear;
  if (name == "single_index" || name == "single-index") return ModelKind::single_index;
  fail(ErrorKind::configuration, "unknown model kind '" + name + "'");
}

Link parse_link(const std::string& name) {
  if (name == "f1") return Link::f1;
  if (name == "f2") return Link::f2;
  if (name == "f3") return Link::f3;
  fail(ErrorKind::configuration, "unknown link '" + name + "'");
}

double apply_link(Link link, double t) {
  switch (link) {
    case Link::f1: return t + std::sin(t);
    case Link::f2: return 0.5 * t * t * t;
    case Link::f3: return 0.1 * std::pow(t, 5);
  }
  return t;
}

void DesignSpec::validate() const {
  if (n < 1 || p < 1) fail(ErrorKind::configuration, "design needs n >= 1 and p >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorKind::configuration, "rho must lie in [0, 1)");
  if (structure == Structure::constant_pc && !(1.0 + static_cast<double>(p - 1) * rho > 0.0))
    fail(ErrorKind::configuration, "constant partial correlation needs 1 + (p-1) rho > 0");
}

MatrixXd precision_matrix(const DesignSpec& spec) {
  spec.validate();
  const Eigen::Index p = spec.p;
  switch (spec.structure) {
    case Structure::toeplitz_pc: {
      MatrixXd omega(p, p);
      for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) omega(i, j) = std::pow(spec.rho, static_cast<double>(std::abs(i - j)));
      return omega;
    }
    case Structure::constant_pc:
      return (1.0 - spec.rho) * MatrixXd::Identity(p, p) + spec.rho * MatrixXd::Ones(p, p);
    case Structure::identity: return MatrixXd::Identity(p, p);
  }
  return MatrixXd::Identity(p, p);
}

MatrixXd sample_design(const DesignSpec& spec) {
  const MatrixXd omega = precision_matrix(spec);
  Eigen::LLT<MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::configuration, "precision matrix is not positive definite");

  auto engine = spec.seed.engine();
  std::normal_distribution<double> nd;
  MatrixXd e(spec.p, spec.n);  // column i holds the draws for row i
  for (Eigen::Index i = 0; i < spec.n; ++i)
    for (Eigen::Index j = 0; j < spec.p; ++j) e(j, i) = nd(engine);
  // Omega = L L^T, x = L^{-T} e  =>  Cov(x) = Omega^{-1}
  llt.matrixU().solveInPlace(e);
  return e.transpose();
}

double ModelSpec::resolved_coef_sd(Eigen::Index n, Eigen::Index p) const {
  if (coef_sd) return *coef_sd;
  return 20.0 * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

Response sample_response(const MatrixXd& x, const ModelSpec& model, const RngSeed& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (!x.allFinite()) fail(ErrorKind::invalid_data, "design contains non-finite values");
  if (model.k_signals < 0 || model.k_signals > p)
    fail(ErrorKind::configuration, "k_signals must lie in [0, p]");
  if (!(model.noise_sd >= 0.0)) fail(ErrorKind::configuration, "noise_sd must be non-negative");

  auto engine = rng.engine();
  Response r;
  if (model.support) {
    std::set<int> s(model.support->begin(), model.support->end());
    for (int j : s)
      if (j < 0 || j >= p) fail(ErrorKind::configuration, "support index out of range: " + std::to_string(j));
    r.truth.assign(s.begin(), s.end());
  } else {
    IndexSet all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), engine);
    r.truth.assign(all.begin(), all.begin() + model.k_signals);
    std::sort(r.truth.begin(), r.truth.end());
  }

  std::normal_distribution<double> nd;
  const double sd = model.resolved_coef_sd(n, p);
  r.beta = VectorXd::Zero(p);
  for (int j : r.truth) r.beta(j) = sd * nd(engine);

  VectorXd index = x * r.beta;
  if (model.kind == ModelKind::single_index)
    for (Eigen::Index i = 0; i < n; ++i) index(i) = apply_link(model.link, index(i));
  r.y = index;
  for (Eigen::Index i = 0; i < n; ++i) r.y(i) += model.noise_sd * nd(engine);
  return r;
}

Metrics evaluate(const IndexSet& selected, const IndexSet& truth, Eigen::Index p) {
  auto to_set = [p](const IndexSet& v, const char* what) {
    std::set<int> s;
    for (int j : v) {
      if (j < 0 || j >= p)
        fail(ErrorKind::invalid_data, std::string(what) + " index out of range: " + std::to_string(j));
      s.insert(j);
    }
    return s;
  };
  const std::set<int> sel = to_set(selected, "selected");
  const std::set<int> tru = to_set(truth, "truth");
  int tp = 0;
  for (int j : sel) tp += tru.count(j) ? 1 : 0;
  const int fp = static_cast<int>(sel.size()) - tp;
  const auto nulls = static_cast<double>(p) - static_cast<double>(tru.size());

  Metrics m;
  m.selected_count = static_cast<int>(sel.size());
  m.fdp = sel.empty() ? 0.0 : static_cast<double>(fp) / static_cast<double>(sel.size());
  m.tpr = tru.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(tru.size());
  m.power = m.tpr;
  m.fpr = nulls > 0 ? static_cast<double>(fp) / nulls : 0.0;
  return m;
}

RocCurve roc_curve(const VectorXd& m, const IndexSet& truth) {
  const Eigen::Index p = m.size();
  std::vector<char> is_true(static_cast<std::size_t>(p), 0);
  for (int j : truth) {
    if (j < 0 || j >= p) fail(ErrorKind::invalid_data, "truth index out of range: " + std::to_string(j));
    is_true[static_cast<std::size_t>(j)] = 1;
  }
  const auto positives = std::count(is_true.begin(), is_true.end(), 1);
  const auto negatives = p - positives;
  if (positives < 1 || negatives < 1)
    fail(ErrorKind::domain, "ROC needs at least one relevant and one null feature");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return m(a) > m(b); });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    // tied statistics enter together
    while (j < order.size() && m(order[j]) == m(order[i])) {
      (is_true[static_cast<std::size_t>(order[j])] ? tp : fp) += 1;
      ++j;
    }
    const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
    const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
    const auto& prev = roc.points.back();
    roc.auc += (fpr - prev.first) * (tpr + prev.second) / 2.0;
    roc.points.emplace_back(fpr, tpr);
    i = j;
  }
  return roc;
}

}  // namespace ngm::sim
