#include "ngm/kernel_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ngm/error.hpp"

namespace ngm::kernel {

namespace {

VectorXd centered(const VectorXd& v) { return v.array() - v.mean(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double resolve_bandwidth(const KernelSpec& spec, const MatrixXd& rows) {
  if (spec.bandwidth) return *spec.bandwidth;
  return median_heuristic(rows);
}

}  // namespace

const char* to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "polynomial") return KernelFamily::polynomial;
  fail(ErrorKind::configuration, "unknown kernel family '" + name + "'");
}

const char* to_string(CMethod method) {
  return method == CMethod::closed_form ? "closed_form" : "scalar_search";
}

void KernelSpec::validate() const {
  if (family == KernelFamily::gaussian && bandwidth && !(*bandwidth > 0.0))
    fail(ErrorKind::configuration, "gaussian bandwidth must be positive, got " + fmt(*bandwidth));
  if (family == KernelFamily::polynomial && degree < 1)
    fail(ErrorKind::configuration, "polynomial degree must be >= 1, got " + std::to_string(degree));
  if (family == KernelFamily::polynomial && !std::isfinite(offset))
    fail(ErrorKind::configuration, "polynomial offset must be finite");
}

double median_heuristic(const MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((rows.row(i) - rows.row(j)).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

MatrixXd gram_matrix(const MatrixXd& rows, const KernelSpec& spec) {
  if (rows.rows() < 1 || rows.cols() < 1) fail(ErrorKind::invalid_data, "gram_matrix needs n >= 1 and d >= 1");
  if (!rows.allFinite()) fail(ErrorKind::invalid_data, "gram_matrix input contains non-finite values");
  spec.validate();

  const Eigen::Index n = rows.rows();
  MatrixXd inner = MatrixXd::Zero(n, n);
  inner.selfadjointView<Eigen::Lower>().rankUpdate(rows);
  inner = inner.selfadjointView<Eigen::Lower>();

  switch (spec.family) {
    case KernelFamily::linear: return inner;
    case KernelFamily::polynomial: return (inner.array() + spec.offset).pow(static_cast<double>(spec.degree));
    case KernelFamily::gaussian: {
      const double bw = resolve_bandwidth(spec, rows);
      const VectorXd sq = inner.diagonal();
      MatrixXd k(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
          const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * inner(i, j));
          k(i, j) = k(j, i) = std::exp(-d2 / (2.0 * bw * bw));
        }
      }
      return k;
    }
  }
  return inner;
}

MatrixXd center_gram(const MatrixXd& k) {
  if (k.rows() != k.cols())
    fail(ErrorKind::invalid_data, "center_gram needs a square matrix, got " + std::to_string(k.rows()) + "x" +
                                      std::to_string(k.cols()));
  const Eigen::Index n = k.rows();
  if (n == 0) return k;
  const VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double grand = row_mean.mean();
  MatrixXd out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean;
  out.array() += grand;
  return out;
}

void validate(const GramTriple& grams, bool check_psd, double psd_tol) {
  const Eigen::Index n = grams.k_u.rows();
  for (const MatrixXd* m : {&grams.k_u, &grams.k_v, &grams.k_w}) {
    if (m->rows() != n || m->cols() != n)
      fail(ErrorKind::invalid_data, "gram triple matrices must all be " + std::to_string(n) + "x" + std::to_string(n));
    const double scale = std::max(1.0, m->cwiseAbs().maxCoeff());
    if (((*m) - m->transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      fail(ErrorKind::invalid_data, "gram matrix is not symmetric");
    if (check_psd && n > 0) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(*m, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -psd_tol * scale)
        fail(ErrorKind::invalid_data, "gram matrix is not positive semidefinite (min eigenvalue " +
                                          fmt(es.eigenvalues().minCoeff()) + ")");
    }
  }
}

double conditional_dependence(const GramTriple& grams) {
  const Eigen::Index n = grams.n();
  if (grams.k_u.cols() != n || grams.k_v.rows() != n || grams.k_v.cols() != n || grams.k_w.rows() != n ||
      grams.k_w.cols() != n)
    fail(ErrorKind::invalid_data, "gram triple dimension mismatch");
  if (n == 0) return 0.0;

  const MatrixXd cu = center_gram(grams.k_u);
  const MatrixXd cv = center_gram(grams.k_v);
  const auto terms = cu.array() * cv.array() * grams.k_w.array();
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double value = terms.sum() / nn;
  if (!std::isfinite(value)) fail(ErrorKind::numerical, "conditional dependence is not finite");
  if (value >= 0.0) return value;

  // Rounding noise is judged against the magnitude of the summands.
  const double scale = std::max(1.0, terms.abs().sum() / nn);
  if (value >= -1e-10 * scale) return 0.0;
  fail(ErrorKind::numerical, "conditional dependence is negative beyond rounding: " + fmt(value));
}

double linear_objective(const VectorXd& x, const VectorXd& z, const MatrixXd& w, double c) {
  const VectorXd xc = centered(x);
  const VectorXd zc = centered(z);
  const VectorXd uv = (xc.array().square() - c * c * zc.array().square()).matrix();
  return (w.transpose() * uv).squaredNorm();
}

CMinimizationResult closed_form_c_from_moments(const VectorXd& a, const VectorXd& b, double n) {
  // {A o WW^T}_{++} = 2 a.b and 2 [(zz^T) o (zz^T) o WW^T]_{++} = 2 |b|^2.
  const double numerator = 2.0 * a.dot(b);
  const double denominator = 2.0 * b.squaredNorm();
  if (!(denominator > 0.0) || !std::isfinite(denominator))
    fail(ErrorKind::degenerate_perturbation,
         "closed-form c has a zero denominator (perturbation is degenerate relative to W)");
  CMinimizationResult r;
  r.method = CMethod::closed_form;
  r.evaluations = 1;
  const double c2 = std::max(0.0, numerator / denominator);
  r.c_star = std::sqrt(c2);
  r.objective_at_c_star = (a - c2 * b).squaredNorm() / (n * n);
  if (!std::isfinite(r.c_star)) fail(ErrorKind::numerical, "closed-form c is not finite");
  return r;
}

CMinimizationResult closed_form_c_linear(const VectorXd& x, const VectorXd& z, const MatrixXd& w) {
  if (x.size() != z.size() || w.rows() != x.size())
    fail(ErrorKind::invalid_data, "closed_form_c_linear: X_j, Z_j and W must have the same row count");
  if (!x.allFinite() || !z.allFinite() || !w.allFinite())
    fail(ErrorKind::invalid_data, "closed_form_c_linear: non-finite input");
  const VectorXd xc = centered(x);
  const VectorXd zc = centered(z);
  const VectorXd a = w.transpose() * xc.array().square().matrix();
  const VectorXd b = w.transpose() * zc.array().square().matrix();
  return closed_form_c_from_moments(a, b, static_cast<double>(x.size()));
}

DependenceObjective::DependenceObjective(const VectorXd& x, const VectorXd& z, const MatrixXd& w,
                                         const KernelSpec& spec)
    : x_(centered(x)), z_(centered(z)), spec_(spec) {
  if (x.size() != z.size() || w.rows() != x.size())
    fail(ErrorKind::invalid_data, "X_j, Z_j and W must have the same row count");
  if (!x.allFinite() || !z.allFinite() || !w.allFinite()) fail(ErrorKind::invalid_data, "non-finite input");
  spec_.validate();

  if (spec_.family == KernelFamily::gaussian) {
    if (spec_.bandwidth) {
      uv_bandwidth_ = w_bandwidth_ = *spec_.bandwidth;
    } else {
      uv_bandwidth_ = median_heuristic(is_constant(x_) ? MatrixXd(z_) : MatrixXd(x_));
      w_bandwidth_ = w.cols() > 0 ? median_heuristic(w) : 1.0;
    }
    const Eigen::Index n = x_.size();
    dx_.resize(n, n);
    dz_.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        dx_(i, j) = x_(i) - x_(j);
        dz_(i, j) = z_(i) - z_(j);
      }
  }

  if (w.cols() == 0) {
    k_w_ = MatrixXd::Ones(x.size(), x.size());
  } else {
    KernelSpec wspec = spec_;
    if (wspec.family == KernelFamily::gaussian) wspec.bandwidth = w_bandwidth_;
    k_w_ = gram_matrix(w, wspec);
  }
}

MatrixXd DependenceObjective::uv_gram(double c, double sign) const {
  const double s = sign * c;
  switch (spec_.family) {
    case KernelFamily::gaussian: {
      const double scale = -1.0 / (2.0 * uv_bandwidth_ * uv_bandwidth_);
      return ((dx_.array() + s * dz_.array()).square() * scale).exp().matrix();
    }
    case KernelFamily::linear: {
      const VectorXd u = x_ + s * z_;
      return u * u.transpose();
    }
    case KernelFamily::polynomial: {
      const VectorXd u = x_ + s * z_;
      return ((u * u.transpose()).array() + spec_.offset).pow(static_cast<double>(spec_.degree)).matrix();
    }
  }
  return {};
}

GramTriple DependenceObjective::grams(double c) const { return {uv_gram(c, 1.0), uv_gram(c, -1.0), k_w_}; }

double DependenceObjective::operator()(double c) const { return conditional_dependence(grams(c)); }

double DependenceObjective::c_max(const SearchConfig& search) const {
  const double zn = z_.norm();
  if (!(zn > 0.0)) fail(ErrorKind::degenerate_perturbation, "perturbation Z_j is identically zero after centering");
  return search.c_max_factor * x_.norm() / zn;
}

CMinimizationResult scalar_search(const std::function<double(double)>& objective, double lo, double hi,
                                  const SearchConfig& search) {
  CMinimizationResult best;
  best.method = CMethod::scalar_search;
  best.objective_at_c_star = std::numeric_limits<double>::infinity();
  int evals = 0;

  auto eval = [&](double c) {
    const double v = objective(c);
    ++evals;
    if (!std::isfinite(v)) fail(ErrorKind::numerical, "objective is not finite at c = " + fmt(c));
    if (v < best.objective_at_c_star) {
      best.objective_at_c_star = v;
      best.c_star = c;
    }
    return v;
  };

  if (!(hi > lo)) {
    eval(lo);
    best.evaluations = evals;
    return best;
  }

  const int m = std::max(3, search.bracket_points);
  const double step = (hi - lo) / (m - 1);
  int arg = 0;
  double fmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double v = eval(lo + step * i);
    if (v < fmin) {
      fmin = v;
      arg = i;
    }
  }

  double a = lo + step * std::max(0, arg - 1);
  double b = lo + step * std::min(m - 1, arg + 1);
  const double tol = search.rel_tol * (hi - lo);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c1 = b - inv_phi * (b - a);
  double c2 = a + inv_phi * (b - a);
  double f1 = eval(c1);
  double f2 = eval(c2);
  for (int it = 0; it < search.max_iterations && (b - a) > tol; ++it) {
    if (f1 <= f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - inv_phi * (b - a);
      f1 = eval(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + inv_phi * (b - a);
      f2 = eval(c2);
    }
  }
  eval(0.5 * (a + b));
  best.evaluations = evals;
  return best;
}

CMinimizationResult minimize_c(const VectorXd& x, const VectorXd& z, const MatrixXd& w, const KernelSpec& spec,
                               const SearchConfig& search) {
  spec.validate();
  if (z.size() > 0 && (z.array() == 0.0).all())
    fail(ErrorKind::degenerate_perturbation, "perturbation Z_j is identically zero");
  if (spec.family == KernelFamily::linear) return closed_form_c_linear(x, z, w);

  const DependenceObjective objective(x, z, w, spec);
  const double hi = objective.c_max(search);
  return scalar_search([&](double c) { return objective(c); }, 0.0, hi, search);
}

}  // namespace ngm::kernel
