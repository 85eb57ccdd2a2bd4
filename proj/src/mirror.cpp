#include "ngm/mirror.hpp"

#include <random>

#include "ngm/error.hpp"
#include "ngm/parallel.hpp"

namespace ngm::mirror {

using kernel::KernelFamily;

VectorXd draw_standard_normal(Eigen::Index n, const RngSeed& rng) {
  auto engine = rng.engine();
  std::normal_distribution<double> nd(0.0, 1.0);
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(engine);
  return z;
}

RngSeed feature_seed(const RngSeed& base, const std::string& name) {
  return base.with_stream(base.stream ^ stream_for_name(name));
}

const char* to_string(Conditioning c) {
  switch (c) {
    case Conditioning::standardized: return "standardized";
    case Conditioning::residualized: return "residualized";
    case Conditioning::automatic: return "automatic";
  }
  return "unknown";
}

Conditioning parse_conditioning(const std::string& name) {
  if (name == "standardized") return Conditioning::standardized;
  if (name == "residualized") return Conditioning::residualized;
  if (name == "automatic" || name == "auto") return Conditioning::automatic;
  fail(ErrorKind::configuration, "unknown conditioning '" + name + "'");
}

MatrixXd conditioning_block(const MatrixXd& x, Eigen::Index j, KernelFamily family) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::Index extra = family == KernelFamily::linear ? 1 : 0;
  MatrixXd w(n, p - 1 + extra);
  Eigen::Index k = 0;
  for (Eigen::Index col = 0; col < p; ++col)
    if (col != j) w.col(k++) = standardize(x.col(col));
  if (extra) w.col(k) = VectorXd::Ones(n);
  return w;
}

namespace {

MatrixXd others_with_intercept(const MatrixXd& x, Eigen::Index j) {
  MatrixXd a(x.rows(), x.cols());
  Eigen::Index k = 0;
  for (Eigen::Index col = 0; col < x.cols(); ++col)
    if (col != j) a.col(k++) = standardize(x.col(col));
  a.col(k).setOnes();
  return a;
}

bool full_rank(const MatrixXd& a) {
  if (a.rows() < a.cols()) return false;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  return qr.rank() == a.cols();
}

MatrixXd with_intercept(const MatrixXd& xs) {
  MatrixXd a(xs.rows(), xs.cols() + 1);
  a << xs, VectorXd::Ones(xs.rows());
  return a;
}

void require_full_rank(Eigen::Index rank, Eigen::Index cols) {
  if (rank < cols)
    fail(ErrorKind::degenerate_perturbation,
         "residualized conditioning needs [1, X_-j] of full column rank (n > p and no collinear columns)");
}

// Residuals of every standardized column x_j and every z_j on [1, X_{-j}].
// With A = [X, 1] = QR, the residual of x_j on A without column j is
// column j of Q R^{-T} scaled by 1 / (R^{-1} R^{-T})_{jj}, and the projection
// onto A without column j is P_A minus the projection onto that residual.
std::pair<MatrixXd, MatrixXd> residualize_all(const MatrixXd& xs, const MatrixXd& z) {
  const Eigen::Index n = xs.rows();
  const Eigen::Index p = xs.cols();
  const MatrixXd a = with_intercept(xs);
  require_full_rank(full_rank(a) ? p + 1 : 0, p + 1);

  Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, p + 1);
  const MatrixXd r = qr.matrixQR().topRows(p + 1).triangularView<Eigen::Upper>();
  const MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p + 1, p + 1));
  MatrixXd rx = q * r_inv.transpose().leftCols(p);
  for (Eigen::Index j = 0; j < p; ++j) rx.col(j) /= r_inv.row(j).squaredNorm();

  MatrixXd rz = z - q * (q.transpose() * z);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double rr = rx.col(j).squaredNorm();
    if (rr > 0.0) rz.col(j) += rx.col(j) * (rx.col(j).dot(z.col(j)) / rr);
  }
  return {std::move(rx), std::move(rz)};
}

void check_inputs(const Dataset& data, Eigen::Index j) {
  if (j < 0 || j >= data.p())
    fail(ErrorKind::configuration, "feature index " + std::to_string(j) + " out of range [0, " +
                                       std::to_string(data.p()) + ")");
  if (data.n() < 3) fail(ErrorKind::invalid_data, "mirror construction needs n >= 3");
  if (!data.x.allFinite()) fail(ErrorKind::invalid_data, "design contains non-finite values");
}

MirrorPair assemble(const VectorXd& xj, Eigen::Index j, VectorXd z, const kernel::CMinimizationResult& r) {
  const double sd = stddev(xj);
  MirrorPair m;
  m.feature_index = static_cast<int>(j);
  m.c = r.c_star * (sd > 0.0 && !is_constant(xj) ? sd : 1.0);
  m.objective = r.objective_at_c_star;
  m.method = r.method;
  m.x_plus = xj + m.c * z;
  m.x_minus = xj - m.c * z;
  m.z = std::move(z);
  return m;
}

std::string label(const Dataset& data, Eigen::Index j) {
  std::string s = "feature " + std::to_string(j);
  if (static_cast<std::size_t>(j) < data.names.size()) s += " (" + data.names[static_cast<std::size_t>(j)] + ")";
  return s;
}

}  // namespace

VectorXd residual_on_others(const MatrixXd& x, Eigen::Index j, const VectorXd& v) {
  const MatrixXd a = others_with_intercept(x, j);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  require_full_rank(qr.rank(), a.cols());
  return v - a * qr.solve(v);
}

MirrorPair make_mirror(const Dataset& data, Eigen::Index j, const kernel::KernelSpec& spec, const RngSeed& rng,
                       const kernel::SearchConfig& search, Conditioning conditioning) {
  check_inputs(data, j);
  const VectorXd xj = data.x.col(j);
  VectorXd z = draw_standard_normal(data.n(), rng);
  const MatrixXd w = conditioning_block(data.x, j, spec.family);
  VectorXd u = standardize(xj);
  VectorXd v = z;
  const bool residualize = conditioning == Conditioning::residualized ||
                           (conditioning == Conditioning::automatic && full_rank(others_with_intercept(data.x, j)));
  if (residualize) {
    u = residual_on_others(data.x, j, u);
    v = residual_on_others(data.x, j, v);
  }
  const auto r = kernel::minimize_c(u, v, w, spec, search);
  MirrorPair m = assemble(xj, j, std::move(z), r);
  m.residualized = residualize;
  return m;
}

std::vector<MirrorPair> make_all_mirrors(const Dataset& data, const MirrorOptions& options, const RngSeed& rng) {
  const Eigen::Index p = data.p();
  if (p < 1) fail(ErrorKind::configuration, "make_all_mirrors needs at least one feature");
  if (data.names.size() != static_cast<std::size_t>(p))
    fail(ErrorKind::invalid_data, "column name count does not match column count");
  check_inputs(data, 0);

  std::vector<MirrorPair> out(static_cast<std::size_t>(p));
  const MatrixXd xs = standardize_columns(data.x);
  Conditioning mode = options.conditioning;
  if (mode == Conditioning::automatic)
    mode = full_rank(with_intercept(xs)) ? Conditioning::residualized : Conditioning::standardized;

  if (options.kernel.family != KernelFamily::linear) {
    parallel_for(static_cast<std::size_t>(p), options.threads, [&](std::size_t j) {
      const auto jj = static_cast<Eigen::Index>(j);
      try {
        out[j] = make_mirror(data, jj, options.kernel, feature_seed(rng, data.names[j]), options.search, mode);
      } catch (const Error& e) {
        throw Error(e.kind(), label(data, jj) + ": " + e.what());
      }
    });
    return out;
  }

  // Linear kernel: every closed-form c needs a = W^T(x_j o x_j) and
  // b = W^T(z_j o z_j); all of them come out of two p x p products.
  const Eigen::Index n = data.n();
  MatrixXd zc(n, p);
  MatrixXd z(n, p);
  parallel_for(static_cast<std::size_t>(p), options.threads, [&](std::size_t j) {
    const auto jj = static_cast<Eigen::Index>(j);
    z.col(jj) = draw_standard_normal(n, feature_seed(rng, data.names[j]));
    zc.col(jj) = z.col(jj).array() - z.col(jj).mean();
  });
  MatrixXd xsq, zsq;
  const bool residualize = mode == Conditioning::residualized;
  if (residualize) {
    const auto [rx, rz] = residualize_all(xs, z);
    xsq = rx.array().square().matrix();
    zsq = rz.array().square().matrix();
  } else {
    xsq = xs.array().square().matrix();
    zsq = zc.array().square().matrix();
  }
  const MatrixXd a_all = xs.transpose() * xsq;  // (k, j) = <x_k, x_j o x_j>
  const MatrixXd b_all = xs.transpose() * zsq;  // (k, j) = <x_k, z_j o z_j>
  const VectorXd a_int = xsq.colwise().sum().transpose();
  const VectorXd b_int = zsq.colwise().sum().transpose();

  for (Eigen::Index j = 0; j < p; ++j) {
    VectorXd a(p), b(p);
    Eigen::Index k = 0;
    for (Eigen::Index col = 0; col < p; ++col)
      if (col != j) {
        a(k) = a_all(col, j);
        b(k) = b_all(col, j);
        ++k;
      }
    a(k) = a_int(j);
    b(k) = b_int(j);
    try {
      const auto r = kernel::closed_form_c_from_moments(a, b, static_cast<double>(n));
      out[static_cast<std::size_t>(j)] = assemble(data.x.col(j), j, z.col(j), r);
      out[static_cast<std::size_t>(j)].residualized = residualize;
    } catch (const Error& e) {
      throw Error(e.kind(), label(data, j) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ngm::mirror
