#pragma once

#include <functional>
#include <optional>
#include <string>

#include "ngm/dataset.hpp"

// Kernel-based conditional dependence between the two halves of a mirrored
// pair (U, V) = (X_j + cZ_j, X_j - cZ_j) given the remaining features W, and
// the search for the perturbation scale c that minimizes it.
namespace ngm::kernel {

enum class KernelFamily { linear, gaussian, polynomial };

const char* to_string(KernelFamily family);
KernelFamily parse_kernel_family(const std::string& name);

struct KernelSpec {
  KernelFamily family = KernelFamily::linear;
  // Gaussian only. Unset means "median pairwise distance of the block".
  std::optional<double> bandwidth;
  // Polynomial only: k(x, y) = (<x, y> + offset)^degree.
  int degree = 2;
  double offset = 1.0;

  void validate() const;
};

// Median of the pairwise Euclidean distances between rows; 1 when all rows
// coincide.
double median_heuristic(const MatrixXd& rows);

// Entry (i, j) = k(row_i, row_j).
MatrixXd gram_matrix(const MatrixXd& rows, const KernelSpec& spec);

// H K H with H = I - 11^T / n.
MatrixXd center_gram(const MatrixXd& k);

struct GramTriple {
  MatrixXd k_u;
  MatrixXd k_v;
  MatrixXd k_w;

  Eigen::Index n() const { return k_u.rows(); }
};

// Shape and symmetry checks; with check_psd also verifies every eigenvalue is
// >= -psd_tol.
void validate(const GramTriple& grams, bool check_psd = false, double psd_tol = 1e-8);

// (1/n^2) [ (H K_U H) o (H K_V H) o K_W ]_{++}
double conditional_dependence(const GramTriple& grams);

enum class CMethod { closed_form, scalar_search };
const char* to_string(CMethod method);

struct CMinimizationResult {
  double c_star = 0.0;
  double objective_at_c_star = 0.0;
  CMethod method = CMethod::closed_form;
  int evaluations = 0;
};

struct SearchConfig {
  // Search interval is [0, c_max_factor * ||X_j|| / ||Z_j||] (centered norms).
  double c_max_factor = 10.0;
  // Absolute tolerance is rel_tol * c_max.
  double rel_tol = 1e-6;
  // Coarse scan used to bracket the global minimum before golden-section
  // refinement.
  int bracket_points = 64;
  int max_iterations = 500;
};

// Linear-kernel objective n^2 [I(c)]^2 = || W^T((x + cz) o (x - cz)) ||^2 with
// x, z centered.
double linear_objective(const VectorXd& x, const VectorXd& z, const MatrixXd& w, double c);

// Minimizer of the linear-kernel objective:
//   c* = sqrt( {A o WW^T}_{++} / (2 [(zz^T) o (zz^T) o WW^T]_{++}) ),
//   A = (zx^T) o (zx^T) + (xz^T) o (xz^T).
// x and z are centered internally. A negative numerator puts the constrained
// minimum at c = 0.
CMinimizationResult closed_form_c_linear(const VectorXd& x, const VectorXd& z, const MatrixXd& w);

// Same quantity from precomputed inner products a = W^T(x o x), b = W^T(z o z)
// (x, z centered). Used by the batched mirror construction.
CMinimizationResult closed_form_c_from_moments(const VectorXd& a, const VectorXd& b, double n);

// Evaluates [I(c)]^2 for arbitrary kernels. U and V kernels share the
// resolved bandwidth of X_j; W gets its own.
class DependenceObjective {
public:
  DependenceObjective(const VectorXd& x, const VectorXd& z, const MatrixXd& w, const KernelSpec& spec);

  double operator()(double c) const;
  GramTriple grams(double c) const;

  double c_max(const SearchConfig& search) const;
  double uv_bandwidth() const { return uv_bandwidth_; }
  double w_bandwidth() const { return w_bandwidth_; }

private:
  MatrixXd uv_gram(double c, double sign) const;

  VectorXd x_;
  VectorXd z_;
  KernelSpec spec_;
  double uv_bandwidth_ = 1.0;
  double w_bandwidth_ = 1.0;
  MatrixXd k_w_;
  MatrixXd dx_;
  MatrixXd dz_;
};

// Golden-section search on [lo, hi] after a coarse bracketing scan. Returns
// the best point seen.
CMinimizationResult scalar_search(const std::function<double(double)>& objective, double lo, double hi,
                                  const SearchConfig& search);

// c >= 0 minimizing conditional_dependence of (x + cz, x - cz) given w.
// Linear kernels use the closed form.
CMinimizationResult minimize_c(const VectorXd& x, const VectorXd& z, const MatrixXd& w, const KernelSpec& spec,
                               const SearchConfig& search = {});

}  // namespace ngm::kernel
