#pragma once

#include <vector>

#include "ngm/dataset.hpp"
#include "ngm/kernel_measure.hpp"

namespace ngm::mirror {

// (x_plus, x_minus) = (X_j + c z, X_j - c z), with z ~ N(0, I_n).
struct MirrorPair {
  int feature_index = 0;
  VectorXd z;
  double c = 0.0;
  VectorXd x_plus;
  VectorXd x_minus;
  // Dependence measure at the chosen c (standardized units) and how c was found.
  double objective = 0.0;
  kernel::CMethod method = kernel::CMethod::closed_form;
  bool residualized = false;
};

// What the dependence measure sees in place of X_j and z.
//   standardized: the standardized X_j and z as drawn.
//   residualized: both replaced by their residuals on [1, X_{-j}].
//   automatic:    residualized when that block has full column rank,
//                 standardized otherwise (for instance p >= n).
enum class Conditioning { standardized, residualized, automatic };
const char* to_string(Conditioning c);
Conditioning parse_conditioning(const std::string& name);

struct MirrorOptions {
  kernel::KernelSpec kernel;
  kernel::SearchConfig search;
  Conditioning conditioning = Conditioning::automatic;
  unsigned threads = 1;
};

VectorXd draw_standard_normal(Eigen::Index n, const RngSeed& rng);

// Substream owned by the feature called `name` under a run seed.
RngSeed feature_seed(const RngSeed& base, const std::string& name);

// Standardized X_{-j}. For the linear kernel an intercept column is appended so
// that K^W = W W^T + 11^T.
MatrixXd conditioning_block(const MatrixXd& x, Eigen::Index j, kernel::KernelFamily family);

// Residual of v on the intercept and the standardized columns other than j.
// Throws degenerate_perturbation when that block is rank deficient.
VectorXd residual_on_others(const MatrixXd& x, Eigen::Index j, const VectorXd& v);

// Builds the mirror of column j using exactly the stream in `rng`.
MirrorPair make_mirror(const Dataset& data, Eigen::Index j, const kernel::KernelSpec& spec, const RngSeed& rng,
                       const kernel::SearchConfig& search = {},
                       Conditioning conditioning = Conditioning::automatic);

// One mirror per column, each drawn from feature_seed(rng, name). Automatic
// conditioning is resolved once for the whole design.
std::vector<MirrorPair> make_all_mirrors(const Dataset& data, const MirrorOptions& options, const RngSeed& rng);

}  // namespace ngm::mirror
