#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ngm/dataset.hpp"

// Synthetic designs with structured precision matrices, response generators
// and selection metrics against known support.
namespace ngm::sim {

enum class Structure { toeplitz_pc, constant_pc, identity };
const char* to_string(Structure s);
Structure parse_structure(const std::string& name);

struct DesignSpec {
  Eigen::Index n = 300;
  Eigen::Index p = 50;
  Structure structure = Structure::toeplitz_pc;
  double rho = 0.5;
  RngSeed seed;

  void validate() const;
};

// Toeplitz: rho^{|i-j|}. Constant: (1 - rho) I + rho 11^T. Identity: I.
MatrixXd precision_matrix(const DesignSpec& spec);

// Rows i.i.d. N(0, precision^{-1}), drawn by solving against the Cholesky
// factor of the precision matrix.
MatrixXd sample_design(const DesignSpec& spec);

enum class ModelKind { linear, single_index };
enum class Link { f1, f2, f3 };
const char* to_string(ModelKind k);
const char* to_string(Link l);
ModelKind parse_model_kind(const std::string& name);
Link parse_link(const std::string& name);

// f1(t) = t + sin t, f2(t) = 0.5 t^3, f3(t) = 0.1 t^5
double apply_link(Link link, double t);

struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  Link link = Link::f1;
  int k_signals = 10;
  // Unset means 20 sqrt(ln p / n).
  std::optional<double> coef_sd;
  double noise_sd = 1.0;
  std::optional<IndexSet> support;

  double resolved_coef_sd(Eigen::Index n, Eigen::Index p) const;
};

struct Response {
  VectorXd y;
  IndexSet truth;  // sorted
  VectorXd beta;
};

Response sample_response(const MatrixXd& x, const ModelSpec& model, const RngSeed& rng);

struct Metrics {
  double fdp = 0.0;
  double power = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  int selected_count = 0;
};

// Empty selection: fdp = 0 and power = 0.
Metrics evaluate(const IndexSet& selected, const IndexSet& truth, Eigen::Index p);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0) to (1,1)
  double auc = 0.0;
};

// Sweeps the threshold down through the distinct statistic values.
RocCurve roc_curve(const VectorXd& m, const IndexSet& truth);

}  // namespace ngm::sim
