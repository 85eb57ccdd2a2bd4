#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ngm/dataset.hpp"
#include "ngm/kernel_measure.hpp"
#include "ngm/mirror.hpp"
#include "ngm/mlp.hpp"

namespace ngm::select {

// |l_plus + l_minus| - |l_plus - l_minus|
double mirror_statistic(double l_plus, double l_minus);

struct MirrorStats {
  VectorXd m;
  VectorXd importance_plus;
  VectorXd importance_minus;
};

MirrorStats make_stats(const VectorXd& importance_plus, const VectorXd& importance_minus);

// #{j : M_j <= -t} / max(#{j : M_j >= t}, 1)
double estimate_fdp(const VectorXd& m, double t);

// Smallest t in { |M_j| : M_j != 0 } with estimate_fdp(m, t) <= q, or nullopt
// when no candidate qualifies.
std::optional<double> adaptive_threshold(const VectorXd& m, double q);

// (t, estimate_fdp(m, t)) over the candidate grid, ascending in t.
std::vector<std::pair<double, double>> fdp_curve(const VectorXd& m);

IndexSet select_at(const VectorXd& m, std::optional<double> threshold);

enum class Method { ingm, sngm, s_ingm, s_sngm };
const char* to_string(Method m);
Method parse_method(const std::string& name);
bool uses_screening(Method m);

struct ScreenOptions {
  bool enabled = false;
  // Unset means min(floor(n/2), p).
  std::optional<int> m_keep;
};

struct ScreenResult {
  IndexSet kept;           // ascending column order
  VectorXd importances;    // |L| for every feature
  IndexSet split_indices;  // the floor(n/3) rows used to fit the screening net
};

// Fits one network on a random floor(n/3) row subset and keeps the m_keep
// features with the largest |path importance|.
ScreenResult screen(const Dataset& data, const nn::NetConfig& config, int m_keep, const RngSeed& rng);

struct SelectionOptions {
  kernel::KernelSpec kernel;
  kernel::SearchConfig search;
  mirror::Conditioning conditioning = mirror::Conditioning::automatic;
  // The network seed is derived from the run seed; config.seed is ignored.
  nn::NetConfig net;
  ScreenOptions screen;
  unsigned threads = 1;
};

struct FeatureRecord {
  std::string name;
  double c = 0.0;
  bool residualized = false;
  bool screened_out = false;
  bool constant = false;
  bool failed = false;
};

struct Timing {
  double screen_ms = 0.0;
  double mirror_ms = 0.0;
  double train_ms = 0.0;
  double total_ms = 0.0;
};

struct SelectionResult {
  Method method = Method::sngm;
  MirrorStats stats;
  double q = 0.1;
  std::optional<double> threshold;
  IndexSet selected;
  std::vector<std::pair<double, double>> fdp_curve;
  std::vector<FeatureRecord> features;
  std::optional<ScreenResult> screening;
  RngSeed seed;
  Timing timing;
  int failed_features = 0;
};

// Thresholds the statistics and fills threshold, selected and fdp_curve.
void finalize(SelectionResult& result);

// One network per feature on (X_j+, X_j-, X_-j).
SelectionResult run_ingm(const Dataset& data, double q, const SelectionOptions& options, const RngSeed& rng);

// One network on (X_1+, X_1-, ..., X_p+, X_p-).
SelectionResult run_sngm(const Dataset& data, double q, const SelectionOptions& options, const RngSeed& rng);

// Dispatches on the method; the s_ variants force screening on.
SelectionResult run_method(Method method, const Dataset& data, double q, SelectionOptions options,
                           const RngSeed& rng);

nlohmann::ordered_json to_json(const SelectionResult& result, const nlohmann::ordered_json& kernel_info = nullptr);

}  // namespace ngm::select
