#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ngm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using IndexSet = std::vector<int>;

// Addressable random substream. The same (seed, stream) always yields the
// same engine state.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::mt19937_64 engine() const;

  // A child seed for a named purpose (repetition, split, init, ...).
  RngSeed derive(std::uint64_t tag) const;
  RngSeed with_stream(std::uint64_t s) const { return {seed, s}; }

  bool operator==(const RngSeed&) const = default;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stable 64-bit hash of a column name; used to tie a feature's random stream
// to its identity rather than to its position.
std::uint64_t stream_for_name(std::string_view name);

struct Dataset {
  MatrixXd x;  // n x p
  VectorXd y;  // n
  std::vector<std::string> names;
  std::string response_name = "y";
  std::optional<IndexSet> truth;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }

  Dataset select_columns(const IndexSet& cols) const;
  Dataset select_rows(const IndexSet& rows) const;

  // Throws invalid_data on shape mismatch or non-finite entries.
  void validate() const;
};

std::vector<std::string> default_names(Eigen::Index p);

double mean(const VectorXd& v);
// Population standard deviation (divides by n).
double stddev(const VectorXd& v);

// Mean-center and scale to unit variance. A constant column is only centered.
VectorXd standardize(const VectorXd& v);
MatrixXd standardize_columns(const MatrixXd& m);

bool is_constant(const VectorXd& v);

}  // namespace ngm
