#include "ngm/dataset.hpp"

#include <cmath>

#include "ngm/error.hpp"

namespace ngm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 RngSeed::engine() const {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(stream ^ 0x5851f42d4c957f2dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

RngSeed RngSeed::derive(std::uint64_t tag) const {
  return {splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL)), stream};
}

std::uint64_t stream_for_name(std::string_view name) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Dataset Dataset::select_columns(const IndexSet& cols) const {
  Dataset out;
  out.x.resize(n(), static_cast<Eigen::Index>(cols.size()));
  out.y = y;
  out.response_name = response_name;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.x.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
    out.names.push_back(names.at(static_cast<std::size_t>(cols[k])));
  }
  if (truth) {
    IndexSet t;
    for (std::size_t k = 0; k < cols.size(); ++k)
      for (int s : *truth)
        if (s == cols[k]) t.push_back(static_cast<int>(k));
    out.truth = t;
  }
  return out;
}

Dataset Dataset::select_rows(const IndexSet& rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), p());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
    out.y(static_cast<Eigen::Index>(k)) = y(rows[k]);
  }
  out.names = names;
  out.response_name = response_name;
  out.truth = truth;
  return out;
}

void Dataset::validate() const {
  if (y.size() != x.rows())
    fail(ErrorKind::invalid_data, "response length " + std::to_string(y.size()) +
                                      " does not match row count " + std::to_string(x.rows()));
  if (names.size() != static_cast<std::size_t>(x.cols()))
    fail(ErrorKind::invalid_data, "column name count does not match column count");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorKind::invalid_data, "dataset contains non-finite values");
  if (truth)
    for (int t : *truth)
      if (t < 0 || t >= x.cols()) fail(ErrorKind::invalid_data, "truth index out of range: " + std::to_string(t));
}

std::vector<std::string> default_names(Eigen::Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

double mean(const VectorXd& v) { return v.size() ? v.mean() : 0.0; }

double stddev(const VectorXd& v) {
  if (v.size() == 0) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().mean());
}

bool is_constant(const VectorXd& v) {
  if (v.size() == 0) return true;
  return (v.array() == v(0)).all();
}

VectorXd standardize(const VectorXd& v) {
  VectorXd out = v.array() - mean(v);
  if (is_constant(v)) return VectorXd::Zero(v.size());
  const double sd = stddev(v);
  if (sd > 0) out /= sd;
  return out;
}

MatrixXd standardize_columns(const MatrixXd& m) {
  MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = standardize(m.col(j));
  return out;
}

}  // namespace ngm
