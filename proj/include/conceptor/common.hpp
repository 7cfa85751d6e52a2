#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace conceptor {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using TokenId = std::int32_t;
using Rng = std::mt19937_64;

/// Invalid input or configuration. Maps to CLI exit code 2 and HTTP 422.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what, std::string field = {})
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Failure during a computation (non-finite loss, divergence).
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted artifact failed a magic/version/hash check.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg, const std::string& field = {}) {
  if (!cond) throw ValidationError(msg, field);
}

/// Fills `out` with standard normal draws, in index order.
template <class Derived>
void fill_normal(Rng& rng, Eigen::DenseBase<Derived>& out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
}

/// Rounds every entry to the nearest float32 value so that float32 storage
/// round-trips exactly.
template <class Derived>
void round_to_float(Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<double>(static_cast<float>(m(i, j)));
}

}  // namespace conceptor
