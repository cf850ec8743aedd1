#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace drmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for parameter values outside an operation's domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline std::string shape(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace detail
}  // namespace drmpc
