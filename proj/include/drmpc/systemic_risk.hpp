#pragma once

// Nested systemic level sets W_delta on the real line, failure severity and
// empirical tail-risk estimators.

#include "drmpc/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <variant>
#include <vector>

namespace drmpc {

/// W_delta = (-d/(delta+c), inf); shrinks to W* = [0, inf) as delta grows.
struct LowerOpenInterval {
  double d = 1.0;
  double c = 1.25;
};

/// W_delta = (boundary(delta), inf) for a strictly increasing boundary with
/// limit `systemic_boundary`.
struct CustomFamily {
  std::function<double(double)> boundary;
  double systemic_boundary = 0.0;
};

class SystemicFamily {
 public:
  SystemicFamily(LowerOpenInterval f) : kind_(f) {  // NOLINT(google-explicit-constructor)
    detail::require(f.d > 0.0 && f.c > 0.0, "interval family needs d > 0 and c > 0");
  }
  SystemicFamily(CustomFamily f) : kind_(std::move(f)) {  // NOLINT(google-explicit-constructor)
    detail::require(static_cast<bool>(std::get<CustomFamily>(kind_).boundary),
                    "custom family needs a boundary function");
  }

  /// inf W_delta; delta = +inf yields the systemic boundary.
  double boundary(double delta) const {
    if (std::isinf(delta)) return systemic_boundary();
    if (const auto* f = std::get_if<LowerOpenInterval>(&kind_)) return -f->d / (delta + f->c);
    return std::get<CustomFamily>(kind_).boundary(delta);
  }

  double systemic_boundary() const {
    if (std::holds_alternative<LowerOpenInterval>(kind_)) return 0.0;
    return std::get<CustomFamily>(kind_).systemic_boundary;
  }

  bool contains(double delta, double value) const { return value > boundary(delta); }
  bool in_systemic_set(double value) const { return value >= systemic_boundary(); }

  const std::variant<LowerOpenInterval, CustomFamily>& kind() const { return kind_; }

 private:
  std::variant<LowerOpenInterval, CustomFamily> kind_;
};

struct Severity {
  double delta = 0.0;  // in [0, +inf]
};

struct RiskThreshold {
  double gamma = 0.0;
};

/// sup{delta | value in W_delta}, clamped at 0 for values outside W_0.
inline Severity severity(const SystemicFamily& family, double value) {
  if (family.in_systemic_set(value)) return {kInf};
  if (!family.contains(0.0, value)) return {0.0};
  if (const auto* f = std::get_if<LowerOpenInterval>(&family.kind())) {
    // value = -d/(delta + c)
    return {std::max(0.0, f->d / (-value) - f->c)};
  }
  // Custom boundary: bracket and bisect boundary(delta) = value.
  double lo = 0.0;
  double hi = 1.0;
  while (family.boundary(hi) < value) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return {kInf};
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (family.boundary(mid) < value ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi)};
}

/// gamma = inf{h | h in W_delta}; AV@R(h) outside W_delta iff AV@R(h) <= gamma.
inline RiskThreshold gamma_threshold(const SystemicFamily& family, double delta) {
  detail::require(delta >= 0.0, "severity must be nonnegative");
  return {family.boundary(delta)};
}

/// Mean of the generalized alpha-tail of the empirical distribution.
inline double empirical_avar(std::span<const double> samples, double alpha) {
  detail::require(!samples.empty(), "AV@R of an empty sample set");
  detail::require(alpha > 0.0 && alpha <= 1.0, "AV@R level must lie in (0, 1]");
  const double M = static_cast<double>(samples.size());
  if (alpha == 1.0) return std::accumulate(samples.begin(), samples.end(), 0.0) / M;
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end(), std::greater<>());

  const double tail = alpha * M;
  const auto whole = static_cast<std::size_t>(std::floor(tail));
  double sum = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(whole), 0.0);
  if (whole < x.size()) sum += (tail - static_cast<double>(whole)) * x[whole];
  return sum / tail;
}

/// min{z | F(z) >= 1 - alpha} of the empirical distribution.
inline double empirical_var(std::span<const double> samples, double alpha) {
  detail::require(!samples.empty(), "V@R of an empty sample set");
  detail::require(alpha > 0.0 && alpha <= 1.0, "V@R level must lie in (0, 1]");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double M = static_cast<double>(x.size());
  // Smallest k with k/M >= 1 - alpha; the slack absorbs rounding in (1-alpha)M.
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * M - 1e-9));
  k = std::clamp<std::size_t>(k, 1, x.size());
  return x[k - 1];
}

}  // namespace drmpc
