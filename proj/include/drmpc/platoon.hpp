#pragma once

// Integrator platoon case study: x_{t+1} = x_t + u_{t-tau} + w_t for n vehicles
// on a line, spacing cost, total-spacing constraint g and pair constraints h_t.
//
// Orientation: vehicle i+1 sits ahead of vehicle i, so the spacing of pair i is
// x^(i+1) - x^(i) with target d; a collision is x^(i) - x^(i+1) >= 0.

#include "drmpc/disturbance.hpp"
#include "drmpc/drmpc.hpp"
#include "drmpc/lti_compact.hpp"
#include "drmpc/pwa.hpp"
#include "drmpc/rng.hpp"
#include "drmpc/systemic_risk.hpp"

#include <random>
#include <string>
#include <vector>

namespace drmpc::platoon {

struct PlatoonScenario {
  int n = 6;
  int T = 5;
  int tau = 0;
  double d = 1.0;
  double c = 1.25;
  double input_weight = 0.04;
  double gamma1 = 12.5;
  int j = 1;  // monitored pair, 1-based
  double alpha = 0.5;
  double delta = 0.0;
  Index N = 50;
  double noise_variance = 0.05;
  double radius = 0.02;
  double spacing_lo = 0.5;  // box for the unmonitored initial spacings
  double spacing_hi = 1.5;
  PrefixPolicy prefix_policy = PrefixPolicy::Systemic;

  void validate() const {
    detail::require(n >= 2, "platoon needs at least two vehicles");
    detail::require(T >= 1, "horizon must be positive");
    detail::require(tau >= 0 && tau <= T - 1, "delay must satisfy 0 <= tau <= T-1");
    detail::require(j >= 1 && j <= n - 1, "monitored pair j must lie in 1..n-1, got " + std::to_string(j));
    detail::require(d > 0.0 && c > 0.0, "family constants must be positive");
    detail::require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    detail::require(delta >= 0.0, "severity must be nonnegative");
    detail::require(N >= 1, "need at least one sample");
    detail::require(noise_variance >= 0.0, "noise variance must be nonnegative");
    detail::require(radius >= 0.0, "radius must be nonnegative");
    detail::require(input_weight >= 0.0, "input weight must be nonnegative");
    detail::require(spacing_lo <= spacing_hi, "spacing box is empty");
  }

  LowerOpenInterval family() const { return {d, c}; }
};

inline DelayedLtiSystem make_system(const PlatoonScenario& s) {
  const Matrix I = Matrix::Identity(s.n, s.n);
  return {I, I, s.tau, s.T};
}

/// T x nT matrix whose row t picks x^(i+1)_t - x^(i)_t (i is 1-based).
inline Matrix pair_selector(int n, int T, int i) {
  detail::require(i >= 1 && i <= n - 1, "pair index must lie in 1..n-1");
  Matrix C = Matrix::Zero(T, static_cast<Index>(n) * T);
  for (int t = 0; t < T; ++t) {
    C(t, static_cast<Index>(t) * n + i) = 1.0;
    C(t, static_cast<Index>(t) * n + i - 1) = -1.0;
  }
  return C;
}

/// sum_i ||C_i y - 1_T||_1 + weight ||u_e||_1
inline PwaFunction spacing_cost(const PlatoonScenario& s, const ZPartition& part) {
  const Index ny = static_cast<Index>(s.n) * s.T;
  const Index nz = part.size();
  OneNormComposite f;
  for (int i = 1; i <= s.n - 1; ++i) {
    const Matrix C = pair_selector(s.n, s.T, i);
    for (int t = 0; t < s.T; ++t) f.terms.push_back({C.row(t).transpose(), Vector::Zero(nz), -s.d});
  }
  if (s.input_weight > 0.0) {
    for (Index k = 0; k < part.u_e_size(); ++k) {
      Vector q = Vector::Zero(nz);
      q[part.u_e_offset() + k] = s.input_weight;
      f.terms.push_back({Vector::Zero(ny), q, 0.0});
    }
  }
  f.tail = {Vector::Zero(ny), Vector::Zero(nz), 0.0};
  return {f, ny, nz};
}

/// g = -sum_i 1' C_i y + gamma1
inline PwaFunction total_spacing_constraint(const PlatoonScenario& s, const ZPartition& part) {
  Vector a = Vector::Zero(static_cast<Index>(s.n) * s.T);
  for (int i = 1; i <= s.n - 1; ++i) a -= pair_selector(s.n, s.T, i).colwise().sum().transpose();
  return PwaFunction::affine(a, Vector::Zero(part.size()), s.gamma1);
}

/// h_t = -e_t' C_j y for t = 1..T
inline std::vector<PwaFunction> pair_constraints(const PlatoonScenario& s, const ZPartition& part) {
  const Matrix C = pair_selector(s.n, s.T, s.j);
  std::vector<PwaFunction> h;
  for (int t = 0; t < s.T; ++t) h.push_back(PwaFunction::affine(-C.row(t).transpose(), Vector::Zero(part.size()), 0.0));
  return h;
}

inline std::vector<Vector> zero_inputs(const PlatoonScenario& s) {
  return std::vector<Vector>(static_cast<std::size_t>(s.tau + 1), Vector::Zero(s.n));
}

inline DrmpcProblem build_scenario(const PlatoonScenario& s, ScenarioSet scenarios, Vector x0,
                                   std::vector<Vector> u_init) {
  s.validate();
  const auto cf = build_compact(make_system(s));
  const auto& part = cf.partition;
  DrmpcProblem p{cf,
                 std::move(scenarios),
                 s.radius,
                 s.alpha,
                 std::nullopt,
                 spacing_cost(s, part),
                 total_spacing_constraint(s, part),
                 pair_constraints(s, part),
                 SystemicFamily(s.family()),
                 s.delta,
                 {},
                 s.prefix_policy,
                 std::move(x0),
                 std::move(u_init),
                 std::nullopt,
                 std::nullopt};
  p.validate();
  return p;
}

inline DrmpcProblem build_scenario(const PlatoonScenario& s, ScenarioSet scenarios, Vector x0) {
  return build_scenario(s, std::move(scenarios), std::move(x0), zero_inputs(s));
}

/// Positions with vehicle 1 at 0; pair j spacing d/(delta+c) so that the
/// severity of h_0 = x^(j) - x^(j+1) equals delta; the rest uniform on the box.
inline Vector initial_state_with_failure(const PlatoonScenario& s, std::mt19937_64& rng) {
  s.validate();
  std::uniform_real_distribution<double> u(s.spacing_lo, s.spacing_hi);
  Vector x = Vector::Zero(s.n);
  for (int i = 1; i < s.n; ++i) {
    const double gap = u(rng);
    x[i] = x[i - 1] + (i == s.j ? s.d / (s.delta + s.c) : gap);
  }
  return x;
}

inline ScenarioSet sample_residuals(const PlatoonScenario& s, std::uint64_t seed, int threads = 1) {
  NoiseModel noise{s.noise_variance, seed};
  return sample_trajectories(make_system(s), noise, s.N, InputBox{}, threads);
}

}  // namespace drmpc::platoon
