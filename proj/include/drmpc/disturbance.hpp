#pragma once

// Identification runs, residual scenarios, Wasserstein radius and a discrete
// type-1 Wasserstein distance under the 1-norm ground metric.

#include "drmpc/lp/auto.hpp"
#include "drmpc/lti_compact.hpp"
#include "drmpc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace drmpc {

/// i.i.d. zero-mean Gaussian noise per coordinate; used by the truth simulator only.
struct NoiseModel {
  double variance = 0.05;
  std::uint64_t seed = 0;

  Vector draw(Index dim, std::mt19937_64& rng) const {
    detail::require(variance >= 0.0, "noise variance must be nonnegative");
    if (variance == 0.0) return Vector::Zero(dim);
    std::normal_distribution<double> nd(0.0, std::sqrt(variance));
    Vector w(dim);
    for (Index i = 0; i < dim; ++i) w[i] = nd(rng);
    return w;
  }
};

/// Identification inputs and initial states drawn uniform on [lo, hi].
struct InputBox {
  double lo = -1.0;
  double hi = 1.0;
};

struct ScenarioSet {
  std::vector<Vector> residuals;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(residuals.size()); }
  Index dim() const { return residuals.empty() ? 0 : residuals.front().size(); }

  void validate() const {
    detail::require(!residuals.empty(), "scenario set must hold at least one residual");
    for (const auto& r : residuals) detail::require_dim(r.size() == dim(), "residuals differ in length");
  }
};

namespace detail {

// A_bar z evaluated by the noiseless recursion, so zero noise leaves exactly zero residuals.
inline Vector nominal(const DelayedLtiSystem& sys, const DecisionVector& z) {
  return propagate_truth(sys, z, Vector::Zero(sys.state_dim() * sys.horizon())).y;
}

}  // namespace detail

/// Residuals xi_i = y_i - A_bar z_i from N runs; z_i and w_i come from the callbacks.
inline ScenarioSet sample_trajectories(const DelayedLtiSystem& system, Index N,
                                       const std::function<Vector(Index)>& z_of_run,
                                       const std::function<Vector(Index)>& w_of_run) {
  detail::require(N >= 1, "need at least one identification run");
  const auto sys = system.with_delay(0);
  const auto cf = build_compact(sys);
  ScenarioSet out;
  out.residuals.resize(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) {
    const DecisionVector z(cf.partition, z_of_run(i));
    const auto y = propagate_truth(sys, z, w_of_run(i));
    out.residuals[static_cast<std::size_t>(i)] = y.y - detail::nominal(sys, z);
  }
  return out;
}

/// Identification with tau = 0, random inputs on the box and per-run streams.
inline ScenarioSet sample_trajectories(const DelayedLtiSystem& system, const NoiseModel& noise, Index N,
                                       const InputBox& box = {}, int threads = 1) {
  detail::require(N >= 1, "need at least one identification run");
  detail::require(box.lo <= box.hi, "input box lower bound exceeds upper bound");
  const auto sys = system.with_delay(0);
  const auto cf = build_compact(sys);
  const Index nz = cf.partition.size();
  const Index nw = sys.state_dim() * sys.horizon();
  ScenarioSet out;
  out.seed = noise.seed;
  out.residuals.resize(static_cast<std::size_t>(N));
  auto run = [&](Index i) {
    auto rng = make_stream(noise.seed, StreamKind::Identification, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(box.lo, box.hi);
    Vector z(nz);
    for (Index k = 0; k < nz; ++k) z[k] = u(rng);
    const Vector w = noise.draw(nw, rng);
    const DecisionVector zd(cf.partition, z);
    out.residuals[static_cast<std::size_t>(i)] = propagate_truth(sys, zd, w).y - detail::nominal(sys, zd);
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(N)));
  if (nt == 1) {
    for (Index i = 0; i < N; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        for (Index i = t; i < N; i += nt) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

/// y_bar_i = A_bar z + xi_i
inline std::vector<Vector> shifted_scenarios(const ScenarioSet& s, const CompactForm& cf, const Vector& z) {
  detail::require_dim(z.size() == cf.A_bar.cols(), "z length does not match the compact form");
  const Vector base = cf.A_bar * z;
  std::vector<Vector> out;
  out.reserve(s.residuals.size());
  for (const auto& r : s.residuals) {
    detail::require_dim(r.size() == base.size(), "residual length does not match nT");
    out.push_back(base + r);
  }
  return out;
}

struct AmbiguityConfig {
  double epsilon = 0.95;
  double beta = 2.0;
  double c1 = 2.0;
  double c2 = 1.0;
  std::optional<double> direct_radius;

  static AmbiguityConfig direct(double r) {
    AmbiguityConfig c;
    c.direct_radius = r;
    return c;
  }

  void validate() const {
    if (direct_radius) {
      detail::require(*direct_radius >= 0.0 && std::isfinite(*direct_radius), "radius must be finite and >= 0");
      return;
    }
    detail::require(epsilon > 0.0 && epsilon < 1.0, "confidence epsilon must lie in (0, 1)");
    detail::require(beta > 1.0, "tail exponent beta must exceed 1");
    detail::require(c1 > 0.0 && c2 > 0.0, "concentration constants must be positive");
  }
};

/// Radius guaranteeing P(W1 <= r) >= epsilon from the light-tail concentration bound.
inline double radius(const AmbiguityConfig& cfg, Index N, Index dim) {
  cfg.validate();
  if (cfg.direct_radius) return *cfg.direct_radius;
  detail::require(N >= 1 && dim >= 1, "radius needs N >= 1 and dim >= 1");
  const double ratio = cfg.c1 / (1.0 - cfg.epsilon);
  if (!(ratio > 1.0)) throw DomainError("confidence unreachable with given c1");
  const double rho = std::log(ratio) / (cfg.c2 * static_cast<double>(N));
  return rho <= 1.0 ? std::pow(rho, 1.0 / static_cast<double>(dim)) : std::pow(rho, 1.0 / cfg.beta);
}

struct WeightedPoints {
  std::vector<Vector> points;
  std::vector<double> weights;

  static WeightedPoints uniform(std::vector<Vector> pts) {
    WeightedPoints w;
    w.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
    w.points = std::move(pts);
    return w;
  }
};

/// Type-1 Wasserstein distance via the transportation LP.
inline double w1_discrete(const WeightedPoints& P, const WeightedPoints& Q, const lp::LpSolver& solver) {
  detail::require(!P.points.empty() && !Q.points.empty(), "empty measure");
  detail::require_dim(P.points.size() == P.weights.size() && Q.points.size() == Q.weights.size(),
                      "points and weights differ in count");
  double sp = 0.0;
  double sq = 0.0;
  for (double w : P.weights) {
    detail::require(w >= 0.0, "negative weight");
    sp += w;
  }
  for (double w : Q.weights) {
    detail::require(w >= 0.0, "negative weight");
    sq += w;
  }
  detail::require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9, "weights must each sum to 1");
  const Index dim = P.points.front().size();
  for (const auto* m : {&P, &Q})
    for (const auto& x : m->points) detail::require_dim(x.size() == dim, "points differ in dimension");

  const auto np = static_cast<Index>(P.points.size());
  const auto nq = static_cast<Index>(Q.points.size());
  lp::LpBuilder b;
  for (Index i = 0; i < np; ++i)
    for (Index j = 0; j < nq; ++j)
      b.add_variable((P.points[static_cast<std::size_t>(i)] - Q.points[static_cast<std::size_t>(j)]).lpNorm<1>(), 0.0,
                     kInf);
  for (Index i = 0; i < np; ++i) {
    std::vector<lp::LinearTerm> t;
    for (Index j = 0; j < nq; ++j) t.push_back({i * nq + j, 1.0});
    b.add_eq(t, P.weights[static_cast<std::size_t>(i)]);
  }
  for (Index j = 0; j < nq; ++j) {
    std::vector<lp::LinearTerm> t;
    for (Index i = 0; i < np; ++i) t.push_back({i * nq + j, 1.0});
    b.add_eq(t, Q.weights[static_cast<std::size_t>(j)]);
  }
  const auto sol = solver.solve(b.build());
  if (!sol.optimal()) throw std::runtime_error(std::string("transport LP failed: ") + lp::to_string(sol.status));
  return std::max(0.0, sol.objective);
}

inline double w1_discrete(const WeightedPoints& P, const WeightedPoints& Q) {
  return w1_discrete(P, Q, lp::AutoSolver());
}

namespace detail {

// Min-cost perfect matching (Hungarian method, O(n^3)).
inline double assignment_cost(const Matrix& C) {
  const Index n = C.rows();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = C(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double cost = 0.0;
  for (Index j = 1; j <= n; ++j) cost += C(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return cost;
}

}  // namespace detail

/// W1 between uniform empirical measures of equal size: an optimal plan is a
/// permutation, so the transport LP reduces to an assignment problem.
inline double w1_uniform(const std::vector<Vector>& P, const std::vector<Vector>& Q) {
  detail::require(!P.empty() && P.size() == Q.size(), "w1_uniform needs equal, nonzero sizes");
  const auto n = static_cast<Index>(P.size());
  Matrix C(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) C(i, j) = (P[static_cast<std::size_t>(i)] - Q[static_cast<std::size_t>(j)]).lpNorm<1>();
  return std::max(0.0, detail::assignment_cost(C) / static_cast<double>(n));
}

/// epsilon-quantile of W1 between pairs of independent bootstrap resamples.
inline double bootstrap_radius(const ScenarioSet& s, double epsilon, int resamples, std::uint64_t seed) {
  s.validate();
  detail::require(epsilon > 0.0 && epsilon < 1.0, "confidence epsilon must lie in (0, 1)");
  detail::require(resamples >= 1, "need at least one bootstrap resample");
  const auto N = static_cast<std::size_t>(s.size());
  std::vector<double> d(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    auto rng = make_stream(seed, StreamKind::Bootstrap, static_cast<std::uint64_t>(b));
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    std::vector<Vector> first(N);
    std::vector<Vector> second(N);
    for (auto& x : first) x = s.residuals[pick(rng)];
    for (auto& x : second) x = s.residuals[pick(rng)];
    d[static_cast<std::size_t>(b)] = w1_uniform(first, second);
  }
  std::sort(d.begin(), d.end());
  const auto k = static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(resamples) - 1e-9));
  return d[std::clamp<std::size_t>(k, 1, d.size()) - 1];
}

/// Lemma-1 constants with c1 fixed and c2 chosen so that radius() reproduces
/// the bootstrap quantile at this N.
inline AmbiguityConfig calibrate_constants(const ScenarioSet& s, double epsilon, double beta, double c1,
                                           int resamples, std::uint64_t seed) {
  detail::require(c1 > 1.0 - epsilon, "confidence unreachable with given c1");
  const double r = std::max(bootstrap_radius(s, epsilon, resamples, seed), 1e-12);
  const double dim = static_cast<double>(s.dim());
  const double rho = r <= 1.0 ? std::pow(r, dim) : std::pow(r, beta);
  AmbiguityConfig cfg;
  cfg.epsilon = epsilon;
  cfg.beta = beta;
  cfg.c1 = c1;
  cfg.c2 = std::log(c1 / (1.0 - epsilon)) / (static_cast<double>(s.size()) * rho);
  return cfg;
}

inline void write_residuals(std::ostream& os, const ScenarioSet& s) {
  s.validate();
  os << "# residuals N=" << s.size() << " dim=" << s.dim() << " seed=" << s.seed << '\n';
  os << std::fixed << std::setprecision(17);
  for (const auto& r : s.residuals) {
    for (Index k = 0; k < r.size(); ++k) os << (k ? " " : "") << r[k];
    os << '\n';
  }
}

inline ScenarioSet read_residuals(std::istream& is) {
  ScenarioSet s;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("seed=");
      if (pos != std::string::npos) s.seed = std::stoull(line.substr(pos + 5));
      continue;
    }
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw std::runtime_error("malformed residual row: " + line);
    s.residuals.push_back(Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size())));
  }
  s.validate();
  return s;
}

inline void save_residuals(const std::string& path, const ScenarioSet& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_residuals(os, s);
}

inline ScenarioSet load_residuals(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_residuals(is);
}

}  // namespace drmpc
