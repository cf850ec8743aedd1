#pragma once

// Convex piecewise-affine functions f(y, z) in two representations, their
// Lipschitz constant in y and LP epigraph encodings.

#include "drmpc/core.hpp"
#include "drmpc/lp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

namespace drmpc {

struct AffinePiece {
  Vector a;  // on y
  Vector b;  // on z
  double c = 0.0;
};

struct MaxOfPieces {
  std::vector<AffinePiece> pieces;
};

/// sum_k |p_k.y + q_k.z + r_k| + tail(y, z)
struct OneNormComposite {
  struct Term {
    Vector p;
    Vector q;
    double r = 0.0;
  };
  std::vector<Term> terms;
  AffinePiece tail;
};

struct LipschitzCoefficient {
  double value = 0.0;
};

class PwaFunction {
 public:
  PwaFunction(MaxOfPieces f, Index y_dim, Index z_dim)  // NOLINT
      : rep_(std::move(f)), y_dim_(y_dim), z_dim_(z_dim) {
    const auto& pieces = std::get<MaxOfPieces>(rep_).pieces;
    detail::require(!pieces.empty(), "MaxOfPieces needs at least one piece");
    for (const auto& p : pieces) check(p.a, p.b);
  }
  PwaFunction(OneNormComposite f, Index y_dim, Index z_dim)  // NOLINT
      : rep_(std::move(f)), y_dim_(y_dim), z_dim_(z_dim) {
    const auto& f2 = std::get<OneNormComposite>(rep_);
    for (const auto& t : f2.terms) check(t.p, t.q);
    check(f2.tail.a, f2.tail.b);
  }

  static PwaFunction affine(Vector a, Vector b, double c) {
    const Index ny = a.size();
    const Index nz = b.size();
    return {MaxOfPieces{{AffinePiece{std::move(a), std::move(b), c}}}, ny, nz};
  }

  Index y_dim() const { return y_dim_; }
  Index z_dim() const { return z_dim_; }
  bool is_max_of_pieces() const { return std::holds_alternative<MaxOfPieces>(rep_); }
  const MaxOfPieces& pieces() const { return std::get<MaxOfPieces>(rep_); }
  const OneNormComposite& composite() const { return std::get<OneNormComposite>(rep_); }
  const std::variant<MaxOfPieces, OneNormComposite>& representation() const { return rep_; }

  /// f + k
  PwaFunction shifted(double k) const {
    PwaFunction out = *this;
    if (auto* m = std::get_if<MaxOfPieces>(&out.rep_)) {
      for (auto& p : m->pieces) p.c += k;
    } else {
      std::get<OneNormComposite>(out.rep_).tail.c += k;
    }
    return out;
  }

 private:
  void check(const Vector& a, const Vector& b) const {
    detail::require_dim(a.size() == y_dim_, "piece y-coefficient has length " + std::to_string(a.size()) +
                                                ", expected " + std::to_string(y_dim_));
    detail::require_dim(b.size() == z_dim_, "piece z-coefficient has length " + std::to_string(b.size()) +
                                                ", expected " + std::to_string(z_dim_));
  }

  std::variant<MaxOfPieces, OneNormComposite> rep_;
  Index y_dim_;
  Index z_dim_;
};

inline double evaluate(const PwaFunction& f, const Vector& y, const Vector& z) {
  detail::require_dim(y.size() == f.y_dim() && z.size() == f.z_dim(), "evaluate: argument length mismatch");
  if (f.is_max_of_pieces()) {
    double v = -kInf;
    for (const auto& p : f.pieces().pieces) v = std::max(v, p.a.dot(y) + p.b.dot(z) + p.c);
    return v;
  }
  const auto& g = f.composite();
  double v = g.tail.a.dot(y) + g.tail.b.dot(z) + g.tail.c;
  for (const auto& t : g.terms) v += std::abs(t.p.dot(y) + t.q.dot(z) + t.r);
  return v;
}

/// Lipschitz constant in y for the 1-norm ground metric (dual norm: inf-norm).
inline LipschitzCoefficient lipschitz_y(const PwaFunction& f) {
  if (f.is_max_of_pieces()) {
    double v = 0.0;
    for (const auto& p : f.pieces().pieces) v = std::max(v, p.a.size() ? p.a.lpNorm<Eigen::Infinity>() : 0.0);
    return {v};
  }
  // max over sign patterns of ||sum_k sigma_k p_k + a0||_inf; each coordinate
  // picks its own signs, so the max is attained coordinatewise.
  const auto& g = f.composite();
  Vector acc = g.tail.a.cwiseAbs();
  for (const auto& t : g.terms) acc += t.p.cwiseAbs();
  return {acc.size() ? acc.maxCoeff() : 0.0};
}

/// Explicit 2^K-piece form of a composite (oracle use; K <= 20).
inline PwaFunction expand_sign_patterns(const PwaFunction& f) {
  if (f.is_max_of_pieces()) return f;
  const auto& g = f.composite();
  const std::size_t K = g.terms.size();
  detail::require(K <= 20, "sign-pattern expansion limited to 20 terms");
  MaxOfPieces out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << K); ++mask) {
    AffinePiece p = g.tail;
    for (std::size_t k = 0; k < K; ++k) {
      const double s = (mask >> k) & 1U ? -1.0 : 1.0;
      p.a += s * g.terms[k].p;
      p.b += s * g.terms[k].q;
      p.c += s * g.terms[k].r;
    }
    out.pieces.push_back(std::move(p));
  }
  return {std::move(out), f.y_dim(), f.z_dim()};
}

/// y = y0 + Y x[vars], z = z0 + Z x[vars] for LP variables `vars`.
struct DecisionAffineMap {
  Vector y0;
  Matrix Y;
  Vector z0;
  Matrix Z;
  std::vector<Index> vars;
};

struct LinearExpr {
  std::vector<lp::LinearTerm> terms;
  double constant = 0.0;
};

namespace detail {

/// a.y + b.z + c as a linear expression in the LP variables.
inline LinearExpr substitute(const Vector& a, const Vector& b, double c, const DecisionAffineMap& m) {
  LinearExpr e;
  e.constant = a.dot(m.y0) + b.dot(m.z0) + c;
  if (!m.vars.empty()) {
    const Vector g = m.Y.transpose() * a + m.Z.transpose() * b;
    for (std::size_t k = 0; k < m.vars.size(); ++k)
      if (g[static_cast<Index>(k)] != 0.0) e.terms.push_back({m.vars[k], g[static_cast<Index>(k)]});
  }
  return e;
}

// lhs <= rhs as one builder row
inline Index add_le_row(lp::LpBuilder& lp, const LinearExpr& lhs, const LinearExpr& rhs, const std::string& name) {
  std::vector<lp::LinearTerm> t = lhs.terms;
  for (const auto& r : rhs.terms) t.push_back({r.var, -r.coef});
  return lp.add_le(t, rhs.constant - lhs.constant, name);
}

}  // namespace detail

/// True when f(y0 + Y u, z0 + Z u) has no u-dependence in any piece or term.
inline bool independent_of_decision(const PwaFunction& f, const DecisionAffineMap& m, double tol = 0.0) {
  if (m.vars.empty()) return true;
  auto flat = [&](const Vector& a, const Vector& b) {
    const Vector g = m.Y.transpose() * a + m.Z.transpose() * b;
    return g.lpNorm<Eigen::Infinity>() <= tol;
  };
  if (f.is_max_of_pieces()) {
    for (const auto& p : f.pieces().pieces)
      if (!flat(p.a, p.b)) return false;
    return true;
  }
  const auto& g = f.composite();
  if (!flat(g.tail.a, g.tail.b)) return false;
  for (const auto& t : g.terms)
    if (!flat(t.p, t.q)) return false;
  return true;
}

struct EpigraphInfo {
  Index first_row = 0;
  Index row_count = 0;
  Index first_aux = -1;  // auxiliary t_k variables (composite only)
  Index aux_count = 0;
};

/// Rows encoding f(y, z) <= bound at the given substitution.
inline EpigraphInfo epigraph_rows(lp::LpBuilder& lp, const PwaFunction& f, const DecisionAffineMap& m,
                                  const LinearExpr& bound, const std::string& tag = "epi") {
  detail::require_dim(m.y0.size() == f.y_dim() && m.z0.size() == f.z_dim(), "epigraph map dimension mismatch");
  EpigraphInfo info;
  info.first_row = lp.num_ineq();
  if (f.is_max_of_pieces()) {
    const auto& ps = f.pieces().pieces;
    for (std::size_t k = 0; k < ps.size(); ++k)
      detail::add_le_row(lp, detail::substitute(ps[k].a, ps[k].b, ps[k].c, m), bound,
                         tag + "_p" + std::to_string(k));
  } else {
    const auto& g = f.composite();
    const auto K = static_cast<Index>(g.terms.size());
    info.first_aux = K ? lp.add_variables(K, 0.0, -kInf, kInf, tag + "_t") : -1;
    info.aux_count = K;
    LinearExpr total = detail::substitute(g.tail.a, g.tail.b, g.tail.c, m);
    for (Index k = 0; k < K; ++k) {
      const auto& term = g.terms[static_cast<std::size_t>(k)];
      const LinearExpr e = detail::substitute(term.p, term.q, term.r, m);
      const LinearExpr tk{{{info.first_aux + k, 1.0}}, 0.0};
      LinearExpr neg{{}, -e.constant};
      for (const auto& t : e.terms) neg.terms.push_back({t.var, -t.coef});
      detail::add_le_row(lp, e, tk, tag + "_t" + std::to_string(k) + "p");
      detail::add_le_row(lp, neg, tk, tag + "_t" + std::to_string(k) + "n");
      total.terms.push_back({info.first_aux + k, 1.0});
    }
    detail::add_le_row(lp, total, bound, tag + "_sum");
  }
  info.row_count = lp.num_ineq() - info.first_row;
  return info;
}

}  // namespace drmpc
