#pragma once

// CPLEX LP text export for cross-checking with external solvers.

#include "drmpc/lp/problem.hpp"

#include <cctype>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace drmpc::lp {

namespace detail_format {

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char ch : name) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') ? ch : '_';
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "v" + out;
  return out;
}

inline void write_terms(std::ostream& os, const SparseMatrix& M, Index row,
                        const std::vector<std::string>& names) {
  bool first = true;
  for (SparseMatrix::InnerIterator it(M, row); it; ++it) {
    os << (it.value() < 0 ? " - " : (first ? " " : " + ")) << std::abs(it.value()) << ' '
       << names[static_cast<std::size_t>(it.col())];
    first = false;
  }
  if (first) os << " 0 " << names.front();
}

}  // namespace detail_format

inline void write_lp_format(std::ostream& os, const LpProblem& p) {
  using detail_format::sanitize;
  std::vector<std::string> names;
  for (Index j = 0; j < p.num_vars(); ++j)
    names.push_back(sanitize(j < static_cast<Index>(p.var_names.size()) ? p.var_names[static_cast<std::size_t>(j)]
                                                                          : "x" + std::to_string(j)));
  os << std::setprecision(17);
  os << "\\ objective offset " << p.objective_offset << "\nMinimize\n obj:";
  bool first = true;
  for (Index j = 0; j < p.num_vars(); ++j) {
    if (p.c[j] == 0.0) continue;
    os << (p.c[j] < 0 ? " - " : (first ? " " : " + ")) << std::abs(p.c[j]) << ' ' << names[static_cast<std::size_t>(j)];
    first = false;
  }
  if (first && p.num_vars() > 0) os << " 0 " << names.front();
  os << "\nSubject To\n";
  auto row_name = [](const std::vector<std::string>& v, Index i, const char* prefix) {
    return sanitize(i < static_cast<Index>(v.size()) ? v[static_cast<std::size_t>(i)] : prefix + std::to_string(i));
  };
  for (Index i = 0; i < p.num_ineq(); ++i) {
    os << ' ' << row_name(p.ineq_names, i, "g") << ':';
    detail_format::write_terms(os, p.G, i, names);
    os << " <= " << p.h[i] << '\n';
  }
  for (Index i = 0; i < p.num_eq(); ++i) {
    os << ' ' << row_name(p.eq_names, i, "e") << ':';
    detail_format::write_terms(os, p.A_eq, i, names);
    os << " = " << p.b_eq[i] << '\n';
  }
  os << "Bounds\n";
  for (Index j = 0; j < p.num_vars(); ++j) {
    const double lo = p.lower[j];
    const double up = p.upper[j];
    const auto& nm = names[static_cast<std::size_t>(j)];
    if (!std::isfinite(lo) && !std::isfinite(up)) os << ' ' << nm << " free\n";
    else if (!std::isfinite(lo)) os << " -inf <= " << nm << " <= " << up << '\n';
    else if (!std::isfinite(up)) os << ' ' << nm << " >= " << lo << '\n';
    else os << ' ' << lo << " <= " << nm << " <= " << up << '\n';
  }
  os << "End\n";
}

inline std::string to_lp_format(const LpProblem& p) {
  std::ostringstream os;
  write_lp_format(os, p);
  return os.str();
}

}  // namespace drmpc::lp
