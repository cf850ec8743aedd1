#include "drmpc/systemic_risk.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

using namespace drmpc;

namespace {

const SystemicFamily kFamily{LowerOpenInterval{1.0, 1.25}};

// Rockafellar-Uryasev: min_z z + E[(Y - z)^+] / alpha; the minimizer is a sample.
double ru_oracle(const std::vector<double>& x, double alpha) {
  double best = kInf;
  for (double z : x) {
    double s = 0.0;
    for (double v : x) s += std::max(v - z, 0.0);
    best = std::min(best, z + s / (alpha * static_cast<double>(x.size())));
  }
  return best;
}

}  // namespace

TEST(Severity, SpecExamples) {
  EXPECT_NEAR(severity(kFamily, -0.5).delta, 0.75, 1e-12);
  EXPECT_EQ(severity(kFamily, -0.8).delta, 0.0);
  EXPECT_EQ(severity(kFamily, -3.0).delta, 0.0);
  EXPECT_EQ(severity(kFamily, 0.1).delta, kInf);
  EXPECT_EQ(severity(kFamily, 0.0).delta, kInf);
}

TEST(Severity, CustomFamilyBisection) {
  const SystemicFamily fam{CustomFamily{[](double d) { return -1.0 / (d + 1.25); }, 0.0}};
  EXPECT_NEAR(severity(fam, -0.5).delta, 0.75, 1e-10);
  EXPECT_EQ(severity(fam, -0.9).delta, 0.0);
  EXPECT_EQ(severity(fam, 0.2).delta, kInf);
}

TEST(GammaThreshold, SpecExamples) {
  EXPECT_DOUBLE_EQ(gamma_threshold(kFamily, 0.0).gamma, -0.8);
  EXPECT_DOUBLE_EQ(gamma_threshold(kFamily, 0.75).gamma, -0.5);
  EXPECT_NEAR(gamma_threshold(kFamily, 1e12).gamma, 0.0, 1e-11);
  EXPECT_EQ(gamma_threshold(kFamily, kInf).gamma, 0.0);
  EXPECT_THROW(gamma_threshold(kFamily, -0.1), DomainError);
}

TEST(GammaThreshold, Nestedness) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(0.3);
  for (int k = 0; k < 1000; ++k) {
    double a = ex(rng);
    double b = ex(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const double ga = gamma_threshold(kFamily, a).gamma;
    const double gb = gamma_threshold(kFamily, b).gamma;
    EXPECT_LT(ga, gb);
    EXPECT_LT(gb, 0.0);
  }
}

TEST(GammaThreshold, SeverityRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.8 + 1e-9, -1e-9);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng);
    EXPECT_NEAR(gamma_threshold(kFamily, severity(kFamily, v).delta).gamma, v, 1e-12);
  }
}

TEST(EmpiricalAvar, SpecExamples) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(empirical_avar(x, 0.5), 3.5);
  EXPECT_DOUBLE_EQ(empirical_avar(x, 0.25), 4.0);
  EXPECT_DOUBLE_EQ(empirical_avar(x, 1.0), 2.5);
  EXPECT_THROW(empirical_avar(std::vector<double>{}, 0.5), DomainError);
  EXPECT_THROW(empirical_avar(x, 0.0), DomainError);
}

TEST(EmpiricalVar, SpecExamples) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(empirical_var(x, 0.25), 3.0);
  EXPECT_DOUBLE_EQ(empirical_var(x, 0.999), 1.0);
  for (double a : {0.1, 0.5, 0.9, 1.0}) EXPECT_DOUBLE_EQ(empirical_var(std::vector<double>{5, 5, 5}, a), 5.0);
  EXPECT_THROW(empirical_var(std::vector<double>{}, 0.5), DomainError);
}

TEST(EmpiricalAvar, RockafellarUryasevOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 40);
  std::uniform_real_distribution<double> level(0.01, 1.0);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> x(static_cast<std::size_t>(size(rng)));
    for (double& v : x) v = nd(rng);
    const double alpha = level(rng);
    EXPECT_NEAR(empirical_avar(x, alpha), ru_oracle(x, alpha), 1e-9);
  }
}

TEST(EmpiricalAvar, Orderings) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> x(25);
    for (double& v : x) v = nd(rng);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= 25.0;
    EXPECT_EQ(empirical_avar(x, 1.0), mean);
    double prev = kInf;
    for (double a = 0.02; a <= 1.0; a += 0.02) {
      const double av = empirical_avar(x, a);
      EXPECT_GE(av, empirical_var(x, a) - 1e-12);
      EXPECT_LE(av, prev + 1e-12);
      prev = av;
    }
  }
}
