#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mtdml/errors.hpp"

namespace mtdml {

// Kahan-compensated sum: estimates stay permutation-stable to ~1e-15.
inline double compensated_sum(const std::vector<double>& v) {
  double sum = 0.0, carry = 0.0;
  for (double x : v) {
    const double t = x - carry;
    const double next = sum + t;
    carry = (next - sum) - t;
    sum = next;
  }
  return sum;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return compensated_sum(v) / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator).
inline double sd(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return std::sqrt(compensated_sum(sq) / static_cast<double>(n - 1));
}

// Linear-interpolation quantile (R type 7) on a copy of the data.
// q in [0,1]; q=0 -> min, q=1 -> max.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ParameterError("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw ParameterError("quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  if (lo == hi) return v[lo];
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided p-value for a z/t statistic under the normal approximation.
inline double two_sided_p(double stat) {
  if (!std::isfinite(stat)) return 0.0;
  return 2.0 * (1.0 - normal_cdf(std::fabs(stat)));
}

struct TTest {
  double mean = 0.0;
  double se = 0.0;
  double stat = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool degenerate = false;  // zero variance
};

// One-sample t-test of H0: E[x] = 0 (normal approximation for the p-value).
inline TTest one_sample_t(const std::vector<double>& x) {
  TTest t;
  t.n = x.size();
  if (t.n < 2) throw ParameterError("one_sample_t: need at least 2 observations");
  t.mean = mean(x);
  const double s = sd(x);
  t.se = s / std::sqrt(static_cast<double>(t.n));
  if (t.se == 0.0) {
    t.degenerate = true;
    t.stat = 0.0;
    t.p_value = 1.0;
    return t;
  }
  t.stat = t.mean / t.se;
  t.p_value = two_sided_p(t.stat);
  return t;
}

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd se_hc1;      // heteroscedasticity-robust (HC1)
  Eigen::VectorXd residuals;
  std::size_t n = 0;
  std::size_t k = 0;
};

// OLS with HC1 sandwich standard errors. X must include the intercept column
// if one is wanted. Rank-deficient designs are solved in the least-squares
// sense via column-pivoted QR; SEs for dropped directions are not meaningful.
inline OlsFit ols_hc1(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  const std::size_t k = static_cast<std::size_t>(X.cols());
  if (n < k) throw ParameterError("ols_hc1: more columns than rows");
  OlsFit fit;
  fit.n = n;
  fit.k = k;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  fit.coef = qr.solve(y);
  fit.residuals = y - X * fit.coef;

  const Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::MatrixXd xtx_inv = xtx.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double e2 = fit.residuals(static_cast<Eigen::Index>(i)) *
                      fit.residuals(static_cast<Eigen::Index>(i));
    meat.noalias() += e2 * X.row(static_cast<Eigen::Index>(i)).transpose() *
                      X.row(static_cast<Eigen::Index>(i));
  }
  const double hc1 = (n > k) ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;
  const Eigen::MatrixXd cov = hc1 * xtx_inv * meat * xtx_inv;
  fit.se_hc1 = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

}  // namespace mtdml
