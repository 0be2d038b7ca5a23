#include "ssm/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace ssm {

namespace {

// Continued fraction for the incomplete beta function, modified Lentz method.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_p_value(double t, int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_p_value: dof must be positive");
  if (std::isinf(t)) return 0.0;
  double nu = static_cast<double>(dof);
  double x = nu / (nu + t * t);
  return incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult paired_t_test(const VecX& a, const VecX& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: samples differ in length");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least two pairs");
  VecX d = a - b;
  double mean = d.mean();
  double ss = (d.array() - mean).square().sum();
  double sd = std::sqrt(ss / (n - 1));
  TTestResult result;
  result.dof = n - 1;
  result.mean_difference = mean;
  if (sd < 1e-300) {
    // constant differences: no detectable bias when the shared offset is at
    // rounding level relative to the measurements themselves
    double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    bool null = std::abs(mean) <= 1e-9 * std::max(1.0, scale);
    result.t = null ? 0.0 : std::numeric_limits<double>::infinity();
    result.p = null ? 1.0 : 0.0;
    return result;
  }
  result.t = mean / (sd / std::sqrt(double(n)));
  result.p = student_t_p_value(result.t, result.dof);
  return result;
}

double pearson_correlation(const VecX& x, const VecX& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_correlation: vectors differ in length");
  if (x.size() < 2) throw std::invalid_argument("pearson_correlation: need at least two points");
  double mx = x.mean(), my = y.mean();
  double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  double sxx = (x.array() - mx).square().sum();
  double syy = (y.array() - my).square().sum();
  if (sxx < 1e-300 || syy < 1e-300)
    throw std::invalid_argument("pearson_correlation: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ssm
