#pragma once

#include "ssm/types.hpp"

namespace ssm {

// Regularized incomplete beta function I_x(a, b), continued-fraction
// evaluation, absolute accuracy well below 1e-10 for moderate a, b.
double incomplete_beta(double a, double b, double x);

// Two-tailed p-value of Student's t with dof degrees of freedom.
double student_t_p_value(double t, int dof);

struct TTestResult {
  double t = 0.0;
  int dof = 0;
  double p = 1.0;
  double mean_difference = 0.0;
};

// Paired two-tailed t-test on matched samples. Zero-variance differences give
// p = 1 when the mean difference is also zero, otherwise p = 0.
TTestResult paired_t_test(const VecX& a, const VecX& b);

double pearson_correlation(const VecX& x, const VecX& y);

}  // namespace ssm
