#pragma once

#include <vector>

namespace wsopt {

struct WelchResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  bool degenerate = false;  // both samples had zero variance
};

/// Regularized incomplete beta I_x(a,b) via the Lentz continued fraction,
/// accurate to ~1e-10 in the interior.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

/**
 * Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom
 * and a two-sided p-value. Throws std::invalid_argument when either sample has
 * fewer than 2 points. Zero variance in both samples is flagged degenerate:
 * p = 1 for equal means, p = 0 otherwise.
 */
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);  // unbiased (n-1)

}  // namespace wsopt
