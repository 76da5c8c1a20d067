#pragma once

#include <vector>

namespace shf::stats {

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

// Chi-square CDF / quantile with `dof` degrees of freedom.
double chi2_cdf(double x, double dof);
double chi2_quantile(double p, double dof);

// Two-sided probability mass of the +-n_sigma interval of a standard normal,
// e.g. 3 -> 0.9973...
double sigma_probability(double n_sigma);

// Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 l^2).
double kolmogorov_q(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

// One-sample KS test of `samples` against the chi-square(dof) CDF.
KsResult ks_chi2(std::vector<double> samples, double dof);

// KS test against U(0,1).
KsResult ks_uniform01(std::vector<double> samples);

double sample_mean(const std::vector<double>& x);
double sample_variance(const std::vector<double>& x);
double sample_skewness(const std::vector<double>& x);

// Spearman rank correlation of two equally sized sequences.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace shf::stats
