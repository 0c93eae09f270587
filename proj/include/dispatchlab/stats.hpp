#pragma once

#include <cstddef>
#include <vector>

namespace dispatchlab::stats {

// Summary of one benchmark sample series: mean ± std, 95% CI (t-distribution),
// coefficient of variation.
struct SummaryStats {
    size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // sample std, n-1 denominator
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    double cv_percent = 0.0;  // std/mean*100 when mean > 0
};

struct WelchResult {
    double t_stat = 0.0;
    double df = 0.0;  // Welch-Satterthwaite
    double p_two_tailed = 1.0;
    bool degenerate = false;  // both variances zero
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Absolute accuracy ~1e-10 for the parameter ranges used here.
double incomplete_beta(double a, double b, double x);

// Student-t CDF P(T_df <= t).
double student_t_cdf(double t, double df);

// Two-sided upper 97.5% quantile of Student-t, i.e. t such that CDF(t) = 0.975.
double student_t_975(double df);

// Mean/std/CI95/CV. Throws Errc::TooFewSamples for n < 2.
SummaryStats summarize(const std::vector<double>& samples);

// Welch's two-sample t-test, two-tailed p. Throws Errc::TooFewSamples if either
// side has n < 2. Both variances zero: p = 1 if means equal, else p = 0 with
// the degenerate flag set.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dispatchlab::stats
