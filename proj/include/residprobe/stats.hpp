#pragma once

#include <vector>

#include "residprobe/common.hpp"

namespace residprobe {

// Exact two-sided binomial test against p = 0.5: sums the point probabilities
// of all outcomes no more likely than the observed one.
double binom_test(int k, int n);

struct Correlation {
    double r = 0.0;
    double ci_low = 0.0;  // Fisher z, 95%
    double ci_high = 0.0;
    int n = 0;
};

Correlation pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

struct LogisticFit {
    double intercept = 0.0;
    double slope = 0.0;
    double odds_ratio = 0.0; // exp(slope); +inf when separated
    bool separated = false;
    bool converged = false;
    int iterations = 0;
};

// Univariate logistic regression of y (in [0,1]) on x, fit by iteratively
// reweighted least squares: <= 50 iterations, tolerance 1e-8 on the step.
LogisticFit logistic_regression(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

} // namespace residprobe
