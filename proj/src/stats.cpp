#include "residprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace residprobe {

double binom_test(int k, int n) {
    if (n < 1 || k < 0 || k > n) throw UsageError("binom_test: need 0 <= k <= n, n >= 1");
    // log pmf under p = 0.5: lchoose(n, i) - n log 2.
    std::vector<double> log_pmf(static_cast<size_t>(n) + 1);
    const double log2n = n * std::log(2.0);
    for (int i = 0; i <= n; ++i)
        log_pmf[static_cast<size_t>(i)] =
            std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - log2n;
    const double observed = log_pmf[static_cast<size_t>(k)];
    // Tiny slack absorbs lgamma rounding when comparing equal-probability tails.
    const double slack = 1e-9;
    double p = 0.0;
    for (int i = 0; i <= n; ++i)
        if (log_pmf[static_cast<size_t>(i)] <= observed + slack)
            p += std::exp(log_pmf[static_cast<size_t>(i)]);
    return std::min(1.0, p);
}

Correlation pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw UsageError("pearson_corr: length mismatch");
    const int n = static_cast<int>(x.size());
    if (n < 4) throw UsageError("pearson_corr: need at least 4 points");
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[static_cast<size_t>(i)];
        my += y[static_cast<size_t>(i)];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = x[static_cast<size_t>(i)] - mx;
        const double dy = y[static_cast<size_t>(i)] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UsageError("pearson_corr: zero variance input");
    Correlation c;
    c.n = n;
    c.r = sxy / std::sqrt(sxx * syy);
    c.r = std::clamp(c.r, -1.0, 1.0);
    if (n > 3 && std::abs(c.r) < 1.0) {
        const double z = std::atanh(c.r);
        const double half = 1.959963984540054 / std::sqrt(static_cast<double>(n - 3));
        c.ci_low = std::tanh(z - half);
        c.ci_high = std::tanh(z + half);
    } else {
        c.ci_low = c.ci_high = c.r;
    }
    return c;
}

LogisticFit logistic_regression(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw UsageError("logistic_regression: length mismatch");
    const size_t n = x.size();
    if (n < 2) throw UsageError("logistic_regression: need at least 2 points");
    for (double v : y)
        if (v < 0.0 || v > 1.0) throw UsageError("logistic_regression: responses must be in [0,1]");

    LogisticFit fit;
    double b0 = 0.0, b1 = 0.0;
    constexpr int kMaxIter = 50;
    constexpr double kTol = 1e-8;
    for (int iter = 1; iter <= kMaxIter; ++iter) {
        fit.iterations = iter;
        // Weighted normal equations for the Newton step.
        double s_w = 0.0, s_wx = 0.0, s_wxx = 0.0, s_r = 0.0, s_rx = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double eta = b0 + b1 * x[i];
            const double mu = 1.0 / (1.0 + std::exp(-eta));
            const double w = std::max(mu * (1.0 - mu), 1e-12);
            const double r = y[i] - mu;
            s_w += w;
            s_wx += w * x[i];
            s_wxx += w * x[i] * x[i];
            s_r += r;
            s_rx += r * x[i];
        }
        const double det = s_w * s_wxx - s_wx * s_wx;
        if (std::abs(det) < 1e-300) {
            fit.separated = true;
            break;
        }
        const double d0 = (s_wxx * s_r - s_wx * s_rx) / det;
        const double d1 = (s_w * s_rx - s_wx * s_r) / det;
        b0 += d0;
        b1 += d1;
        if (std::abs(b0) > 1e3 || std::abs(b1) > 1e3) {
            fit.separated = true;
            break;
        }
        if (std::abs(d0) < kTol && std::abs(d1) < kTol) {
            fit.converged = true;
            break;
        }
    }
    fit.intercept = b0;
    fit.slope = b1;
    if (fit.separated) {
        fit.odds_ratio = b1 >= 0 ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
        fit.odds_ratio = std::exp(b1);
    }
    return fit;
}

double median(std::vector<double> values) {
    if (values.empty()) throw UsageError("median of empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace residprobe
