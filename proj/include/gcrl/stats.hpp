#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

namespace gcrl {

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
    constexpr double kTiny = 1e-30;
    constexpr double kEps = 1e-15;
    constexpr int kMaxIter = 500;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("betacf: did not converge");
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("incomplete_beta: a, b > 0");
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                  a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of a t statistic with nu degrees of freedom.
inline double t_two_sided_p(double t, double nu) {
    if (nu <= 0.0) throw std::invalid_argument("t_two_sided_p: nu > 0");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

struct ComparisonResult {
    double mean_diff = 0.0; // mean(a) - mean(b)
    double t = 0.0;
    double dof = 0.0;
    double p = 1.0;
    bool significant = false; // p < 0.05
    bool degenerate = false;  // zero variance in both samples
};

/// Welch's unequal-variance two-sample t-test with Welch-Satterthwaite
/// degrees of freedom and a two-sided p-value.
inline ComparisonResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("welch_t_test: need at least 2 samples per side");
    auto mean_var = [](std::span<const double> s) {
        double mean = 0.0;
        for (double v : s) {
            if (!std::isfinite(v)) throw std::invalid_argument("welch_t_test: non-finite sample");
            mean += v;
        }
        mean /= static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size() - 1);
        return std::pair{mean, var};
    };
    const auto [ma, va] = mean_var(a);
    const auto [mb, vb] = mean_var(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    ComparisonResult res;
    res.mean_diff = ma - mb;
    const double se2 = va / na + vb / nb;
    if (se2 == 0.0) {
        // identical-variance-free samples: no evidence either way
        res.degenerate = true;
        if (ma == mb) {
            res.t = 0.0;
            res.p = 1.0;
        } else {
            res.t = res.mean_diff > 0 ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
            res.p = 0.0;
        }
        res.dof = na + nb - 2.0;
        res.significant = res.p < 0.05;
        return res;
    }
    res.t = res.mean_diff / std::sqrt(se2);
    res.dof = se2 * se2 /
              ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    res.p = t_two_sided_p(res.t, res.dof);
    res.significant = res.p < 0.05;
    return res;
}

} // namespace gcrl
