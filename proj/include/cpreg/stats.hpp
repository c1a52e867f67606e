#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace cpreg {

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need two points");
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

inline double std_error_of_mean(const std::vector<double>& xs) {
    return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

/* Quantile with linear interpolation between order statistics. */
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    if (q <= 0.0) return xs.front();
    if (q >= 1.0) return xs.back();
    const double pos = q * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= xs.size()) return xs.back();
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;  // OLS residual-based; meaningful only for independent points
};

inline LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_fit: need matched samples with at least two points");
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols_fit: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

/* Ranks with ties sharing their average rank. */
inline std::vector<double> ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("pearson: bad sample");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/* Wilson score interval for a binomial proportion. */
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959964) {
    if (n == 0) throw std::invalid_argument("wilson_interval: empty sample");
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / static_cast<double>(n);
    const double center = (p + z2 / (2.0 * static_cast<double>(n))) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / static_cast<double>(n) +
                      z2 / (4.0 * static_cast<double>(n) * static_cast<double>(n))) / denom;
    return {center - half, center + half};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double chi_square_pvalue(double stat, double dof) {
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/* Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2). */
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/* Two-sample Kolmogorov-Smirnov test. With heavily tied (integer) samples the
   asymptotic p-value is conservative, which is the safe direction for gating. */
struct KsResult {
    double statistic = 0.0;
    double pvalue = 1.0;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/* One-sample KS against a reference CDF evaluated at the sample's support. */
inline KsResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf) {
    if (xs.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < xs.size()) {
        std::size_t j = i;
        while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
        const double f = cdf(xs[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(j + 1) / n;
        d = std::max({d, std::fabs(f - lo), std::fabs(f - hi)});
        i = j + 1;
    }
    const double ne = std::sqrt(n);
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/* One-sample KS for integer-valued laws. Both step functions jump only at
   integers, so the supremum is attained there; comparing the CDFs at the
   atoms themselves keeps a large atom mass from inflating the statistic the
   way the continuous formula would. The Kolmogorov tail is conservative for
   discrete laws. */
inline KsResult ks_one_sample_integer(const std::vector<std::uint64_t>& xs,
                                      const std::function<double(std::uint64_t)>& cdf) {
    if (xs.empty()) throw std::invalid_argument("ks_one_sample_integer: empty sample");
    const std::uint64_t kmax = *std::max_element(xs.begin(), xs.end());
    std::vector<double> counts(static_cast<std::size_t>(kmax) + 1, 0.0);
    for (const std::uint64_t x : xs) counts[static_cast<std::size_t>(x)] += 1.0;
    const double n = static_cast<double>(xs.size());
    double cum = 0.0;
    double d = 0.0;
    for (std::size_t k = 0; k <= static_cast<std::size_t>(kmax); ++k) {
        cum += counts[k];
        d = std::max(d, std::fabs(cum / n - cdf(static_cast<std::uint64_t>(k))));
    }
    const double ne = std::sqrt(n);
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace cpreg
