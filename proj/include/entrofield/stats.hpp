#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace entrofield {

// regularized lower incomplete gamma P(a,x); series for x < a+1, continued
// fraction otherwise
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16)
                return sum * std::exp(-x + a * std::log(x) - lg);
        }
        throw std::runtime_error("gamma_p: series did not converge");
    }
    // Lentz continued fraction for Q(a,x)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16)
            return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
    }
    throw std::runtime_error("gamma_p: continued fraction did not converge");
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

// upper tail of the chi-squared distribution
inline double chi2_pvalue(double chi2, double dof) {
    if (chi2 <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * chi2);
}

// complementary CDF of the Kolmogorov distribution
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 200; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// KS statistic of samples against a reference CDF; samples need not be sorted
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(f - static_cast<double>(i + 1) / n));
    }
    return d;
}

struct KsTwoSampleResult {
    double statistic;
    double pvalue;
};

inline KsTwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    return {d, kolmogorov_q(lambda)};
}

struct LineFit {
    double slope;
    double intercept;
    double r2;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need matching arrays of size >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    const double slope = sxy / sxx;
    const double r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return {slope, my - slope * mx, r2};
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}
