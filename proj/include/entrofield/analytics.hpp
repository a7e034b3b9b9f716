#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace entrofield {

namespace detail {

inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;
inline constexpr double pi_const = 3.14159265358979323846264338327950288;

struct GlNode { double x, w; };

inline constexpr GlNode gl16[16] = {
    {-0.98940093499164994, 0.027152459411754037}, {-0.9445750230732326, 0.062253523938647706},
    {-0.86563120238783176, 0.095158511682492591}, {-0.755404408355003, 0.12462897125553403},
    {-0.61787624440264377, 0.14959598881657676}, {-0.45801677765722737, 0.16915651939500262},
    {-0.28160355077925892, 0.18260341504492361}, {-0.095012509837637454, 0.18945061045506859},
    {0.095012509837637454, 0.18945061045506859}, {0.28160355077925892, 0.18260341504492361},
    {0.45801677765722737, 0.16915651939500262}, {0.61787624440264377, 0.14959598881657676},
    {0.755404408355003, 0.12462897125553403}, {0.86563120238783176, 0.095158511682492591},
    {0.9445750230732326, 0.062253523938647706}, {0.98940093499164994, 0.027152459411754037},
};

inline constexpr GlNode gl24[24] = {
    {-0.99518721999702131, 0.012341229799987091}, {-0.97472855597130947, 0.028531388628933743},
    {-0.9382745520027328, 0.044277438817419551}, {-0.88641552700440096, 0.059298584915436742},
    {-0.82000198597390295, 0.073346481411080411}, {-0.74012419157855436, 0.086190161531953288},
    {-0.64809365193697555, 0.097618652104114065}, {-0.54542147138883956, 0.10744427011596561},
    {-0.43379350762604513, 0.11550566805372561}, {-0.3150426796961634, 0.12167047292780342},
    {-0.19111886747361631, 0.1258374563468283}, {-0.06405689286260563, 0.12793819534675221},
    {0.06405689286260563, 0.12793819534675221}, {0.19111886747361631, 0.1258374563468283},
    {0.3150426796961634, 0.12167047292780342}, {0.43379350762604513, 0.11550566805372561},
    {0.54542147138883956, 0.10744427011596561}, {0.64809365193697555, 0.097618652104114065},
    {0.74012419157855436, 0.086190161531953288}, {0.82000198597390295, 0.073346481411080411},
    {0.88641552700440096, 0.059298584915436742}, {0.9382745520027328, 0.044277438817419551},
    {0.97472855597130947, 0.028531388628933743}, {0.99518721999702131, 0.012341229799987091},
};

template <typename F>
double gl_panel(const F& f, double a, double b, const GlNode* nodes, int n) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += nodes[i].w * f(c + h * nodes[i].x);
    return h * s;
}

// modified Bessel functions of the second kind, orders 0 and 1, evaluated
// together; three branches stitched at z = 2 and z = 14
struct K01 { double k0, k1; };

inline K01 bessel_k01_series(double z) {
    const double q = 0.25 * z * z;
    const double lz = std::log(0.5 * z);
    // I0, I1 by term recurrence
    double i0 = 1.0, i1 = 0.5 * z;
    double t0 = 1.0, t1 = 1.0;
    // K0 sum over k>=1 of q^k H_k / (k!)^2
    // K1 sum over k>=0 of q^k (2 gamma - H_k - H_{k+1}) / (k! (k+1)!)
    double hk = 0.0;
    double s0 = 0.0;
    double s1 = 2.0 * euler_gamma - 1.0;   // k = 0 term
    double tk0 = 1.0, tk1 = 1.0;
    for (int k = 1; k <= 60; ++k) {
        const double kd = static_cast<double>(k);
        t0 *= q / (kd * kd);
        t1 *= q / (kd * (kd + 1.0));
        i0 += t0;
        i1 += 0.5 * z * t1;
        hk += 1.0 / kd;
        tk0 *= q / (kd * kd);
        tk1 *= q / (kd * (kd + 1.0));
        s0 += tk0 * hk;
        s1 += tk1 * (2.0 * euler_gamma - hk - (hk + 1.0 / (kd + 1.0)));
        if (t0 < 1e-19 * i0) break;
    }
    K01 r;
    r.k0 = -(lz + euler_gamma) * i0 + s0;
    r.k1 = 1.0 / z + lz * i1 + 0.25 * z * s1;
    return r;
}

inline K01 bessel_k01_integral(double z) {
    // exp(z) K_nu(z) = int_0^T exp(-z (cosh t - 1)) cosh(nu t) dt, tail below 1e-18
    const double tmax = std::acosh(1.0 + 42.0 / z);
    const int panels = 6;
    double s0 = 0.0, s1 = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = tmax * p / panels;
        const double b = tmax * (p + 1) / panels;
        s0 += gl_panel([z](double t) { return std::exp(-z * (std::cosh(t) - 1.0)); },
                       a, b, gl24, 24);
        s1 += gl_panel([z](double t) { return std::exp(-z * (std::cosh(t) - 1.0)) * std::cosh(t); },
                       a, b, gl24, 24);
    }
    const double e = std::exp(-z);
    return {e * s0, e * s1};
}

inline double bessel_k_asymptotic(double z, double nu) {
    // sqrt(pi/2z) e^-z sum a_k / z^k, truncated at the smallest term
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    double prev = std::fabs(term);
    for (int k = 1; k <= 40; ++k) {
        const double j = 2.0 * k - 1.0;
        term *= (mu - j * j) / (8.0 * k * z);
        if (std::fabs(term) >= prev) break;
        sum += term;
        prev = std::fabs(term);
        if (prev < 1e-19) break;
    }
    return std::sqrt(pi_const / (2.0 * z)) * std::exp(-z) * sum;
}

inline K01 bessel_k01(double z) {
    if (!(z > 0.0) || !std::isfinite(z))
        throw std::invalid_argument("bessel_k01: argument must be positive and finite");
    if (z <= 2.0) return bessel_k01_series(z);
    if (z < 14.0) return bessel_k01_integral(z);
    return {bessel_k_asymptotic(z, 0.0), bessel_k_asymptotic(z, 1.0)};
}

}  // namespace detail

inline double bessel_k0(double z) { return detail::bessel_k01(z).k0; }
inline double bessel_k1(double z) { return detail::bessel_k01(z).k1; }

// free scalar equal-time two-point function in three spatial dimensions,
// C(r) = m K_1(m r) / (4 pi^2 r); massless limit 1 / (4 pi^2 r^2)
inline double continuum_correlator(double mass, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("continuum_correlator: r must be positive");
    if (mass < 0.0 || !std::isfinite(mass))
        throw std::invalid_argument("continuum_correlator: mass must be >= 0 and finite");
    const double pref = 1.0 / (4.0 * detail::pi_const * detail::pi_const * r);
    if (mass == 0.0) return pref / r;
    return pref * mass * bessel_k1(mass * r);
}

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = false;
};

namespace detail {

// adaptive nested Gauss-Legendre on one panel; the 16/24 disagreement is the
// error surrogate, bisect until it clears the budget
template <typename F>
void adaptive_panel(const F& f, double a, double b, double budget, int depth,
                    double& value, double& err) {
    const double coarse = gl_panel(f, a, b, gl16, 16);
    const double fine = gl_panel(f, a, b, gl24, 24);
    const double d = std::fabs(fine - coarse);
    if (d <= budget || depth >= 14) {
        value += fine;
        err += d;
        return;
    }
    const double mid = 0.5 * (a + b);
    adaptive_panel(f, a, mid, 0.5 * budget, depth + 1, value, err);
    adaptive_panel(f, mid, b, 0.5 * budget, depth + 1, value, err);
}

}  // namespace detail

// direct momentum-space quadrature of the equal-time correlator: the 1/r^2
// short-distance part is handled in closed form, the remainder integrates
// g(k) = 1 - k/omega against sin(kr) over panels between sine zeros with an
// alternating-series acceleration for the tail
inline QuadratureResult correlator_quadrature(double mass, double r,
                                              double tol = 1e-9, int zeros = 48) {
    if (!(r > 0.0)) throw std::invalid_argument("correlator_quadrature: r must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw std::invalid_argument("correlator_quadrature: mass must be positive and finite");
    const double pi = detail::pi_const;
    auto integrand = [mass, r](double k) {
        const double g = 1.0 - k / std::sqrt(k * k + mass * mass);
        return g * std::sin(k * r);
    };
    // panel integrals between consecutive zeros of sin(kr)
    std::vector<double> partial;   // cumulative sums
    partial.reserve(zeros);
    double acc = 0.0;
    double panel_err = 0.0;
    const double budget = tol / (4.0 * zeros);
    for (int j = 0; j < zeros; ++j) {
        const double a = j * pi / r;
        const double b = (j + 1) * pi / r;
        double v = 0.0;
        detail::adaptive_panel(integrand, a, b, budget, 0, v, panel_err);
        acc += v;
        partial.push_back(acc);
    }
    // repeated averaging of the cumulative sums accelerates the alternating tail
    std::vector<double> row = partial;
    double prev_est = row.back();
    double tail_err = std::fabs(row.back() - row[row.size() - 2]);
    while (row.size() > 2) {
        std::vector<double> next(row.size() - 1);
        for (std::size_t i = 0; i + 1 < row.size(); ++i) next[i] = 0.5 * (row[i] + row[i + 1]);
        row.swap(next);
        const double est = row.back();
        const double delta = std::fabs(est - prev_est);
        if (delta < tail_err) tail_err = delta;
        prev_est = est;
        if (tail_err < 1e-18 * std::fabs(est)) break;
    }
    const double integral = prev_est;
    const double pref = 1.0 / (4.0 * pi * pi * r);
    QuadratureResult out;
    out.value = pref * (1.0 / r - integral);
    out.error_estimate = pref * (panel_err + tail_err);
    out.converged = out.error_estimate <= tol;
    return out;
}

// truncated variance integral (1/4pi^2) int_0^K k^2/sqrt(k^2+m^2) dk, closed
// form; grows without bound in K, which is the short-distance divergence
inline double variance_integral_truncated(double mass, double kmax) {
    if (!(kmax > 0.0)) throw std::invalid_argument("variance_integral_truncated: kmax must be positive");
    const double pref = 1.0 / (4.0 * detail::pi_const * detail::pi_const);
    if (mass == 0.0) return pref * 0.5 * kmax * kmax;
    const double w = std::sqrt(kmax * kmax + mass * mass);
    return pref * 0.5 * (kmax * w - mass * mass * std::asinh(kmax / mass));
}

}
