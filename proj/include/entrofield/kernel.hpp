#pragma once

#include "entrofield/lattice.hpp"
#include "entrofield/rng.hpp"
#include "entrofield/stats.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace entrofield {

// Constraint functional on configurations. Only the gradient enters the
// transition law; the value is exposed for tests and the Hessian for the
// metric reduction.
class DriftPotential {
public:
    virtual ~DriftPotential() = default;
    virtual double value(const Vec& phi) const = 0;
    virtual Vec gradient(const Vec& phi) const = 0;

    // central-difference fallback; analytic drifts override
    virtual Mat hessian(const Vec& phi) const {
        const auto n = phi.size();
        Mat h(n, n);
        const double eps = 1e-6;
        Vec p = phi;
        for (Eigen::Index j = 0; j < n; ++j) {
            p[j] = phi[j] + eps;
            const Vec gp = gradient(p);
            p[j] = phi[j] - eps;
            const Vec gm = gradient(p);
            p[j] = phi[j];
            h.col(j) = (gp - gm) / (2.0 * eps);
        }
        return 0.5 * (h + h.transpose());
    }
};

class ZeroDrift final : public DriftPotential {
public:
    double value(const Vec&) const override { return 0.0; }
    Vec gradient(const Vec& phi) const override { return Vec::Zero(phi.size()); }
    Mat hessian(const Vec& phi) const override { return Mat::Zero(phi.size(), phi.size()); }
};

// Lambda = g . phi + offset; the offset must not affect any observable
class LinearDrift final : public DriftPotential {
public:
    explicit LinearDrift(Vec g, double offset = 0.0) : g_(std::move(g)), offset_(offset) {}
    double value(const Vec& phi) const override { return g_.dot(phi) + offset_; }
    Vec gradient(const Vec&) const override { return g_; }
    Mat hessian(const Vec& phi) const override { return Mat::Zero(phi.size(), phi.size()); }

private:
    Vec g_;
    double offset_;
};

// Lambda = 0.5 phi^T C phi + g . phi
class QuadraticDrift final : public DriftPotential {
public:
    QuadraticDrift(Mat c, Vec g) : c_(std::move(c)), g_(std::move(g)) {
        if (c_.rows() != c_.cols() || c_.rows() != g_.size())
            throw std::invalid_argument("QuadraticDrift: shape mismatch");
    }
    double value(const Vec& phi) const override {
        return 0.5 * phi.dot(c_ * phi) + g_.dot(phi);
    }
    Vec gradient(const Vec& phi) const override { return c_ * phi + g_; }
    Mat hessian(const Vec&) const override { return c_; }

private:
    Mat c_;
    Vec g_;
};

// Lambda = sum_x c3 phi_x^3, anharmonic test drift
class CubicDrift final : public DriftPotential {
public:
    explicit CubicDrift(double c3) : c3_(c3) {}
    double value(const Vec& phi) const override {
        double s = 0.0;
        for (Eigen::Index i = 0; i < phi.size(); ++i) s += phi[i] * phi[i] * phi[i];
        return c3_ * s;
    }
    Vec gradient(const Vec& phi) const override {
        Vec g(phi.size());
        for (Eigen::Index i = 0; i < phi.size(); ++i) g[i] = 3.0 * c3_ * phi[i] * phi[i];
        return g;
    }
    Mat hessian(const Vec& phi) const override {
        Mat h = Mat::Zero(phi.size(), phi.size());
        for (Eigen::Index i = 0; i < phi.size(); ++i) h(i, i) = 6.0 * c3_ * phi[i];
        return h;
    }

private:
    double c3_;
};

// Gaussian short-step transition law in the site basis: the update at each
// site is drift (1/alpha) dLambda/dphi plus independent noise of variance
// eta dt, alpha = 1/(eta dt).
struct TransitionKernel {
    LatticeSpec lattice;
    double eta = 1.0;
    double dt = 1e-3;
    const DriftPotential* drift = nullptr;   // null means zero drift

    TransitionKernel(LatticeSpec l, double eta_, double dt_,
                     const DriftPotential* d = nullptr)
        : lattice(std::move(l)), eta(eta_), dt(dt_), drift(d) {
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw std::invalid_argument("TransitionKernel: eta must be positive and finite");
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("TransitionKernel: dt must be positive and finite");
    }

    double alpha() const { return 1.0 / (eta * dt); }

    Vec drift_gradient(const Vec& phi) const {
        if (drift == nullptr) return Vec::Zero(phi.size());
        return drift->gradient(phi);
    }

    Vec mean_next(const Vec& phi) const {
        return phi + (eta * dt) * drift_gradient(phi);
    }
};

inline double log_density(const TransitionKernel& kernel, const Vec& phi, const Vec& phi_next) {
    const auto v = kernel.lattice.volume();
    if (phi.size() != v || phi_next.size() != v)
        throw std::invalid_argument("log_density: configuration size mismatch");
    const double alpha = kernel.alpha();
    const Vec mu = kernel.mean_next(phi);
    const double q = (phi_next - mu).squaredNorm();
    const double two_pi = 6.283185307179586476925286766559;
    return -0.5 * alpha * q - 0.5 * static_cast<double>(v) * std::log(two_pi / alpha);
}

inline Vec sample_step(const TransitionKernel& kernel, const Vec& phi, Rng& rng) {
    if (phi.size() != kernel.lattice.volume())
        throw std::invalid_argument("sample_step: configuration size mismatch");
    const double sigma = std::sqrt(kernel.eta * kernel.dt);
    Vec out = kernel.mean_next(phi);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sigma * rng.normal();
    return out;
}

struct KernelMoments {
    Vec mean_shift;        // per-site expected increment
    double site_variance;  // identical across sites, no cross covariance
};

inline KernelMoments moments(const TransitionKernel& kernel, const Vec& phi) {
    if (phi.size() != kernel.lattice.volume())
        throw std::invalid_argument("moments: configuration size mismatch");
    return {(kernel.eta * kernel.dt) * kernel.drift_gradient(phi), kernel.eta * kernel.dt};
}

namespace detail {

struct GhNode { double x, w; };

inline constexpr GhNode gh8[8] = {
    {-2.9306374202572441, 0.00019960407221136783},
    {-1.981656756695843, 0.017077983007413467},
    {-1.1571937124467802, 0.20780232581489183},
    {-0.38118699020732211, 0.66114701255824149},
    {0.38118699020732211, 0.66114701255824149},
    {1.1571937124467802, 0.20780232581489183},
    {1.981656756695843, 0.017077983007413467},
    {2.9306374202572441, 0.00019960407221136783},
};

inline constexpr GhNode gh12[12] = {
    {-3.8897248978697818, 2.6585516843563044e-07},
    {-3.0206370251208896, 8.5736870435878683e-05},
    {-2.2795070805010598, 0.0039053905846290599},
    {-1.5976826351526048, 0.051607985615883978},
    {-0.94778839124016379, 0.26049231026416109},
    {-0.31424037625435913, 0.57013523626247953},
    {0.31424037625435913, 0.57013523626247953},
    {0.94778839124016379, 0.26049231026416109},
    {1.5976826351526048, 0.051607985615883978},
    {2.2795070805010598, 0.0039053905846290599},
    {3.0206370251208896, 8.5736870435878683e-05},
    {3.8897248978697818, 2.6585516843563044e-07},
};

// tensor-product Gauss-Hermite expectation of the score outer product under
// the kernel at fixed phi
inline Mat fisher_gh(const TransitionKernel& kernel, const Vec& phi, double c_scale,
                     const GhNode* nodes, int n) {
    const auto v = phi.size();
    const double alpha = kernel.alpha();
    const Vec mu = kernel.mean_next(phi);
    const Mat hess = kernel.drift == nullptr ? Mat::Zero(v, v) : kernel.drift->hessian(phi);
    const Mat jac = Mat::Identity(v, v) + hess / alpha;   // d mu / d phi
    const double step = std::sqrt(2.0 / alpha);
    const double inv_sqrt_pi = 0.56418958354775628694807945156077;

    Mat metric = Mat::Zero(v, v);
    std::vector<int> idx(static_cast<std::size_t>(v), 0);
    Vec dphi(v);
    Vec score(v);
    bool done = false;
    while (!done) {
        double w = 1.0;
        for (Eigen::Index d = 0; d < v; ++d) {
            const auto& nd = nodes[idx[static_cast<std::size_t>(d)]];
            dphi[d] = step * nd.x;
            w *= nd.w * inv_sqrt_pi;
        }
        score.noalias() = alpha * (jac.transpose() * dphi);
        metric.noalias() += w * (score * score.transpose());
        // odometer over node indices
        Eigen::Index d = 0;
        for (; d < v; ++d) {
            auto& id = idx[static_cast<std::size_t>(d)];
            if (++id < n) break;
            id = 0;
        }
        done = (d == v);
    }
    return c_scale * metric;
}

}  // namespace detail

// information metric of the transition law at phi, scaled by c_scale; the
// default scale eta dt makes the zero-drift metric the identity
inline Mat fisher_metric(const TransitionKernel& kernel, const Vec& phi, double c_scale) {
    if (phi.size() != kernel.lattice.volume())
        throw std::invalid_argument("fisher_metric: configuration size mismatch");
    if (phi.size() > 4)
        throw std::invalid_argument("fisher_metric: tensor quadrature limited to volume <= 4");
    const Mat coarse = detail::fisher_gh(kernel, phi, c_scale, detail::gh8, 8);
    const Mat fine = detail::fisher_gh(kernel, phi, c_scale, detail::gh12, 12);
    const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
    if ((fine - coarse).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::runtime_error("fisher_metric: quadrature did not converge");
    return fine;
}

inline Mat fisher_metric(const TransitionKernel& kernel, const Vec& phi) {
    return fisher_metric(kernel, phi, kernel.eta * kernel.dt);
}

// analytic reduction C alpha J^T J used to cross-check the quadrature
inline Mat fisher_metric_closed(const TransitionKernel& kernel, const Vec& phi, double c_scale) {
    const auto v = phi.size();
    const double alpha = kernel.alpha();
    const Mat hess = kernel.drift == nullptr ? Mat::Zero(v, v) : kernel.drift->hessian(phi);
    const Mat jac = Mat::Identity(v, v) + hess / alpha;
    return c_scale * alpha * (jac.transpose() * jac);
}

struct MaxentReport {
    std::vector<std::vector<double>> gaps;   // [perturbation][eps index]
    std::vector<double> exponents;            // log-log slope per perturbation
    std::vector<double> eps_ladder;
    double min_gap = 0.0;
};

namespace detail {

// discrete entropy -sum w p log p on the given grid
inline double grid_entropy(const std::vector<double>& w, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) s -= w[i] * p[i] * std::log(p[i]);
    return s;
}

struct GridDist {
    std::vector<double> x, w, p;
    double m1 = 0.0, m2 = 0.0;
};

inline void normalize_with_moments(GridDist& d) {
    double z = 0.0;
    for (std::size_t i = 0; i < d.p.size(); ++i) z += d.w[i] * d.p[i];
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < d.p.size(); ++i) {
        d.p[i] /= z;
        m1 += d.w[i] * d.p[i] * d.x[i];
        m2 += d.w[i] * d.p[i] * d.x[i] * d.x[i];
    }
    d.m1 = m1;
    d.m2 = m2;
}

}  // namespace detail

// One-site optimality audit: the Gaussian short-step law maximizes entropy
// under mean and variance constraints, so every constraint-preserving tilt
// loses entropy, and the loss is quadratic in the tilt size. All moments are
// taken with the same discrete weights, which makes the entropy gap equal a
// relative entropy and hence exactly nonnegative.
inline MaxentReport verify_maxent(double alpha, double g, int n_perturbations,
                                  std::uint64_t seed,
                                  std::vector<double> eps_ladder = {2e-3, 4e-3, 8e-3},
                                  int npts = 801, double span = 6.0) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("verify_maxent: alpha must be positive and finite");
    if (n_perturbations < 1) throw std::invalid_argument("verify_maxent: need >= 1 perturbation");
    if (npts < 801) throw std::invalid_argument("verify_maxent: grid too coarse, need >= 801");

    const double mu = g / alpha;
    const double sigma = 1.0 / std::sqrt(alpha);
    detail::GridDist ref;
    ref.x.resize(static_cast<std::size_t>(npts));
    ref.w.assign(static_cast<std::size_t>(npts), 0.0);
    ref.p.resize(static_cast<std::size_t>(npts));
    const double lo = mu - span * sigma, hi = mu + span * sigma;
    const double h = (hi - lo) / (npts - 1);
    for (int i = 0; i < npts; ++i) {
        ref.x[static_cast<std::size_t>(i)] = lo + h * i;
        ref.w[static_cast<std::size_t>(i)] = (i == 0 || i == npts - 1) ? 0.5 * h : h;
    }
    for (int i = 0; i < npts; ++i) {
        const double x = ref.x[static_cast<std::size_t>(i)];
        ref.p[static_cast<std::size_t>(i)] = std::exp(-0.5 * alpha * x * x + g * x);
    }
    detail::normalize_with_moments(ref);
    const double s_ref = detail::grid_entropy(ref.w, ref.p);

    Rng rng(seed);
    MaxentReport report;
    report.eps_ladder = eps_ladder;
    report.gaps.resize(static_cast<std::size_t>(n_perturbations));
    report.exponents.resize(static_cast<std::size_t>(n_perturbations));
    double min_gap = std::numeric_limits<double>::infinity();

    for (int pert = 0; pert < n_perturbations; ++pert) {
        // three shape families, parameters drawn per perturbation
        const int family = static_cast<int>(rng.next_u64() % 3);
        const double a1 = rng.uniform(), a2 = rng.uniform(), a3 = rng.uniform();
        std::vector<double> f(static_cast<std::size_t>(npts));
        for (int i = 0; i < npts; ++i) {
            const double t = (ref.x[static_cast<std::size_t>(i)] - mu) / sigma;
            double v = 0.0;
            if (family == 0) {
                const double om = 0.5 + 2.5 * a1;
                v = std::sin(om * t + 6.283185307179586 * a2);
            } else if (family == 1) {
                const double c = -2.0 + 4.0 * a1;
                const double s = 0.5 + a2;
                v = std::exp(-0.5 * (t - c) * (t - c) / (s * s));
            } else {
                const double c = -1.5 + 3.0 * a1;
                const double s = 0.4 + 1.2 * a3;
                v = std::tanh((t - c) / s);
            }
            f[static_cast<std::size_t>(i)] = v;
        }

        auto& gap_row = report.gaps[static_cast<std::size_t>(pert)];
        gap_row.resize(eps_ladder.size());
        for (std::size_t ei = 0; ei < eps_ladder.size(); ++ei) {
            const double eps = eps_ladder[ei];
            // tilt with compensators c1 x + c2 x^2 restoring both constraints
            double c1 = 0.0, c2 = 0.0;
            detail::GridDist q = ref;
            bool solved = false;
            for (int it = 0; it < 80; ++it) {
                for (int i = 0; i < npts; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    const double x = ref.x[ii];
                    q.p[ii] = ref.p[ii] * std::exp(eps * f[ii] + c1 * x + c2 * x * x);
                }
                detail::normalize_with_moments(q);
                const double r1 = q.m1 - ref.m1;
                const double r2 = q.m2 - ref.m2;
                const double tol = 1e-13 * std::max(1.0, std::fabs(ref.m2));
                if (std::fabs(r1) < tol && std::fabs(r2) < tol) {
                    solved = true;
                    break;
                }
                // covariance Jacobian of the moment map in (c1, c2)
                double m3 = 0.0, m4 = 0.0;
                for (int i = 0; i < npts; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    const double x = ref.x[ii];
                    m3 += q.w[ii] * q.p[ii] * x * x * x;
                    m4 += q.w[ii] * q.p[ii] * x * x * x * x;
                }
                const double j11 = q.m2 - q.m1 * q.m1;
                const double j12 = m3 - q.m1 * q.m2;
                const double j21 = j12;
                const double j22 = m4 - q.m2 * q.m2;
                const double det = j11 * j22 - j12 * j21;
                if (det == 0.0) break;
                c1 -= (j22 * r1 - j12 * r2) / det;
                c2 -= (-j21 * r1 + j11 * r2) / det;
            }
            if (!solved)
                throw std::runtime_error("verify_maxent: constraint solve did not converge");
            const double gap = s_ref - detail::grid_entropy(q.w, q.p);
            gap_row[ei] = gap;
            min_gap = std::min(min_gap, gap);
        }

        std::vector<double> lx(eps_ladder.size()), ly(eps_ladder.size());
        for (std::size_t ei = 0; ei < eps_ladder.size(); ++ei) {
            lx[ei] = std::log(eps_ladder[ei]);
            ly[ei] = std::log(std::max(gap_row[ei], 1e-300));
        }
        report.exponents[static_cast<std::size_t>(pert)] = fit_line(lx, ly).slope;
    }
    report.min_gap = min_gap;
    return report;
}

}
