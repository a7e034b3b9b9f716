#pragma once

#include "entrofield/lattice.hpp"
#include "entrofield/stats.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace entrofield {

using MatC = Eigen::MatrixXcd;

// spectral square root of the kinetic matrix via the mode sum; site units
// (no measure factor), so G G = K exactly in infinite precision
inline Mat ground_kernel(const LatticeSpec& lattice, double mass,
                         bool allow_zero_mode = false,
                         std::int64_t max_volume = 4096) {
    const std::int64_t v = lattice.volume();
    if (v > max_volume)
        throw std::invalid_argument("ground_kernel: volume " + std::to_string(v) +
                                    " exceeds dense limit " + std::to_string(max_volume) +
                                    ", use mode sums instead");
    const ModeTable table = mode_table(lattice, mass);
    if (table.has_zero_mode && !allow_zero_mode)
        throw std::invalid_argument("ground_kernel: zero mode at m=0, pass the exclusion flag");
    const double two_pi = 6.283185307179586476925286766559;
    // translation invariance: G(i,j) depends on the coordinate difference only
    std::vector<double> row(static_cast<std::size_t>(v));
    for (std::int64_t d = 0; d < v; ++d) {
        const auto dc = lattice.site_coords(d);
        double s = 0.0;
        for (const Mode& m : table.modes) {
            double ph = 0.0;
            for (int ax = 0; ax < lattice.ndim(); ++ax)
                ph += static_cast<double>(m.n[ax]) * dc[ax] / lattice.dims[ax];
            s += m.omega * std::cos(two_pi * ph);
        }
        row[static_cast<std::size_t>(d)] = s / static_cast<double>(v);
    }
    Mat g(v, v);
    for (std::int64_t i = 0; i < v; ++i) {
        const auto ci = lattice.site_coords(i);
        for (std::int64_t j = 0; j < v; ++j) {
            const auto cj = lattice.site_coords(j);
            std::array<int, 3> d{0, 0, 0};
            for (int ax = 0; ax < lattice.ndim(); ++ax) {
                d[ax] = ci[ax] - cj[ax];
                if (d[ax] < 0) d[ax] += lattice.dims[ax];
            }
            g(i, j) = row[static_cast<std::size_t>(lattice.site_index(d))];
        }
    }
    return g;
}

// dense eigendecomposition path, retained as an independent cross-check
inline Mat ground_kernel_dense(const LatticeSpec& lattice, double mass,
                               bool allow_zero_mode = false) {
    if (lattice.volume() > 256)
        throw std::invalid_argument("ground_kernel_dense: fallback limited to V <= 256");
    const ModeTable table = mode_table(lattice, mass);
    if (table.has_zero_mode && !allow_zero_mode)
        throw std::invalid_argument("ground_kernel_dense: zero mode at m=0");
    const Mat k = kinetic_matrix(lattice, mass);
    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("ground_kernel_dense: eigensolver failed");
    Vec sq = es.eigenvalues();
    for (Eigen::Index i = 0; i < sq.size(); ++i)
        sq[i] = std::sqrt(std::max(0.0, sq[i]));
    return es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
}

// E0 = (1/2) sum omega at hbar = 1
inline double ground_energy(const ModeTable& table) {
    double s = 0.0;
    for (const Mode& m : table.modes) s += m.omega;
    return 0.5 * s;
}

// site variance (1/(V a^d)) sum 1/(2 omega); the 1/a^d is the sum-vs-integral
// measure factor relative to the site-basis matrix (1/2) G^-1
inline double vacuum_variance(const LatticeSpec& lattice, double mass) {
    const ModeTable table = mode_table(lattice, mass);
    if (table.has_zero_mode)
        throw std::invalid_argument("vacuum_variance: zero mode makes the variance infinite");
    double s = 0.0;
    for (const Mode& m : table.modes) s += 1.0 / (2.0 * m.omega);
    return s / (static_cast<double>(lattice.volume()) * lattice.cell_measure());
}

inline double equal_time_correlator(const LatticeSpec& lattice, double mass,
                                    std::int64_t site_x, std::int64_t site_y) {
    const std::int64_t v = lattice.volume();
    if (site_x < 0 || site_x >= v || site_y < 0 || site_y >= v)
        throw std::invalid_argument("equal_time_correlator: site off lattice");
    const ModeTable table = mode_table(lattice, mass);
    if (table.has_zero_mode)
        throw std::invalid_argument("equal_time_correlator: zero mode");
    const auto cx = lattice.site_coords(site_x);
    const auto cy = lattice.site_coords(site_y);
    const double two_pi = 6.283185307179586476925286766559;
    double s = 0.0;
    for (const Mode& m : table.modes) {
        double ph = 0.0;
        for (int ax = 0; ax < lattice.ndim(); ++ax)
            ph += static_cast<double>(m.n[ax]) * (cx[ax] - cy[ax]) / lattice.dims[ax];
        s += std::cos(two_pi * ph) / (2.0 * m.omega);
    }
    return s / (static_cast<double>(v) * lattice.cell_measure());
}

// Gaussian wave functional exp(-0.5 phi^T A phi) with covariance
// <phi phi^T> = 0.5 Re(A)^-1; ground state has A = G / hbar
struct GaussianState {
    LatticeSpec lattice;
    MatC a;
    double hbar = 1.0;
    double phase = 0.0;   // accumulated global phase, bookkeeping only

    GaussianState(LatticeSpec l, MatC a_, double hb)
        : lattice(std::move(l)), a(std::move(a_)), hbar(hb) {
        if (a.rows() != lattice.volume() || a.cols() != lattice.volume())
            throw std::invalid_argument("GaussianState: kernel shape mismatch");
        if (!(hbar > 0.0) || !std::isfinite(hbar))
            throw std::invalid_argument("GaussianState: hbar must be positive");
        const Mat re = a.real();
        if ((a - a.transpose()).cwiseAbs().maxCoeff() >
            1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("GaussianState: kernel must be symmetric");
        Eigen::LLT<Mat> llt(0.5 * (re + re.transpose()));
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("GaussianState: Re(A) must be positive definite");
    }

    Mat covariance() const {
        const Mat re = a.real();
        return 0.5 * re.inverse();
    }

    // <H> for H = sum_x [ -(hbar^2/2) d^2/dphi_x^2 ] + 0.5 phi^T K phi
    double energy(const Mat& k) const {
        const Mat re = a.real();
        const Mat im = a.imag();
        const Mat re_inv = re.inverse();
        const double kinetic =
            0.25 * hbar * hbar * (re + im * re_inv * im).trace();
        const double potential = 0.25 * (k * re_inv).trace();
        return kinetic + potential;
    }
};

inline GaussianState ground_gaussian(const LatticeSpec& lattice, double mass, double hbar) {
    // a zero mode has no normalizable ground state, so no exclusion flag here
    const Mat g = ground_kernel(lattice, mass, false);
    MatC a = (g / hbar).cast<std::complex<double>>();
    return GaussianState(lattice, std::move(a), hbar);
}

// exact per-step propagation of the Riccati flow i hbar dA/dt = hbar^2 A^2 - K
// through the linear representation Q'' = -K Q, evaluated in the K eigenbasis
inline GaussianState evolve_gaussian(const GaussianState& state, const Mat& k, double hbar,
                                     double dt, int steps) {
    using cplx = std::complex<double>;
    const auto v = state.lattice.volume();
    if (k.rows() != v || k.cols() != v)
        throw std::invalid_argument("evolve_gaussian: kinetic matrix shape mismatch");
    if (std::fabs(hbar - state.hbar) > 1e-12 * state.hbar)
        throw std::invalid_argument("evolve_gaussian: hbar does not match state");
    if (!(dt > 0.0) || steps < 1)
        throw std::invalid_argument("evolve_gaussian: need dt > 0 and steps >= 1");
    if (v > 256)
        throw std::invalid_argument("evolve_gaussian: dense path limited to V <= 256");

    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("evolve_gaussian: eigensolver failed");
    const Mat u = es.eigenvectors();
    const Vec lam = es.eigenvalues();

    Vec cosd(v), sind_over(v), s_sin(v);
    for (Eigen::Index i = 0; i < v; ++i) {
        const double l = std::max(0.0, lam[i]);
        const double s = std::sqrt(l);
        cosd[i] = std::cos(s * dt);
        sind_over[i] = s > 0.0 ? std::sin(s * dt) / s : dt;
        s_sin[i] = s * std::sin(s * dt);
    }

    // B = hbar A obeys i dB/dt = B^2 - K; tilde denotes the K eigenbasis
    MatC b = u.transpose() * (state.hbar * state.a) * u;
    double phase = state.phase;
    const cplx iunit(0.0, 1.0);

    for (int s = 0; s < steps; ++s) {
        // traces are basis independent, so energy and positivity run on b directly
        {
            const Mat reb = 0.5 * (b.real() + b.real().transpose());
            const Mat imb = 0.5 * (b.imag() + b.imag().transpose());
            Eigen::LLT<Mat> llt(reb);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("evolve_gaussian: positivity lost, retry with dt <= " +
                                         std::to_string(0.5 * dt));
            const Mat reb_inv = llt.solve(Mat::Identity(v, v));
            const double energy = 0.25 * hbar * (reb + imb * reb_inv * imb).trace() +
                                  0.25 * hbar * (lam.asDiagonal() * reb_inv).trace();
            phase -= energy * dt / hbar;
        }
        MatC q = cosd.asDiagonal() * MatC::Identity(v, v);
        q += sind_over.asDiagonal() * (iunit * b);
        MatC qdot = (-s_sin).asDiagonal() * MatC::Identity(v, v);
        qdot += cosd.asDiagonal() * (iunit * b);
        Eigen::PartialPivLU<MatC> lu(q);
        const MatC b_next = -iunit * (lu.solve(qdot.transpose()).transpose());
        const double residual = (q * lu.solve(MatC::Identity(v, v)) - MatC::Identity(v, v))
                                    .cwiseAbs()
                                    .maxCoeff();
        if (!std::isfinite(residual) || residual > 1e-6)
            throw std::runtime_error("evolve_gaussian: propagator singular (caustic), retry with dt <= " +
                                     std::to_string(0.5 * dt));
        b = 0.5 * (b_next + b_next.transpose());
    }

    GaussianState out(state.lattice, u * (b / hbar) * u.transpose(), hbar);
    out.phase = phase;
    return out;
}

struct DivergenceRow {
    double spacing = 0.0;
    std::int64_t volume = 0;
    double e0 = 0.0;
    double e0_density = 0.0;
    double var_phi = 0.0;
};

struct DivergenceTable {
    std::vector<DivergenceRow> rows;
    double var_slope = 0.0;
    double var_r2 = 0.0;
    double e0_slope = 0.0;
    double e0_r2 = 0.0;
};

// 3D spacing sweep at fixed physical box size; slopes are log-log fits in a
inline DivergenceTable divergence_scan(double physical_size, double mass,
                                       const std::vector<double>& spacings) {
    if (!(physical_size > 0.0))
        throw std::invalid_argument("divergence_scan: physical size must be positive");
    if (spacings.size() < 2)
        throw std::invalid_argument("divergence_scan: need at least two spacings");
    DivergenceTable table;
    std::vector<double> la, lvar, le0;
    for (double a : spacings) {
        if (!(a > 0.0)) throw std::invalid_argument("divergence_scan: spacing must be positive");
        const auto n = static_cast<int>(std::llround(physical_size / a));
        if (n < 2)
            throw std::invalid_argument("divergence_scan: fewer than 2 sites per axis at a = " +
                                        std::to_string(a));
        const std::int64_t v = static_cast<std::int64_t>(n) * n * n;
        if (v > 1000000)
            throw std::invalid_argument(
                "divergence_scan: V = " + std::to_string(v) +
                " exceeds the 10^6 guard; use a coarser spacing list or smaller box");
        const LatticeSpec lat = build_lattice({n, n, n}, a);
        const ModeTable modes = mode_table(lat, mass);
        DivergenceRow row;
        row.spacing = a;
        row.volume = v;
        row.e0 = ground_energy(modes);
        row.e0_density = row.e0 / (static_cast<double>(v) * lat.cell_measure());
        row.var_phi = vacuum_variance(lat, mass);
        table.rows.push_back(row);
        la.push_back(std::log(a));
        lvar.push_back(std::log(row.var_phi));
        le0.push_back(std::log(row.e0_density));
    }
    const LineFit fv = fit_line(la, lvar);
    const LineFit fe = fit_line(la, le0);
    table.var_slope = fv.slope;
    table.var_r2 = fv.r2;
    table.e0_slope = fe.slope;
    table.e0_r2 = fe.r2;
    return table;
}

}
