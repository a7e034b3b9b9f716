#pragma once

#include "entrofield/amplitude_grid.hpp"
#include "entrofield/lattice.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace entrofield {

// raised when a Hamilton step would push the density negative past tolerance
class StepRejected : public std::runtime_error {
public:
    StepRejected(double dt, double suggested)
        : std::runtime_error("step_hamilton: density negativity at dt = " +
                             std::to_string(dt) + ", retry with dt <= " +
                             std::to_string(suggested)),
          suggested_dt(suggested) {}
    double suggested_dt;
};

namespace grid_detail {

using cplx = std::complex<double>;

struct LineSpan {
    std::int64_t start;
    std::int64_t stride;
    int count;
};

// visit every 1D chain of cells along the given axis
template <typename F>
void for_each_line(const AmplitudeGrid& g, int axis, F&& f) {
    const int n = g.points;
    if (g.sites == 1) {
        f(LineSpan{0, 1, n});
        return;
    }
    if (axis == 0) {
        for (int iy = 0; iy < n; ++iy) f(LineSpan{iy, n, n});
    } else {
        for (int ix = 0; ix < n; ++ix) f(LineSpan{static_cast<std::int64_t>(ix) * n, 1, n});
    }
}

// complex tridiagonal solve with constant off-diagonal, Dirichlet ends
inline void thomas_const_offdiag(const std::vector<cplx>& diag, cplx off,
                                 std::vector<cplx>& rhs, std::vector<cplx>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    cplx piv = diag[0];
    if (piv == cplx(0.0, 0.0)) throw std::runtime_error("step_schrodinger: singular pivot");
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = off / piv;
        piv = diag[i] - off * scratch[i];
        if (piv == cplx(0.0, 0.0)) throw std::runtime_error("step_schrodinger: singular pivot");
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

inline void thomas_real(const std::vector<double>& diag, double off,
                        std::vector<double>& rhs, std::vector<double>& scratch) {
    const std::size_t n = diag.size();
    scratch.resize(n);
    double piv = diag[0];
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = off / piv;
        piv = diag[i] - off * scratch[i];
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch[i + 1] * rhs[i + 1];
}

}  // namespace grid_detail

// site potential evaluated on every grid cell: quadratic part through the
// lattice kinetic matrix (gradient coupling included for V=2), anharmonic
// terms per site
inline std::vector<double> grid_potential(const AmplitudeGrid& grid,
                                          const LatticeSpec& lattice,
                                          const PotentialSpec& pot) {
    if (lattice.volume() != grid.sites)
        throw std::invalid_argument("grid_potential: lattice volume must equal grid sites");
    const Mat k = kinetic_matrix(lattice, pot.mass);
    std::vector<double> v(static_cast<std::size_t>(grid.cells()));
    if (grid.sites == 1) {
        for (int i = 0; i < grid.points; ++i) {
            const double x = grid.coord(i);
            v[static_cast<std::size_t>(i)] =
                0.5 * k(0, 0) * x * x + pot.lambda3 * x * x * x + pot.lambda4 * x * x * x * x;
        }
    } else {
        for (int ix = 0; ix < grid.points; ++ix) {
            const double x = grid.coord(ix);
            for (int iy = 0; iy < grid.points; ++iy) {
                const double y = grid.coord(iy);
                v[static_cast<std::size_t>(grid.index(ix, iy))] =
                    0.5 * (k(0, 0) * x * x + 2.0 * k(0, 1) * x * y + k(1, 1) * y * y) +
                    pot.lambda3 * (x * x * x + y * y * y) +
                    pot.lambda4 * (x * x * x * x + y * y * y * y);
            }
        }
    }
    return v;
}

namespace grid_detail {

// The three grid functionals below share one discretization: H is the exact
// expectation value of the Dirichlet finite-difference Hamiltonian in the
// wave picture, written in (rho, Phi) variables. Link kinetic terms carry
// the quantum potential implicitly, so no separate division by rho appears.

inline double hamiltonian_value(const AmplitudeGrid& grid, const std::vector<double>& rho,
                                const std::vector<double>& phi,
                                const std::vector<double>& vpot, double hbar) {
    const double h = grid.h();
    const double c = hbar * hbar / (2.0 * h * h);
    double sum = 0.0;
    for (int ax = 0; ax < grid.sites; ++ax) {
        for_each_line(grid, ax, [&](const LineSpan& ln) {
            for (int k = 0; k + 1 < ln.count; ++k) {
                const std::size_t a = static_cast<std::size_t>(ln.start + k * ln.stride);
                const std::size_t b = a + static_cast<std::size_t>(ln.stride);
                const double ra = rho[a] > 0.0 ? rho[a] : 0.0;
                const double rb = rho[b] > 0.0 ? rho[b] : 0.0;
                sum += c * (ra + rb -
                            2.0 * std::sqrt(ra * rb) * std::cos((phi[b] - phi[a]) / hbar));
            }
            const std::size_t first = static_cast<std::size_t>(ln.start);
            const std::size_t last =
                static_cast<std::size_t>(ln.start + (ln.count - 1) * ln.stride);
            sum += c * ((rho[first] > 0.0 ? rho[first] : 0.0) +
                        (rho[last] > 0.0 ? rho[last] : 0.0));   // Dirichlet ghost links
        });
    }
    for (std::size_t i = 0; i < rho.size(); ++i) sum += vpot[i] * (rho[i] > 0.0 ? rho[i] : 0.0);
    return grid.weight() * sum;
}

// partial derivatives dH/dPhi_i, weight factor included
inline void hamiltonian_grad_phi(const AmplitudeGrid& grid, const std::vector<double>& rho,
                                 const std::vector<double>& phi, double hbar,
                                 std::vector<double>& out) {
    const double h = grid.h();
    const double c = hbar * hbar / (2.0 * h * h);
    const double w = grid.weight();
    out.assign(rho.size(), 0.0);
    for (int ax = 0; ax < grid.sites; ++ax) {
        for_each_line(grid, ax, [&](const LineSpan& ln) {
            for (int k = 0; k + 1 < ln.count; ++k) {
                const std::size_t a = static_cast<std::size_t>(ln.start + k * ln.stride);
                const std::size_t b = a + static_cast<std::size_t>(ln.stride);
                const double ra = rho[a] > 0.0 ? rho[a] : 0.0;
                const double rb = rho[b] > 0.0 ? rho[b] : 0.0;
                const double s =
                    std::sqrt(ra * rb) * std::sin((phi[b] - phi[a]) / hbar);
                const double flux = w * 2.0 * c / hbar * s;
                out[b] += flux;
                out[a] -= flux;
            }
        });
    }
}

// partial derivatives dH/drho_i, weight factor included; the sqrt ratio is
// masked below kick_mask_rel to keep dead cells from injecting spurious kicks
inline void hamiltonian_grad_rho(const AmplitudeGrid& grid, const std::vector<double>& rho,
                                 const std::vector<double>& phi,
                                 const std::vector<double>& vpot, double hbar,
                                 std::vector<double>& out) {
    const double h = grid.h();
    const double c = hbar * hbar / (2.0 * h * h);
    const double w = grid.weight();
    const double qcut =
        std::max(kick_mask_rel * max_of(rho), rho_abs_floor);
    out.resize(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) out[i] = vpot[i];
    for (int ax = 0; ax < grid.sites; ++ax) {
        for_each_line(grid, ax, [&](const LineSpan& ln) {
            for (int k = 0; k + 1 < ln.count; ++k) {
                const std::size_t a = static_cast<std::size_t>(ln.start + k * ln.stride);
                const std::size_t b = a + static_cast<std::size_t>(ln.stride);
                const bool alive = rho[a] > qcut && rho[b] > qcut;
                const double cosd = std::cos((phi[b] - phi[a]) / hbar);
                double up = 0.0, dn = 0.0;
                if (alive) {
                    const double rsa = std::sqrt(rho[a]);
                    const double rsb = std::sqrt(rho[b]);
                    up = rsb / rsa;
                    dn = rsa / rsb;
                }
                out[a] += c * (1.0 - up * cosd);
                out[b] += c * (1.0 - dn * cosd);
            }
            const std::size_t first = static_cast<std::size_t>(ln.start);
            const std::size_t last =
                static_cast<std::size_t>(ln.start + (ln.count - 1) * ln.stride);
            out[first] += c;
            out[last] += c;
        });
    }
    for (std::size_t i = 0; i < rho.size(); ++i) out[i] *= w;
}

}  // namespace grid_detail

inline double ensemble_hamiltonian(const HydroState& state, const std::vector<double>& vpot,
                                   const EdConstants& constants) {
    if (vpot.size() != state.rho.size())
        throw std::invalid_argument("ensemble_hamiltonian: potential size mismatch");
    for (double r : state.rho)
        if (r < 0.0) throw std::invalid_argument("ensemble_hamiltonian: negative density");
    return grid_detail::hamiltonian_value(state.grid, state.rho, state.phi, vpot,
                                          constants.hbar());
}

struct HamiltonianGradients {
    std::vector<double> d_rho;   // dH/drho_i, weight included
    std::vector<double> d_phi;   // dH/dPhi_i, weight included
};

inline HamiltonianGradients hamiltonian_gradients(const HydroState& state,
                                                  const std::vector<double>& vpot,
                                                  const EdConstants& constants) {
    HamiltonianGradients g;
    grid_detail::hamiltonian_grad_rho(state.grid, state.rho, state.phi, vpot,
                                      constants.hbar(), g.d_rho);
    grid_detail::hamiltonian_grad_phi(state.grid, state.rho, state.phi, constants.hbar(),
                                      g.d_phi);
    return g;
}

// one kick-drift-kick step on the canonical pair; the half kick and the
// drift are implicit (fixed-point iteration), the closing kick explicit
inline HydroState step_hamilton(const HydroState& state, const std::vector<double>& vpot,
                                const EdConstants& constants, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("step_hamilton: dt must be positive and finite");
    if (vpot.size() != state.rho.size())
        throw std::invalid_argument("step_hamilton: potential size mismatch");
    const AmplitudeGrid& grid = state.grid;
    const double hbar = constants.hbar();
    const double w = grid.weight();
    const double half = 0.5 * dt / w;
    const int max_iter = 500;

    std::vector<double> grad(state.rho.size());
    std::vector<double> phi_half = state.phi;

    auto sup_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
        return m;
    };

    // implicit half kick: phi_half = phi0 - half * dH/drho(rho0, phi_half)
    {
        std::vector<double> prev(phi_half.size());
        double scale = 1.0;
        for (double p : state.phi) scale = std::max(scale, std::fabs(p));
        int it = 0;
        for (; it < max_iter; ++it) {
            prev = phi_half;
            grid_detail::hamiltonian_grad_rho(grid, state.rho, prev, vpot, hbar, grad);
            for (std::size_t i = 0; i < phi_half.size(); ++i)
                phi_half[i] = state.phi[i] - half * grad[i];
            // 1e-15 stays above the 1-ulp stall floor of the iterates
            if (sup_diff(phi_half, prev) <= 1e-15 * scale) break;
        }
        if (it == max_iter)
            throw std::runtime_error("step_hamilton: implicit kick did not converge");
    }

    // implicit trapezoid drift in rho at fixed phi_half
    std::vector<double> flux0(state.rho.size());
    grid_detail::hamiltonian_grad_phi(grid, state.rho, phi_half, hbar, flux0);
    std::vector<double> rho_new = state.rho;
    {
        std::vector<double> prev(rho_new.size());
        std::vector<double> flux1(rho_new.size());
        double scale = 0.0;
        for (double r : state.rho) scale = std::max(scale, r);
        scale = std::max(scale, 1e-30);
        int it = 0;
        for (; it < max_iter; ++it) {
            prev = rho_new;
            grid_detail::hamiltonian_grad_phi(grid, prev, phi_half, hbar, flux1);
            for (std::size_t i = 0; i < rho_new.size(); ++i)
                rho_new[i] = state.rho[i] + half * (flux0[i] + flux1[i]);
            if (sup_diff(rho_new, prev) <= 1e-15 * scale) break;
        }
        if (it == max_iter)
            throw std::runtime_error("step_hamilton: implicit drift did not converge");
    }

    double rmin = 0.0, rmax = 0.0;
    for (double r : rho_new) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
    }
    if (rmin < -grid_detail::rho_neg_reject_rel * rmax)
        throw StepRejected(dt, 0.5 * dt);
    for (double& r : rho_new)
        if (r < 0.0) r = 0.0;

    // explicit closing kick
    grid_detail::hamiltonian_grad_rho(grid, rho_new, phi_half, vpot, hbar, grad);
    std::vector<double> phi_new(phi_half.size());
    for (std::size_t i = 0; i < phi_new.size(); ++i) phi_new[i] = phi_half[i] - half * grad[i];

    return HydroState(grid, std::move(rho_new), std::move(phi_new));
}

// density transport rate -div(rho dPhi/dphi) in flux form; sums to zero
// exactly because every link appears twice with opposite sign
inline std::vector<double> continuity_rhs(const HydroState& state,
                                          const EdConstants& constants) {
    std::vector<double> flux;
    grid_detail::hamiltonian_grad_phi(state.grid, state.rho, state.phi, constants.hbar(),
                                      flux);
    const double inv_w = 1.0 / state.grid.weight();
    for (double& f : flux) f *= inv_w;
    return flux;
}

inline WaveState to_wave(const HydroState& state, const EdConstants& constants) {
    const double hbar = constants.hbar();
    const double cut = grid_detail::phi_mask_rel * grid_detail::max_of(state.rho);
    std::vector<std::complex<double>> psi(state.rho.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double amp = std::sqrt(state.rho[i]);
        if (state.rho[i] > cut) {
            const double th = state.phi[i] / hbar;
            psi[i] = std::complex<double>(amp * std::cos(th), amp * std::sin(th));
        } else {
            psi[i] = amp;   // phase undefined below the mask, fixed to 0
        }
    }
    return WaveState(state.grid, std::move(psi), hbar);
}

inline HydroState from_wave(const WaveState& wave, const EdConstants& constants) {
    if (std::fabs(wave.hbar - constants.hbar()) > 1e-12 * constants.hbar())
        throw std::invalid_argument("from_wave: wave hbar does not match constants");
    std::vector<double> rho(wave.psi.size()), phi(wave.psi.size());
    double rmax = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        rho[i] = std::norm(wave.psi[i]);
        rmax = std::max(rmax, rho[i]);
    }
    const double cut = grid_detail::phi_mask_rel * rmax;
    for (std::size_t i = 0; i < phi.size(); ++i)
        phi[i] = rho[i] > cut ? wave.hbar * std::arg(wave.psi[i]) : 0.0;
    return HydroState(wave.grid, std::move(rho), std::move(phi));
}

// Crank-Nicolson step: 1 site solves the full tridiagonal system, 2 sites
// use a potential/kinetic split with an exact unitary factor per axis (the
// axis kinetic operators commute, so only the potential split carries error)
inline WaveState step_schrodinger(const WaveState& wave, const std::vector<double>& vpot,
                                  double dt) {
    using grid_detail::cplx;
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("step_schrodinger: dt must be positive and finite");
    if (vpot.size() != wave.psi.size())
        throw std::invalid_argument("step_schrodinger: potential size mismatch");
    const AmplitudeGrid& grid = wave.grid;
    const double hbar = wave.hbar;
    const double h = grid.h();
    const double c = hbar * hbar / (2.0 * h * h);
    const double delta = 0.5 * dt / hbar;
    std::vector<cplx> psi = wave.psi;

    if (grid.sites == 1) {
        const int n = grid.points;
        std::vector<cplx> diag(static_cast<std::size_t>(n));
        std::vector<cplx> rhs(static_cast<std::size_t>(n));
        std::vector<cplx> scratch;
        const cplx off(0.0, -delta * c);
        for (int i = 0; i < n; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            diag[ii] = cplx(1.0, delta * (2.0 * c + vpot[ii]));
            cplx lap = 2.0 * psi[ii];
            if (i > 0) lap -= psi[ii - 1];
            if (i + 1 < n) lap -= psi[ii + 1];
            rhs[ii] = psi[ii] - cplx(0.0, delta) * (c * lap + vpot[ii] * psi[ii]);
        }
        grid_detail::thomas_const_offdiag(diag, off, rhs, scratch);
        return WaveState(grid, std::move(rhs), hbar);
    }

    // half potential phase
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double th = -delta * vpot[i];
        psi[i] *= cplx(std::cos(th), std::sin(th));
    }
    // Cayley factor along each axis
    const int n = grid.points;
    std::vector<cplx> diag(static_cast<std::size_t>(n), cplx(1.0, delta * 2.0 * c));
    const cplx off(0.0, -delta * c);
    std::vector<cplx> line(static_cast<std::size_t>(n));
    std::vector<cplx> rhs(static_cast<std::size_t>(n));
    std::vector<cplx> scratch;
    for (int ax = 0; ax < 2; ++ax) {
        grid_detail::for_each_line(grid, ax, [&](const grid_detail::LineSpan& ln) {
            for (int k = 0; k < ln.count; ++k)
                line[static_cast<std::size_t>(k)] =
                    psi[static_cast<std::size_t>(ln.start + k * ln.stride)];
            for (int k = 0; k < ln.count; ++k) {
                cplx lap = 2.0 * line[static_cast<std::size_t>(k)];
                if (k > 0) lap -= line[static_cast<std::size_t>(k - 1)];
                if (k + 1 < ln.count) lap -= line[static_cast<std::size_t>(k + 1)];
                rhs[static_cast<std::size_t>(k)] =
                    line[static_cast<std::size_t>(k)] - cplx(0.0, delta) * (c * lap);
            }
            grid_detail::thomas_const_offdiag(diag, off, rhs, scratch);
            for (int k = 0; k < ln.count; ++k)
                psi[static_cast<std::size_t>(ln.start + k * ln.stride)] =
                    rhs[static_cast<std::size_t>(k)];
        });
    }
    // second half potential phase
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double th = -delta * vpot[i];
        psi[i] *= cplx(std::cos(th), std::sin(th));
    }
    return WaveState(grid, std::move(psi), hbar);
}

// discrete <psi|H|psi> with the same Dirichlet stencil as the stepper
inline double wave_energy(const WaveState& wave, const std::vector<double>& vpot) {
    using grid_detail::cplx;
    const AmplitudeGrid& grid = wave.grid;
    const double h = grid.h();
    const double c = wave.hbar * wave.hbar / (2.0 * h * h);
    double e = 0.0;
    const int n = grid.points;
    for (int ax = 0; ax < grid.sites; ++ax) {
        grid_detail::for_each_line(grid, ax, [&](const grid_detail::LineSpan& ln) {
            for (int k = 0; k < ln.count; ++k) {
                const std::size_t i = static_cast<std::size_t>(ln.start + k * ln.stride);
                cplx lap = 2.0 * wave.psi[i];
                if (k > 0) lap -= wave.psi[i - static_cast<std::size_t>(ln.stride)];
                if (k + 1 < ln.count) lap -= wave.psi[i + static_cast<std::size_t>(ln.stride)];
                e += (std::conj(wave.psi[i]) * (c * lap)).real();
            }
        });
    }
    (void)n;
    for (std::size_t i = 0; i < wave.psi.size(); ++i)
        e += vpot[i] * std::norm(wave.psi[i]);
    return grid.weight() * e;
}

inline double nonlinear_coefficient(double eta, double k, double xi) {
    if (!(k > 0.0)) throw std::invalid_argument("nonlinear_coefficient: k must be positive");
    if (!(eta > 0.0) || !(xi > 0.0))
        throw std::invalid_argument("nonlinear_coefficient: eta and xi must be positive");
    return eta * eta / (2.0 * k * k) - 4.0 * xi;
}

struct GroundStateResult {
    WaveState wave;
    double energy;
    int iterations;
};

// inverse-iteration relaxation with M = (I + tau H)^-1; fixed points are
// exact eigenvectors of the discrete H, so no splitting bias enters
inline GroundStateResult ground_state_imaginary_time(const std::vector<double>& vpot,
                                                     const AmplitudeGrid& grid,
                                                     double hbar, int max_iter = 50000) {
    if (vpot.size() != static_cast<std::size_t>(grid.cells()))
        throw std::invalid_argument("ground_state_imaginary_time: potential size mismatch");
    if (!(hbar > 0.0) || !std::isfinite(hbar))
        throw std::invalid_argument("ground_state_imaginary_time: hbar must be positive");
    const double h = grid.h();
    const double c = hbar * hbar / (2.0 * h * h);
    const double w = grid.weight();
    const double tau = 1.0;
    const int n = grid.points;

    std::vector<double> psi(vpot.size());
    for (int ix = 0; ix < n; ++ix) {
        const double x = grid.coord(ix);
        if (grid.sites == 1) {
            psi[static_cast<std::size_t>(ix)] = std::exp(-0.5 * x * x);
        } else {
            for (int iy = 0; iy < n; ++iy) {
                const double y = grid.coord(iy);
                psi[static_cast<std::size_t>(grid.index(ix, iy))] =
                    std::exp(-0.5 * (x * x + y * y));
            }
        }
    }

    auto apply_h = [&](const std::vector<double>& v, std::vector<double>& out) {
        out.assign(v.size(), 0.0);
        for (int ax = 0; ax < grid.sites; ++ax) {
            grid_detail::for_each_line(grid, ax, [&](const grid_detail::LineSpan& ln) {
                for (int k = 0; k < ln.count; ++k) {
                    const std::size_t i = static_cast<std::size_t>(ln.start + k * ln.stride);
                    double lap = 2.0 * v[i];
                    if (k > 0) lap -= v[i - static_cast<std::size_t>(ln.stride)];
                    if (k + 1 < ln.count) lap -= v[i + static_cast<std::size_t>(ln.stride)];
                    out[i] += c * lap;
                }
            });
        }
        for (std::size_t i = 0; i < v.size(); ++i) out[i] += vpot[i] * v[i];
    };

    auto normalize = [&](std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        s = std::sqrt(s * w);
        for (double& x : v) x /= s;
    };

    // 1D: direct tridiagonal solve of (I + tau H); 2D: conjugate gradient
    std::vector<double> diag_1d, scratch_1d;
    if (grid.sites == 1) {
        diag_1d.resize(vpot.size());
        for (std::size_t i = 0; i < vpot.size(); ++i)
            diag_1d[i] = 1.0 + tau * (2.0 * c + vpot[i]);
    }
    auto solve_m = [&](std::vector<double>& v) {
        if (grid.sites == 1) {
            grid_detail::thomas_real(diag_1d, -tau * c, v, scratch_1d);
            return;
        }
        // CG on (I + tau H) x = v
        std::vector<double> x(v.size(), 0.0), r = v, p = v, hp(v.size());
        double rr = 0.0;
        for (double q : r) rr += q * q;
        const double tol2 = rr * 1e-26;
        for (int it = 0; it < 10000 && rr > tol2; ++it) {
            apply_h(p, hp);
            for (std::size_t i = 0; i < hp.size(); ++i) hp[i] = p[i] + tau * hp[i];
            double php = 0.0;
            for (std::size_t i = 0; i < hp.size(); ++i) php += p[i] * hp[i];
            const double alpha = rr / php;
            double rr_new = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
                rr_new += r[i] * r[i];
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
        }
        v = x;
    };

    normalize(psi);
    std::vector<double> hpsi(psi.size());
    double e_prev = 0.0;
    int stable = 0;
    int it = 0;
    for (; it < max_iter; ++it) {
        solve_m(psi);
        normalize(psi);
        apply_h(psi, hpsi);
        double e = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i) e += psi[i] * hpsi[i];
        e *= w;
        if (it > 0 && std::fabs(e - e_prev) <= 1e-13 * std::max(1.0, std::fabs(e))) {
            if (++stable >= 2) {
                e_prev = e;
                break;
            }
        } else {
            stable = 0;
        }
        e_prev = e;
    }
    if (it == max_iter)
        throw std::runtime_error("ground_state_imaginary_time: no convergence in max iterations");

    std::vector<std::complex<double>> out(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] = psi[i];
    return {WaveState(grid, std::move(out), hbar), e_prev, it};
}

struct EquivalenceReport {
    double max_discrepancy = 0.0;
    double h_drift_rel = 0.0;
    double mass_drift = 0.0;
    double norm_drift = 0.0;
    bool inconclusive = false;   // interior density node encountered
    int steps = 0;
    // sampled rows: t, H, wave norm^2, running max discrepancy
    std::vector<std::array<double, 4>> series;
};

namespace grid_detail {

// interior cell below the phase mask flanked by live cells on both sides
inline bool has_interior_node(const AmplitudeGrid& grid, const std::vector<double>& rho) {
    const double rmax = max_of(rho);
    const double dead = phi_mask_rel * rmax;
    const double live = 1e-6 * rmax;
    bool found = false;
    for (int ax = 0; ax < grid.sites && !found; ++ax) {
        for_each_line(grid, ax, [&](const LineSpan& ln) {
            if (found) return;
            double left_peak = 0.0;
            for (int k = 0; k < ln.count; ++k) {
                const std::size_t i = static_cast<std::size_t>(ln.start + k * ln.stride);
                if (rho[i] < dead && left_peak > live) {
                    for (int k2 = k + 1; k2 < ln.count; ++k2) {
                        const std::size_t j =
                            static_cast<std::size_t>(ln.start + k2 * ln.stride);
                        if (rho[j] > live) {
                            found = true;
                            return;
                        }
                    }
                }
                left_peak = std::max(left_peak, rho[i]);
            }
        });
    }
    return found;
}

}  // namespace grid_detail

// run both pictures side by side from the same initial data and report the
// largest density disagreement seen over [0, T]
inline EquivalenceReport equivalence_test(const HydroState& initial,
                                          const std::vector<double>& vpot,
                                          const EdConstants& constants, double t_final,
                                          double dt, int sample_every = 1) {
    if (!(t_final > 0.0)) throw std::invalid_argument("equivalence_test: T must be positive");
    const int steps = static_cast<int>(std::llround(t_final / dt));
    if (steps < 1) throw std::invalid_argument("equivalence_test: T/dt below one step");

    EquivalenceReport rep;
    rep.steps = steps;
    HydroState hydro = initial;
    WaveState wave = to_wave(initial, constants);
    const double h0 = ensemble_hamiltonian(hydro, vpot, constants);
    const double mass0 = hydro.mass();
    const double norm0 = wave.norm2();
    rep.series.push_back({0.0, h0, norm0, 0.0});

    for (int s = 1; s <= steps; ++s) {
        hydro = step_hamilton(hydro, vpot, constants, dt);
        wave = step_schrodinger(wave, vpot, dt);
        double disc = 0.0;
        for (std::size_t i = 0; i < hydro.rho.size(); ++i)
            disc = std::max(disc, std::fabs(hydro.rho[i] - std::norm(wave.psi[i])));
        rep.max_discrepancy = std::max(rep.max_discrepancy, disc);
        if (!rep.inconclusive && grid_detail::has_interior_node(hydro.grid, hydro.rho))
            rep.inconclusive = true;
        if (s % sample_every == 0 || s == steps) {
            const double hcur = ensemble_hamiltonian(hydro, vpot, constants);
            rep.series.push_back(
                {s * dt, hcur, wave.norm2(), rep.max_discrepancy});
        }
    }
    const double h1 = ensemble_hamiltonian(hydro, vpot, constants);
    rep.h_drift_rel = std::fabs(h1 - h0) / std::max(1e-300, std::fabs(h0));
    rep.mass_drift = std::fabs(hydro.mass() - mass0);
    rep.norm_drift = std::fabs(wave.norm2() - norm0);
    return rep;
}

// per-axis lattice derivative of a grid field, 2nd order central with
// one-sided ends; feeds the velocity views and the walker drift
inline std::vector<double> grid_gradient(const AmplitudeGrid& grid,
                                         const std::vector<double>& field, int axis) {
    if (field.size() != static_cast<std::size_t>(grid.cells()))
        throw std::invalid_argument("grid_gradient: field size mismatch");
    if (axis < 0 || axis >= grid.sites)
        throw std::invalid_argument("grid_gradient: bad axis");
    std::vector<double> out(field.size());
    const double inv2h = 1.0 / (2.0 * grid.h());
    const double invh = 1.0 / grid.h();
    grid_detail::for_each_line(grid, axis, [&](const grid_detail::LineSpan& ln) {
        auto at = [&](int k) {
            return field[static_cast<std::size_t>(ln.start + k * ln.stride)];
        };
        auto put = [&](int k, double v) {
            out[static_cast<std::size_t>(ln.start + k * ln.stride)] = v;
        };
        put(0, (at(1) - at(0)) * invh);
        for (int k = 1; k + 1 < ln.count; ++k) put(k, (at(k + 1) - at(k - 1)) * inv2h);
        put(ln.count - 1, (at(ln.count - 1) - at(ln.count - 2)) * invh);
    });
    return out;
}

struct VelocityFields {
    std::vector<std::vector<double>> v;   // current velocity dPhi/dphi per axis
    std::vector<std::vector<double>> u;   // osmotic velocity per axis
    std::vector<std::vector<double>> b;   // drift velocity b = v - u per axis
};

inline VelocityFields hydro_velocities(const HydroState& state, const EdConstants& constants) {
    VelocityFields f;
    const double cut = grid_detail::phi_mask_rel * grid_detail::max_of(state.rho);
    std::vector<double> logr(state.rho.size());
    for (std::size_t i = 0; i < logr.size(); ++i)
        logr[i] = std::log(std::max(state.rho[i], std::max(cut, grid_detail::rho_abs_floor)));
    for (int ax = 0; ax < state.grid.sites; ++ax) {
        f.v.push_back(grid_gradient(state.grid, state.phi, ax));
        auto dlog = grid_gradient(state.grid, logr, ax);
        std::vector<double> u(dlog.size()), b(dlog.size());
        for (std::size_t i = 0; i < dlog.size(); ++i) {
            u[i] = -0.5 * constants.eta * dlog[i];
            b[i] = f.v.back()[i] - u[i];
        }
        f.u.push_back(std::move(u));
        f.b.push_back(std::move(b));
    }
    return f;
}

// relative L2 residual of (phi_hat p_hat - p_hat phi_hat) psi against
// i hbar psi, with p_hat a 6th-order first-derivative stencil, 1-site grids
inline double commutator_residual(const WaveState& wave) {
    using grid_detail::cplx;
    if (wave.grid.sites != 1)
        throw std::invalid_argument("commutator_residual: one-site grids only");
    const int n = wave.grid.points;
    const double h = wave.grid.h();
    auto deriv = [&](const std::vector<cplx>& f, std::vector<cplx>& out) {
        out.assign(f.size(), cplx(0.0, 0.0));
        auto get = [&](int i) {
            return (i < 0 || i >= n) ? cplx(0.0, 0.0) : f[static_cast<std::size_t>(i)];
        };
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] =
                (45.0 * (get(i + 1) - get(i - 1)) - 9.0 * (get(i + 2) - get(i - 2)) +
                 (get(i + 3) - get(i - 3))) /
                (60.0 * h);
    };
    std::vector<cplx> xpsi(wave.psi.size());
    for (int i = 0; i < n; ++i)
        xpsi[static_cast<std::size_t>(i)] =
            wave.grid.coord(i) * wave.psi[static_cast<std::size_t>(i)];
    std::vector<cplx> dpsi, dxpsi;
    deriv(wave.psi, dpsi);
    deriv(xpsi, dxpsi);
    const cplx mih(0.0, -wave.hbar);   // p_hat = -i hbar d/dphi
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const cplx comm = wave.grid.coord(i) * (mih * dpsi[ii]) - mih * dxpsi[ii];
        const cplx want = cplx(0.0, wave.hbar) * wave.psi[ii];
        num += std::norm(comm - want);
        den += std::norm(want);
    }
    return std::sqrt(num / den);
}

// normalized Gaussian hydro state centered at the given per-site means
inline HydroState make_gaussian_hydro(const AmplitudeGrid& grid,
                                      const std::vector<double>& center, double variance) {
    if (static_cast<int>(center.size()) != grid.sites)
        throw std::invalid_argument("make_gaussian_hydro: center size mismatch");
    if (!(variance > 0.0)) throw std::invalid_argument("make_gaussian_hydro: variance must be positive");
    std::vector<double> raw(static_cast<std::size_t>(grid.cells()));
    const int n = grid.points;
    for (int ix = 0; ix < n; ++ix) {
        const double dx = grid.coord(ix) - center[0];
        if (grid.sites == 1) {
            raw[static_cast<std::size_t>(ix)] = std::exp(-0.5 * dx * dx / variance);
        } else {
            for (int iy = 0; iy < n; ++iy) {
                const double dy = grid.coord(iy) - center[1];
                raw[static_cast<std::size_t>(grid.index(ix, iy))] =
                    std::exp(-0.5 * (dx * dx + dy * dy) / variance);
            }
        }
    }
    auto rho = normalized_density(grid, std::move(raw));
    std::vector<double> phi(rho.size(), 0.0);
    return HydroState(grid, std::move(rho), std::move(phi));
}

}
