#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace entrofield {

// Uniform grid over configuration space for 1 or 2 field sites: each axis is
// one site's amplitude, range [-L, L], symmetric about 0. Cost is points^V,
// which is why V stops at 2.
struct AmplitudeGrid {
    int sites = 1;     // configuration-space dimension V
    int points = 201;  // per axis, odd
    double extent = 8.0;

    AmplitudeGrid(int v, int n, double l) : sites(v), points(n), extent(l) {
        if (sites < 1 || sites > 2)
            throw std::invalid_argument("AmplitudeGrid: sites must be 1 or 2");
        if (points < 201 || points % 2 == 0)
            throw std::invalid_argument("AmplitudeGrid: points must be odd and >= 201");
        if (!(extent > 0.0) || !std::isfinite(extent))
            throw std::invalid_argument("AmplitudeGrid: extent must be positive and finite");
    }

    double h() const { return 2.0 * extent / (points - 1); }
    double coord(int i) const { return -extent + h() * i; }

    std::int64_t cells() const {
        std::int64_t c = points;
        if (sites == 2) c *= points;
        return c;
    }

    // cell volume h^V
    double weight() const {
        double w = h();
        if (sites == 2) w *= h();
        return w;
    }

    std::int64_t index(int ix, int iy = 0) const {
        return sites == 1 ? ix : static_cast<std::int64_t>(ix) * points + iy;
    }

    bool operator==(const AmplitudeGrid& o) const {
        return sites == o.sites && points == o.points && extent == o.extent;
    }
};

// eta sets the fluctuation scale, xi the quantum-potential strength; the
// wave-picture constants follow as khat = (eta^2/8 xi)^(1/2), hbar = eta/khat
struct EdConstants {
    double eta = 1.0;
    double xi = 0.125;

    EdConstants(double eta_, double xi_) : eta(eta_), xi(xi_) {
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw std::invalid_argument("EdConstants: eta must be positive and finite");
        if (!(xi > 0.0) || !std::isfinite(xi))
            throw std::invalid_argument("EdConstants: xi must be positive and finite");
        const double k = khat();
        const double direct = std::sqrt(8.0 * xi);
        if (std::fabs(eta / k - direct) > 1e-12 * direct)
            throw std::logic_error("EdConstants: hbar identity violated");
    }

    double khat() const { return eta / std::sqrt(8.0 * xi); }
    double hbar() const { return eta / khat(); }   // equals sqrt(8 xi)
};

namespace grid_detail {

inline constexpr double rho_neg_reject_rel = 1e-12;   // step rejection threshold
inline constexpr double phi_mask_rel = 1e-12;         // phase undefined below this
inline constexpr double kick_mask_rel = 1e-17;        // ratio guard in dH/drho
inline constexpr double rho_abs_floor = 1e-300;

inline double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

}  // namespace grid_detail

// density and velocity potential over the amplitude grid
struct HydroState {
    AmplitudeGrid grid;
    std::vector<double> rho;
    std::vector<double> phi;

    HydroState(AmplitudeGrid g, std::vector<double> r, std::vector<double> p)
        : grid(g), rho(std::move(r)), phi(std::move(p)) {
        if (rho.size() != static_cast<std::size_t>(grid.cells()) || phi.size() != rho.size())
            throw std::invalid_argument("HydroState: field size does not match grid");
        double mass = 0.0;
        for (double x : rho) {
            if (x < 0.0) throw std::invalid_argument("HydroState: negative density");
            if (!std::isfinite(x)) throw std::invalid_argument("HydroState: non-finite density");
            mass += x;
        }
        mass *= grid.weight();
        if (std::fabs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("HydroState: density not normalized, mass = " +
                                        std::to_string(mass));
        const double cut = grid_detail::phi_mask_rel * grid_detail::max_of(rho);
        for (std::size_t i = 0; i < rho.size(); ++i)
            if (rho[i] > cut && !std::isfinite(phi[i]))
                throw std::invalid_argument("HydroState: non-finite phase on support");
    }

    double mass() const {
        double s = 0.0;
        for (double x : rho) s += x;
        return s * grid.weight();
    }
};

// divide raw nonnegative values by their grid mass
inline std::vector<double> normalized_density(const AmplitudeGrid& grid,
                                              std::vector<double> raw) {
    double s = 0.0;
    for (double x : raw) s += x;
    s *= grid.weight();
    if (!(s > 0.0)) throw std::invalid_argument("normalized_density: zero total mass");
    for (double& x : raw) x /= s;
    return raw;
}

struct WaveState {
    AmplitudeGrid grid;
    std::vector<std::complex<double>> psi;
    double hbar = 1.0;

    WaveState(AmplitudeGrid g, std::vector<std::complex<double>> p, double hb)
        : grid(g), psi(std::move(p)), hbar(hb) {
        if (psi.size() != static_cast<std::size_t>(grid.cells()))
            throw std::invalid_argument("WaveState: field size does not match grid");
        if (!(hbar > 0.0) || !std::isfinite(hbar))
            throw std::invalid_argument("WaveState: hbar must be positive and finite");
        double n = 0.0;
        for (const auto& z : psi) n += std::norm(z);
        n *= grid.weight();
        if (std::fabs(n - 1.0) > 1e-9)
            throw std::invalid_argument("WaveState: wave not normalized, norm^2 = " +
                                        std::to_string(n));
    }

    double norm2() const {
        double n = 0.0;
        for (const auto& z : psi) n += std::norm(z);
        return n * grid.weight();
    }
};

}
