#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace entrofield {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Periodic hypercubic lattice, 1 to 3 axes, row-major site order (last axis
// fastest). Site count per axis may be 1; gradients along such an axis vanish.
struct LatticeSpec {
    std::vector<int> dims;
    double spacing = 1.0;

    int ndim() const { return static_cast<int>(dims.size()); }

    std::int64_t volume() const {
        std::int64_t v = 1;
        for (int n : dims) v *= n;
        return v;
    }

    // measure factor a^d carried by sums over sites
    double cell_measure() const {
        double w = 1.0;
        for (int i = 0; i < ndim(); ++i) w *= spacing;
        return w;
    }

    std::int64_t site_index(const std::array<int, 3>& c) const {
        std::int64_t idx = 0;
        for (int ax = 0; ax < ndim(); ++ax) idx = idx * dims[ax] + c[ax];
        return idx;
    }

    std::array<int, 3> site_coords(std::int64_t idx) const {
        std::array<int, 3> c{0, 0, 0};
        for (int ax = ndim() - 1; ax >= 0; --ax) {
            c[ax] = static_cast<int>(idx % dims[ax]);
            idx /= dims[ax];
        }
        return c;
    }

    // periodic neighbor along axis; dir is +1 or -1
    std::int64_t neighbor(std::int64_t idx, int axis, int dir) const {
        auto c = site_coords(idx);
        const int n = dims[axis];
        c[axis] = (c[axis] + dir + n) % n;
        return site_index(c);
    }

    bool operator==(const LatticeSpec& o) const {
        return dims == o.dims && spacing == o.spacing;
    }
};

inline LatticeSpec build_lattice(std::vector<int> dims, double spacing) {
    if (dims.empty() || dims.size() > 3)
        throw std::invalid_argument("build_lattice: need 1 to 3 axes, got " +
                                    std::to_string(dims.size()));
    for (int n : dims)
        if (n < 1)
            throw std::invalid_argument("build_lattice: axis size must be >= 1, got " +
                                        std::to_string(n));
    if (!(spacing > 0.0) || !std::isfinite(spacing))
        throw std::invalid_argument("build_lattice: spacing must be positive and finite");
    LatticeSpec s;
    s.dims = std::move(dims);
    s.spacing = spacing;
    return s;
}

// one real value per site
struct FieldConfig {
    LatticeSpec lattice;
    Vec values;

    FieldConfig(LatticeSpec l, Vec v) : lattice(std::move(l)), values(std::move(v)) {
        if (values.size() != lattice.volume())
            throw std::invalid_argument("FieldConfig: value count does not match volume");
    }
};

struct Mode {
    std::array<int, 3> n{0, 0, 0};
    double k2hat = 0.0;   // squared lattice momentum
    double omega = 0.0;
    bool zero_mode = false;
};

struct ModeTable {
    LatticeSpec lattice;
    double mass = 0.0;
    std::vector<Mode> modes;   // row-major over mode numbers
    bool has_zero_mode = false;
};

// dispersion omega(n) = sqrt(khat^2 + m^2), khat_i = (2/a) sin(pi n_i / N_i)
inline ModeTable mode_table(const LatticeSpec& lattice, double mass) {
    if (mass < 0.0 || !std::isfinite(mass))
        throw std::invalid_argument("mode_table: mass must be >= 0 and finite");
    ModeTable t;
    t.lattice = lattice;
    t.mass = mass;
    const std::int64_t v = lattice.volume();
    t.modes.reserve(static_cast<std::size_t>(v));
    const double pi = 3.14159265358979323846264338327950288;
    for (std::int64_t idx = 0; idx < v; ++idx) {
        Mode m;
        m.n = lattice.site_coords(idx);
        double k2 = 0.0;
        for (int ax = 0; ax < lattice.ndim(); ++ax) {
            const double s = 2.0 / lattice.spacing *
                             std::sin(pi * m.n[ax] / lattice.dims[ax]);
            k2 += s * s;
        }
        m.k2hat = k2;
        m.omega = std::sqrt(k2 + mass * mass);
        m.zero_mode = (m.omega == 0.0);
        t.has_zero_mode = t.has_zero_mode || m.zero_mode;
        t.modes.push_back(m);
    }
    return t;
}

// K = -laplacian + m^2 in the site basis; dense, guarded by size
inline Mat kinetic_matrix(const LatticeSpec& lattice, double mass,
                          std::int64_t max_volume = 4096) {
    if (lattice.volume() > max_volume)
        throw std::invalid_argument("kinetic_matrix: volume " +
                                    std::to_string(lattice.volume()) +
                                    " exceeds dense limit " + std::to_string(max_volume));
    if (mass < 0.0 || !std::isfinite(mass))
        throw std::invalid_argument("kinetic_matrix: mass must be >= 0 and finite");
    const std::int64_t v = lattice.volume();
    const double inv_a2 = 1.0 / (lattice.spacing * lattice.spacing);
    Mat k = Mat::Zero(v, v);
    for (std::int64_t i = 0; i < v; ++i) {
        k(i, i) = mass * mass;
        for (int ax = 0; ax < lattice.ndim(); ++ax) {
            if (lattice.dims[ax] == 1) continue;   // no gradient along this axis
            k(i, i) += 2.0 * inv_a2;
            k(i, lattice.neighbor(i, ax, +1)) -= inv_a2;
            k(i, lattice.neighbor(i, ax, -1)) -= inv_a2;
        }
    }
    return k;
}

// metric distance sqrt(a^d sum (dphi)^2) between two configurations
inline double config_distance(const LatticeSpec& lattice, const Vec& a, const Vec& b) {
    if (a.size() != lattice.volume() || b.size() != lattice.volume())
        throw std::invalid_argument("config_distance: size mismatch with lattice volume");
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(lattice.cell_measure() * s);
}

// site potential coefficients: 0.5 m^2 phi^2 + lambda3 phi^3 + lambda4 phi^4
struct PotentialSpec {
    double mass = 1.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;

    PotentialSpec() = default;
    PotentialSpec(double m, double l3, double l4) : mass(m), lambda3(l3), lambda4(l4) {
        if (mass < 0.0 || !std::isfinite(mass))
            throw std::invalid_argument("PotentialSpec: mass must be >= 0 and finite");
        if (!std::isfinite(lambda3) || !std::isfinite(lambda4))
            throw std::invalid_argument("PotentialSpec: couplings must be finite");
    }
};

}
