#pragma once

#include "entrofield/amplitude_grid.hpp"
#include "entrofield/gaussian_state.hpp"
#include "entrofield/grid_dynamics.hpp"
#include "entrofield/kernel.hpp"
#include "entrofield/lattice.hpp"
#include "entrofield/rng.hpp"
#include "entrofield/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace entrofield {

// supplies dLambda/dphi at a walker configuration; returns false when the
// walker left the trusted domain (caller freezes it)
struct DriftProvider {
    virtual ~DriftProvider() = default;
    virtual bool drift_gradient(const Vec& phi, Vec& grad) const = 0;
};

struct ZeroDriftProvider final : DriftProvider {
    bool drift_gradient(const Vec& phi, Vec& grad) const override {
        grad.setZero(phi.size());
        return true;
    }
};

// trapezoid cumulative of a one-site grid density, piecewise linear between
// nodes; shared by the walker sampler and the KS oracle so both sides of the
// comparison see the same distribution
class GridCdf {
public:
    GridCdf(const AmplitudeGrid& grid, const std::vector<double>& rho) : grid_(grid) {
        if (grid.sites != 1)
            throw std::invalid_argument("GridCdf: one-site grids only");
        if (rho.size() != static_cast<std::size_t>(grid.cells()))
            throw std::invalid_argument("GridCdf: density size mismatch");
        f_.resize(rho.size(), 0.0);
        const double h = grid.h();
        for (std::size_t i = 1; i < rho.size(); ++i) {
            const double ra = std::max(0.0, rho[i - 1]);
            const double rb = std::max(0.0, rho[i]);
            f_[i] = f_[i - 1] + 0.5 * h * (ra + rb);
        }
        const double total = f_.back();
        if (!(total > 0.0))
            throw std::invalid_argument("GridCdf: zero total mass");
        for (double& v : f_) v /= total;
    }

    double operator()(double x) const {
        const double h = grid_.h();
        if (x <= grid_.coord(0)) return 0.0;
        if (x >= grid_.coord(grid_.points - 1)) return 1.0;
        const double s = (x + grid_.extent) / h;
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, grid_.points - 2);
        const double t = s - i;
        return f_[static_cast<std::size_t>(i)] * (1.0 - t) +
               f_[static_cast<std::size_t>(i + 1)] * t;
    }

    double inverse(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        const auto it = std::lower_bound(f_.begin(), f_.end(), u);
        if (it == f_.begin()) return grid_.coord(0);
        if (it == f_.end()) return grid_.coord(grid_.points - 1);
        const auto j = static_cast<int>(it - f_.begin());
        const double fa = f_[static_cast<std::size_t>(j - 1)];
        const double fb = f_[static_cast<std::size_t>(j)];
        const double t = fb > fa ? (u - fa) / (fb - fa) : 0.0;
        return grid_.coord(j - 1) + t * grid_.h();
    }

private:
    AmplitudeGrid grid_;
    std::vector<double> f_;
};

// inverse-CDF draw from a one-site grid density
class GridDensitySampler {
public:
    GridDensitySampler(const AmplitudeGrid& grid, const std::vector<double>& rho)
        : cdf_(grid, rho) {}

    Vec operator()(Rng& rng) const {
        Vec out(1);
        out[0] = cdf_.inverse(rng.uniform());
        return out;
    }

private:
    GridCdf cdf_;
};

// Catmull-Rom interpolation of the drift gradient on a one-site grid;
// nodes carry (1/eta) dPhi/dphi + (1/2) dlog(rho)/dphi. Walkers beyond
// |phi| > L - 2h have no stencil support and are reported out of domain.
class GridDriftProvider final : public DriftProvider {
public:
    GridDriftProvider(const HydroState& state, const EdConstants& constants)
        : grid_(state.grid) {
        if (grid_.sites != 1)
            throw std::invalid_argument("GridDriftProvider: one-site grids only");
        const VelocityFields f = hydro_velocities(state, constants);
        nodes_.resize(f.b[0].size());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            nodes_[i] = f.b[0][i] / constants.eta;
        limit_ = grid_.extent - 2.0 * grid_.h();
    }

    bool drift_gradient(const Vec& phi, Vec& grad) const override {
        if (phi.size() != 1)
            throw std::invalid_argument("GridDriftProvider: V=1 walkers only");
        const double x = phi[0];
        grad.resize(1);
        if (!(std::fabs(x) <= limit_)) return false;
        const double h = grid_.h();
        const double s = (x + grid_.extent) / h;
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 1, grid_.points - 3);
        const double t = s - i;
        const double fm = nodes_[static_cast<std::size_t>(i - 1)];
        const double f0 = nodes_[static_cast<std::size_t>(i)];
        const double f1 = nodes_[static_cast<std::size_t>(i + 1)];
        const double f2 = nodes_[static_cast<std::size_t>(i + 2)];
        grad[0] = 0.5 * (2.0 * f0 + (-fm + f1) * t +
                         (2.0 * fm - 5.0 * f0 + 4.0 * f1 - f2) * t * t +
                         (-fm + 3.0 * f0 - 3.0 * f1 + f2) * t * t * t);
        return true;
    }

private:
    AmplitudeGrid grid_;
    std::vector<double> nodes_;
    double limit_ = 0.0;
};

// closed-form drift for a Gaussian state: Lambda = Phi/eta + log rho^{1/2}
// gives dLambda/dphi = -[(hbar/eta) Im A + Re A] phi
class GaussianDriftProvider final : public DriftProvider {
public:
    GaussianDriftProvider(const GaussianState& state, double eta) {
        if (!(eta > 0.0))
            throw std::invalid_argument("GaussianDriftProvider: eta must be positive");
        m_ = (state.hbar / eta) * state.a.imag() + state.a.real();
    }

    bool drift_gradient(const Vec& phi, Vec& grad) const override {
        if (phi.size() != m_.rows())
            throw std::invalid_argument("GaussianDriftProvider: size mismatch");
        grad = -(m_ * phi);
        return true;
    }

private:
    Mat m_;
};

struct WalkerEnsemble {
    LatticeSpec lattice;
    Mat walkers;                       // one row per walker
    std::vector<Rng> streams;          // per-walker stream keyed by (seed, index)
    std::vector<std::uint8_t> frozen;
    std::uint64_t seed = 0;
    std::int64_t steps = 0;
    double dt = 0.0;                   // pinned on first advance

    std::int64_t n() const { return walkers.rows(); }
    double time() const { return static_cast<double>(steps) * dt; }
    std::int64_t frozen_count() const {
        std::int64_t c = 0;
        for (auto f : frozen) c += f;
        return c;
    }
};

inline WalkerEnsemble init_ensemble(const LatticeSpec& lattice,
                                    const std::function<Vec(Rng&)>& sample_rho0,
                                    std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("init_ensemble: need n >= 1");
    WalkerEnsemble e;
    e.lattice = lattice;
    e.seed = seed;
    e.walkers.resize(n, lattice.volume());
    e.streams.reserve(static_cast<std::size_t>(n));
    e.frozen.assign(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i) {
        e.streams.push_back(Rng::for_stream(seed, static_cast<std::uint64_t>(i)));
        const Vec c = sample_rho0(e.streams.back());
        if (c.size() != lattice.volume())
            throw std::invalid_argument("init_ensemble: sampler size mismatch");
        e.walkers.row(i) = c.transpose();
    }
    return e;
}

namespace ensemble_detail {

// routes provider gradients through the shared kernel stepping path
class ProviderDrift final : public DriftPotential {
public:
    explicit ProviderDrift(const DriftProvider& p) : p_(&p) {}
    double value(const Vec&) const override { return 0.0; }   // stepping never reads it
    Vec gradient(const Vec& phi) const override {
        Vec g;
        if (!p_->drift_gradient(phi, g))
            throw std::runtime_error("drift gradient requested outside provider domain");
        return g;
    }

private:
    const DriftProvider* p_;
};

inline int worker_count(std::int64_t n) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* s = std::getenv("ENTROFIELD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end != s && v >= 1) hw = static_cast<int>(std::min<long>(v, 256));
    }
    return static_cast<int>(std::min<std::int64_t>(hw, n));
}

}

// one maxent step per walker; scheduling-independent because every walker
// owns its rng stream and its matrix row
inline void advance(WalkerEnsemble& e, const DriftProvider& provider, double eta, double dt) {
    if (!(eta > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("advance: eta and dt must be positive");
    if (e.steps > 0 && dt != e.dt)
        throw std::invalid_argument("advance: dt is fixed for the lifetime of a run");
    e.dt = dt;
    ensemble_detail::ProviderDrift adapter(provider);
    const TransitionKernel kernel(e.lattice, eta, dt, &adapter);
    auto work = [&](std::int64_t lo, std::int64_t hi) {
        Vec g(e.lattice.volume());
        for (std::int64_t i = lo; i < hi; ++i) {
            if (e.frozen[static_cast<std::size_t>(i)]) continue;
            const Vec phi = e.walkers.row(i).transpose();
            if (!provider.drift_gradient(phi, g)) {
                e.frozen[static_cast<std::size_t>(i)] = 1;
                continue;
            }
            e.walkers.row(i) = sample_step(kernel, phi, e.streams[static_cast<std::size_t>(i)])
                                   .transpose();
        }
    };
    const int nw = ensemble_detail::worker_count(e.n());
    if (nw <= 1) {
        work(0, e.n());
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        const std::int64_t chunk = (e.n() + nw - 1) / nw;
        for (int w = 0; w < nw; ++w) {
            const std::int64_t lo = w * chunk;
            const std::int64_t hi = std::min<std::int64_t>(lo + chunk, e.n());
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& t : pool) t.join();
    }
    e.steps += 1;
}

// nearest-node histogram over the amplitude grid, normalized to unit sum
inline std::vector<double> empirical_density(const WalkerEnsemble& e, const AmplitudeGrid& grid) {
    const std::int64_t v = e.lattice.volume();
    if (v > 2)
        throw std::invalid_argument("empirical_density: V <= 2 only");
    if (grid.sites != static_cast<int>(v))
        throw std::invalid_argument("empirical_density: grid sites must match V");
    std::vector<double> hist(static_cast<std::size_t>(grid.cells()), 0.0);
    const double h = grid.h();
    auto bin = [&](double x) {
        const auto j = static_cast<int>(std::llround((x + grid.extent) / h));
        return std::clamp(j, 0, grid.points - 1);
    };
    for (std::int64_t i = 0; i < e.n(); ++i) {
        const auto ix = bin(e.walkers(i, 0));
        const auto iy = v == 2 ? bin(e.walkers(i, 1)) : 0;
        hist[static_cast<std::size_t>(grid.index(ix, iy))] += 1.0;
    }
    for (double& c : hist) c /= static_cast<double>(e.n());
    return hist;
}

// chi-square goodness of fit; adjacent bins pooled until every expected
// count reaches 5, trailing remainder merged backwards
inline double chi2_gof_pvalue(const std::vector<double>& observed_counts,
                              const std::vector<double>& expected_counts) {
    if (observed_counts.size() != expected_counts.size() || observed_counts.empty())
        throw std::invalid_argument("chi2_gof_pvalue: size mismatch");
    std::vector<double> obs, exp;
    double co = 0.0, ce = 0.0;
    for (std::size_t i = 0; i < observed_counts.size(); ++i) {
        co += observed_counts[i];
        ce += expected_counts[i];
        if (ce >= 5.0) {
            obs.push_back(co);
            exp.push_back(ce);
            co = ce = 0.0;
        }
    }
    if (ce > 0.0 || co > 0.0) {
        if (exp.empty()) throw std::invalid_argument("chi2_gof_pvalue: too few expected counts");
        obs.back() += co;
        exp.back() += ce;
    }
    if (obs.size() < 2) throw std::invalid_argument("chi2_gof_pvalue: fewer than 2 pooled bins");
    double chi2 = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - exp[i];
        chi2 += d * d / exp[i];
    }
    return chi2_pvalue(chi2, static_cast<int>(obs.size()) - 1);
}

struct FokkerPlanckReport {
    double ks = 0.0;
    double bound = 0.0;
    double frozen_fraction = 0.0;
    std::int64_t n = 0;
    std::int64_t steps = 0;
    bool pass = false;
};

// co-evolves the grid state and the walker cloud; the drift each step comes
// from the grid state at the start of that step
inline FokkerPlanckReport fokker_planck_consistency(const HydroState& initial,
                                                    const std::vector<double>& vpot,
                                                    const EdConstants& constants,
                                                    std::int64_t n, double t_final, double dt,
                                                    std::uint64_t seed,
                                                    double allowance = 5e-3) {
    if (initial.grid.sites != 1)
        throw std::invalid_argument("fokker_planck_consistency: one-site grids only");
    if (!(t_final > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("fokker_planck_consistency: need T, dt > 0");
    const auto steps = static_cast<std::int64_t>(std::llround(t_final / dt));
    if (steps < 1 || std::fabs(static_cast<double>(steps) * dt - t_final) >
                         1e-9 * std::max(1.0, t_final))
        throw std::invalid_argument("fokker_planck_consistency: T must be a multiple of dt");

    const GridDensitySampler sampler(initial.grid, initial.rho);
    WalkerEnsemble e = init_ensemble(build_lattice({1}, 1.0), sampler, n, seed);
    HydroState state = initial;
    for (std::int64_t s = 0; s < steps; ++s) {
        const GridDriftProvider provider(state, constants);
        advance(e, provider, constants.eta, dt);
        state = step_hamilton(state, vpot, constants, dt);
    }

    FokkerPlanckReport report;
    report.n = n;
    report.steps = steps;
    report.frozen_fraction =
        static_cast<double>(e.frozen_count()) / static_cast<double>(n);
    if (report.frozen_fraction > 0.01)
        throw std::runtime_error("fokker_planck_consistency: " +
                                 std::to_string(100.0 * report.frozen_fraction) +
                                 "% of walkers frozen, run void");
    const GridCdf cdf(state.grid, state.rho);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = e.walkers(i, 0);
    report.ks = ks_statistic(xs, [&](double x) { return cdf(x); });
    report.bound = 4.0 / std::sqrt(static_cast<double>(n)) + allowance;
    report.pass = report.ks < report.bound;
    return report;
}

}
