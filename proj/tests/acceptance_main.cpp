// Acceptance gate: every release-blocking claim in one binary, one line per
// criterion, nonzero exit when anything fails. Tolerances are pinned here on
// purpose; loosening them is a review event, not a local edit.

#include "entrofield/ensemble.hpp"
#include "entrofield/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

using namespace entrofield;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

void verdict(int id, const char* name, bool pass, const std::string& details) {
    std::printf("criterion %d (%s): %s (%s)\n", id, name, pass ? "PASS" : "FAIL",
                details.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

// 1. one-site fluctuation law of the sampled kernel
void criterion_fluctuation_law() {
    const auto t0 = std::chrono::steady_clock::now();
    const LatticeSpec lattice = build_lattice({4}, 1.0);
    const double eta = 0.7, dt = 0.02;
    const double step_var = eta * dt;
    const TransitionKernel kernel(lattice, eta, dt);
    const int n = 100000;
    const auto v = lattice.volume();

    Rng rng = Rng::for_stream(10101, 0);
    const Vec phi0 = Vec::Zero(v);
    Mat samples(n, v);
    for (int i = 0; i < n; ++i) samples.row(i) = sample_step(kernel, phi0, rng).transpose();
    const Vec mean = samples.colwise().mean();
    const Mat centered = samples.rowwise() - mean.transpose();
    const Mat cov = (centered.transpose() * centered) / double(n - 1);

    const double var_pool = cov.trace() / double(v);
    const double var_se = step_var * std::sqrt(2.0 / (double(n - 1) * double(v)));
    const double z_var = std::fabs(var_pool - step_var) / var_se;

    double max_cross = 0.0;
    for (Eigen::Index i = 0; i < v; ++i)
        for (Eigen::Index j = i + 1; j < v; ++j)
            max_cross = std::max(max_cross, std::fabs(cov(i, j)));
    const double z_cross = max_cross / (step_var / std::sqrt(double(n)));

    const double elapsed = seconds_since(t0);
    const bool pass = z_var <= 4.0 && z_cross <= 4.0 && elapsed < 5.0;
    verdict(1, "fluctuation-law", pass,
            "var z = " + num(z_var) + ", worst cross z = " + num(z_cross) + ", " +
                num(elapsed) + " s");
}

// 2. quadrature Fisher metric with C = eta dt is the identity
void criterion_information_metric() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int v = 1; v <= 2; ++v) {
        const LatticeSpec lattice = build_lattice({v}, 1.0);
        const TransitionKernel kernel(lattice, 0.8, 0.05);
        const Mat metric = fisher_metric(kernel, Vec::Zero(v));
        worst = std::max(worst, (metric - Mat::Identity(v, v)).cwiseAbs().maxCoeff());
    }
    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 1e-8 && elapsed < 1.0;
    verdict(2, "information-metric", pass,
            "max |gamma - I| = " + num(worst) + " at V = 1,2, " + num(elapsed) + " s");
}

// 3. every constraint-respecting tilt loses entropy, quadratically
void criterion_maxent_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    const MaxentReport rep = verify_maxent(50.0, 0.3, 100, 424242);
    double exp_lo = rep.exponents[0], exp_hi = rep.exponents[0];
    for (double e : rep.exponents) {
        exp_lo = std::min(exp_lo, e);
        exp_hi = std::max(exp_hi, e);
    }
    const double elapsed = seconds_since(t0);
    const bool pass =
        rep.min_gap >= -1e-12 && exp_lo >= 1.9 && exp_hi <= 2.1 && elapsed < 10.0;
    verdict(3, "maxent-optimality", pass,
            "min gap = " + num(rep.min_gap) + ", exponents in [" + num(exp_lo) + ", " +
                num(exp_hi) + "], " + num(elapsed) + " s");
}

// 4. the wave picture goes linear exactly at khat, with hbar = eta/khat
void criterion_linear_equation_constants() {
    Rng rng = Rng::for_stream(40404, 0);
    auto log_uniform = [&]() { return 1e-2 * std::pow(10.0, 4.0 * rng.uniform()); };
    double worst_coeff = 0.0, worst_hbar = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double eta = log_uniform();
        const double xi = log_uniform();
        const double khat = eta / std::sqrt(8.0 * xi);
        worst_coeff =
            std::max(worst_coeff, std::fabs(nonlinear_coefficient(eta, khat, xi)) / (4.0 * xi));
        const double direct = std::sqrt(8.0 * xi);
        worst_hbar = std::max(worst_hbar, std::fabs(eta / khat - direct) / direct);
        (void)EdConstants(eta, xi);   // ctor enforces the same identity
    }
    const bool pass = worst_coeff <= 2e-15 && worst_hbar <= 1e-12;
    verdict(4, "linear-equation-constants", pass,
            "coefficient residual = " + num(worst_coeff) + " of 4 xi, hbar identity = " +
                num(worst_hbar) + " rel");
}

// 5. Hamilton picture against Crank-Nicolson for the displaced packet
void criterion_picture_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    const AmplitudeGrid grid(1, 201, 8.0);
    const EdConstants cons(1.0, 0.125);
    std::vector<double> vpot(static_cast<std::size_t>(grid.cells()));
    for (int i = 0; i < grid.points; ++i) {
        const double x = grid.coord(i);
        vpot[static_cast<std::size_t>(i)] = 0.5 * x * x;
    }
    const HydroState initial = make_gaussian_hydro(grid, {1.0}, cons.hbar() / 2.0);

    const EquivalenceReport fine = equivalence_test(initial, vpot, cons, 1.0, 1e-3, 10);
    const EquivalenceReport mid = equivalence_test(initial, vpot, cons, 1.0, 2e-3, 10);
    const EquivalenceReport coarse = equivalence_test(initial, vpot, cons, 1.0, 4e-3, 10);
    const double order_hi = std::log2(coarse.max_discrepancy / mid.max_discrepancy);
    const double order_lo = std::log2(mid.max_discrepancy / fine.max_discrepancy);

    const double elapsed = seconds_since(t0);
    const bool pass = fine.max_discrepancy < 1e-5 && fine.h_drift_rel < 1e-6 &&
                      !fine.inconclusive && order_hi >= 1.7 && order_hi <= 2.3 &&
                      order_lo >= 1.7 && order_lo <= 2.3 && elapsed < 60.0;
    verdict(5, "picture-equivalence", pass,
            "Linf = " + num(fine.max_discrepancy) + ", H drift = " + num(fine.h_drift_rel) +
                ", orders " + num(order_hi) + "/" + num(order_lo) + ", " + num(elapsed) +
                " s");
}

// 6. vacuum kernel squares to K; ground energy agrees along two paths
void criterion_free_field_ground_state() {
    const std::vector<std::vector<int>> dim_sets = {{2}, {4, 4}, {8, 8, 8}, {16, 16, 16}};
    double worst_gg = 0.0, worst_e0 = 0.0;
    for (const auto& dims : dim_sets) {
        const LatticeSpec lat = build_lattice(dims, 1.0);
        const Mat g = ground_kernel(lat, 1.0);
        const Mat k = kinetic_matrix(lat, 1.0);
        worst_gg = std::max(worst_gg, (g * g - k).norm() / k.norm());
        const double e0_modes = ground_energy(mode_table(lat, 1.0));
        const double e0_trace = 0.5 * g.trace();
        worst_e0 = std::max(worst_e0, std::fabs(e0_trace - e0_modes) / e0_modes);
    }
    const LatticeSpec two = build_lattice({2}, 1.0);
    const double closed = 0.5 * (1.0 + std::sqrt(5.0));
    const double dev_modes = std::fabs(ground_energy(mode_table(two, 1.0)) - closed);
    const double dev_trace = std::fabs(0.5 * ground_kernel(two, 1.0).trace() - closed);

    const bool pass = worst_gg <= 1e-10 && worst_e0 <= 1e-10 && dev_modes <= 1e-12 * closed &&
                      dev_trace <= 1e-12 * closed;
    verdict(6, "free-field-ground-state", pass,
            "GG-K rel = " + num(worst_gg) + " up to 16^3, E0 two-path rel = " + num(worst_e0) +
                ", two-site closed form dev = " + num(std::max(dev_modes, dev_trace)));
}

// 7. two-point function: quadrature vs closed form vs lattice mode sum
void criterion_correlator_closed_form() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_quad = 0.0;
    bool converged = true;
    for (double r : {0.5, 1.0, 2.0, 3.0}) {
        const double exact = continuum_correlator(1.0, r);
        const QuadratureResult q = correlator_quadrature(1.0, r);
        converged = converged && q.converged;
        worst_quad = std::max(worst_quad, std::fabs(q.value - exact) / std::fabs(exact));
    }

    const LatticeSpec lat = build_lattice({32, 32, 32}, 0.25);
    // offsets chosen near the anisotropy zero of the a^2 artifact, spanning
    // mr from about 0.56 to 3
    const std::vector<std::array<int, 3>> probes = {
        {2, 1, 0}, {3, 2, 0}, {3, 3, 0}, {7, 4, 0}, {8, 8, 4}};
    double worst_lat = 0.0;
    for (const auto& p : probes) {
        const double r =
            lat.spacing * std::sqrt(double(p[0]) * p[0] + double(p[1]) * p[1] +
                                    double(p[2]) * p[2]);
        const double lattice_val = equal_time_correlator(lat, 1.0, 0, lat.site_index(p));
        const double exact = continuum_correlator(1.0, r);
        worst_lat = std::max(worst_lat, std::fabs(lattice_val - exact) / std::fabs(exact));
    }
    const double elapsed = seconds_since(t0);
    const bool pass = converged && worst_quad <= 1e-6 && worst_lat <= 0.05 && elapsed < 120.0;
    verdict(7, "correlator-closed-form", pass,
            "quadrature rel = " + num(worst_quad) + ", lattice rel = " + num(worst_lat) +
                " on 32^3, " + num(elapsed) + " s");
}

// 8. cutoff divergences carry the continuum power laws
void criterion_divergence_diagnostics() {
    const DivergenceTable table = divergence_scan(4.0, 1.0, {0.5, 0.25, 0.125});
    const bool pass = table.var_slope >= -2.3 && table.var_slope <= -1.7 &&
                      table.e0_slope >= -4.3 && table.e0_slope <= -3.7;
    verdict(8, "divergence-diagnostics", pass,
            "var slope = " + num(table.var_slope) + ", E0 density slope = " +
                num(table.e0_slope) + ", r2 = " + num(table.var_r2) + "/" +
                num(table.e0_r2));
}

// 9. the walker cloud tracks the co-evolved grid density
void criterion_ensemble_fokker_planck() {
    const auto t0 = std::chrono::steady_clock::now();
    const AmplitudeGrid grid(1, 201, 8.0);
    const EdConstants cons(1.0, 0.125);
    std::vector<double> vpot(static_cast<std::size_t>(grid.cells()));
    for (int i = 0; i < grid.points; ++i) {
        const double x = grid.coord(i);
        vpot[static_cast<std::size_t>(i)] = 0.5 * x * x;
    }
    const double dt = 5e-3;   // leapfrog kick diverges near dt = 1e-2 at this stiffness

    const GroundStateResult ground = ground_state_imaginary_time(vpot, grid, cons.hbar());
    const HydroState stationary = from_wave(ground.wave, cons);
    const HydroState coherent = make_gaussian_hydro(grid, {1.0}, cons.hbar() / 2.0);

    const FokkerPlanckReport rs =
        fokker_planck_consistency(stationary, vpot, cons, 100000, 1.0, dt, 901);
    const FokkerPlanckReport rc =
        fokker_planck_consistency(coherent, vpot, cons, 100000, 1.0, dt, 902);

    // KS floor must fall like n^{-1/2}; averages tame the per-seed scatter
    std::vector<double> ln_n, ln_ks;
    const std::vector<std::int64_t> sizes = {1000, 10000};
    std::uint64_t seed = 911;
    for (std::int64_t n : sizes) {
        double acc = 0.0;
        for (int rep = 0; rep < 3; ++rep)
            acc += fokker_planck_consistency(stationary, vpot, cons, n, 1.0, dt, seed++).ks;
        ln_n.push_back(std::log(static_cast<double>(n)));
        ln_ks.push_back(std::log(acc / 3.0));
    }
    ln_n.push_back(std::log(100000.0));
    ln_ks.push_back(std::log(rs.ks));
    const LineFit fit = fit_line(ln_n, ln_ks);

    const double elapsed = seconds_since(t0);
    const bool pass = rs.ks < 0.02 && rc.ks < 0.02 && rs.frozen_fraction == 0.0 &&
                      rc.frozen_fraction == 0.0 && fit.slope >= -0.7 && fit.slope <= -0.3;
    verdict(9, "ensemble-fokker-planck", pass,
            "KS stationary = " + num(rs.ks) + ", coherent = " + num(rc.ks) +
                ", n-scaling slope = " + num(fit.slope) + ", " + num(elapsed) + " s");
}

// 10. byte-identical reports across reruns and thread counts
void criterion_determinism() {
    RunConfig cfg;
    cfg.scenario = Scenario::ensemble;
    cfg.n = 2000;
    cfg.drift = DriftSource::grid;
    cfg.dt = 5e-3;
    cfg.t_final = 0.1;
    cfg.seed = 55;

    auto render = [&]() { return render_report(run_scenario(cfg), cfg.format); };
    setenv("ENTROFIELD_THREADS", "1", 1);
    const std::string serial = render();
    const std::string serial_again = render();
    setenv("ENTROFIELD_THREADS", "4", 1);
    const std::string pooled = render();
    unsetenv("ENTROFIELD_THREADS");

    RunConfig kc;   // second scenario family, default run
    kc.scenario = Scenario::kernel_check;
    kc.dims = {2, 2};
    const std::string a = render_report(run_scenario(kc), kc.format);
    const std::string b = render_report(run_scenario(kc), kc.format);

    const bool pass = serial == serial_again && serial == pooled && a == b;
    verdict(10, "determinism", pass,
            std::string("ensemble body ") + (serial == pooled ? "stable" : "UNSTABLE") +
                " across 1 vs 4 threads, kernel-check rerun " +
                (a == b ? "stable" : "UNSTABLE"));
}

}  // namespace

int main() {
    criterion_fluctuation_law();
    criterion_information_metric();
    criterion_maxent_optimality();
    criterion_linear_equation_constants();
    criterion_picture_equivalence();
    criterion_free_field_ground_state();
    criterion_correlator_closed_form();
    criterion_divergence_diagnostics();
    criterion_ensemble_fokker_planck();
    criterion_determinism();

    std::printf("acceptance: %d/10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
