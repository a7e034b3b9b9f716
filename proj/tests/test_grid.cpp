#include "entrofield/grid_dynamics.hpp"

#include "entrofield/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

using namespace entrofield;

namespace {

std::vector<double> harmonic_1d(const AmplitudeGrid& grid) {
    return grid_potential(grid, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
}

HydroState phased_gaussian(const AmplitudeGrid& grid) {
    HydroState st = make_gaussian_hydro(grid, {0.5}, 0.7);
    std::vector<double> phi(st.rho.size());
    for (int i = 0; i < grid.points; ++i)
        phi[static_cast<std::size_t>(i)] =
            0.3 * std::sin(0.7 * grid.coord(i)) + 0.2 * grid.coord(i);
    return HydroState(grid, st.rho, std::move(phi));
}

}  // namespace

TEST(EdConstantsLaw, HbarFollowsFromEtaAndXi) {
    const EdConstants a(1.0, 0.125);
    EXPECT_DOUBLE_EQ(a.hbar(), 1.0);
    EXPECT_DOUBLE_EQ(a.khat(), 1.0);
    const EdConstants b(2.0, 0.5);
    EXPECT_DOUBLE_EQ(b.hbar(), 2.0);
    EXPECT_DOUBLE_EQ(b.khat(), 1.0);
    EXPECT_THROW(EdConstants(0.0, 0.125), std::invalid_argument);
    EXPECT_THROW(EdConstants(1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(EdConstants(1.0, -0.1), std::invalid_argument);
}

TEST(NonlinearCoefficient, VanishesExactlyAtTheMatchedWaveNumber) {
    Rng rng = Rng::for_stream(17, 0);
    for (int t = 0; t < 50; ++t) {
        const double eta = std::exp(rng.uniform() * 4.0 - 2.0);
        const double xi = std::exp(rng.uniform() * 4.0 - 2.0);
        const double khat = eta / std::sqrt(8.0 * xi);
        EXPECT_NEAR(nonlinear_coefficient(eta, khat, xi), 0.0, 1e-15 * 4.0 * xi);
        EXPECT_GT(nonlinear_coefficient(eta, 0.5 * khat, xi), 0.0);
        EXPECT_LT(nonlinear_coefficient(eta, 2.0 * khat, xi), 0.0);
    }
    EXPECT_THROW(nonlinear_coefficient(1.0, 0.0, 0.125), std::invalid_argument);
    EXPECT_THROW(nonlinear_coefficient(0.0, 1.0, 0.125), std::invalid_argument);
}

TEST(AmplitudeGridShape, ValidatesAndIndexes) {
    EXPECT_THROW(AmplitudeGrid(0, 201, 8.0), std::invalid_argument);
    EXPECT_THROW(AmplitudeGrid(3, 201, 8.0), std::invalid_argument);
    EXPECT_THROW(AmplitudeGrid(1, 200, 8.0), std::invalid_argument);
    EXPECT_THROW(AmplitudeGrid(1, 199, 8.0), std::invalid_argument);
    EXPECT_THROW(AmplitudeGrid(1, 201, 0.0), std::invalid_argument);
    const AmplitudeGrid g(2, 201, 4.0);
    EXPECT_DOUBLE_EQ(g.h(), 0.04);
    EXPECT_DOUBLE_EQ(g.coord(0), -4.0);
    EXPECT_DOUBLE_EQ(g.coord(200), 4.0);
    EXPECT_DOUBLE_EQ(g.weight(), 0.04 * 0.04);
    EXPECT_EQ(g.cells(), 201 * 201);
    EXPECT_EQ(g.index(1, 2), 203);
}

TEST(HydroStateCtor, RejectsBadFields) {
    const AmplitudeGrid g(1, 201, 8.0);
    const HydroState ok = make_gaussian_hydro(g, {0.0}, 1.0);
    EXPECT_NEAR(ok.mass(), 1.0, 1e-12);
    EXPECT_THROW(HydroState(g, std::vector<double>(200, 0.0), ok.phi),
                 std::invalid_argument);
    auto neg = ok.rho;
    neg[100] = -neg[100];
    EXPECT_THROW(HydroState(g, neg, ok.phi), std::invalid_argument);
    auto unnorm = ok.rho;
    for (double& r : unnorm) r *= 2.0;
    EXPECT_THROW(HydroState(g, unnorm, ok.phi), std::invalid_argument);
    auto badphi = ok.phi;
    badphi[100] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(HydroState(g, ok.rho, badphi), std::invalid_argument);
    EXPECT_THROW(make_gaussian_hydro(g, {0.0, 0.0}, 1.0), std::invalid_argument);
    EXPECT_THROW(make_gaussian_hydro(g, {0.0}, 0.0), std::invalid_argument);
}

TEST(WaveStateCtor, RequiresNormalization) {
    const AmplitudeGrid g(1, 201, 8.0);
    std::vector<std::complex<double>> psi(201, {0.1, 0.0});
    EXPECT_THROW(WaveState(g, psi, 1.0), std::invalid_argument);
}

TEST(GridPotential, MatchesPolynomialForms) {
    const AmplitudeGrid g1(1, 201, 8.0);
    const auto v1 = grid_potential(g1, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.3, 0.1));
    const double x = g1.coord(37);
    EXPECT_NEAR(v1[37], 0.5 * x * x + 0.3 * x * x * x + 0.1 * x * x * x * x, 1e-13);

    const AmplitudeGrid g2(2, 201, 6.0);
    const auto v2 = grid_potential(g2, LatticeSpec{{2}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
    const double a = g2.coord(10), b = g2.coord(30);
    // two-site kinetic kernel [[3,-2],[-2,3]] enters the quadratic form
    EXPECT_NEAR(v2[static_cast<std::size_t>(g2.index(10, 30))],
                1.5 * (a * a + b * b) - 2.0 * a * b, 1e-12);
    EXPECT_THROW(grid_potential(g1, LatticeSpec{{2}, 1.0}, PotentialSpec()),
                 std::invalid_argument);
}

TEST(WavePolarMap, RoundTripsAwayFromTheMask) {
    const AmplitudeGrid g(1, 201, 8.0);
    const EdConstants cons(1.0, 0.125);
    const HydroState st = phased_gaussian(g);
    const WaveState w = to_wave(st, cons);
    const HydroState back = from_wave(w, cons);
    const double rmax = *std::max_element(st.rho.begin(), st.rho.end());
    for (std::size_t i = 0; i < st.rho.size(); ++i) {
        EXPECT_NEAR(back.rho[i], st.rho[i], 1e-14 * rmax);
        if (st.rho[i] > 1e-9 * rmax) EXPECT_NEAR(back.phi[i], st.phi[i], 1e-10);
    }
    EXPECT_THROW(from_wave(w, EdConstants(2.0, 0.5)), std::invalid_argument);
}

TEST(PolarFormIdentity, HydroHamiltonianEqualsWaveEnergy) {
    const EdConstants cons(1.0, 0.125);
    {
        const AmplitudeGrid g(1, 201, 8.0);
        const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.05, 0.02));
        const HydroState st = phased_gaussian(g);
        const double hval = ensemble_hamiltonian(st, vpot, cons);
        const double ewave = wave_energy(to_wave(st, cons), vpot);
        EXPECT_NEAR(hval, ewave, 1e-10 * std::fabs(hval));
    }
    {
        const AmplitudeGrid g(2, 201, 6.0);
        const auto vpot = grid_potential(g, LatticeSpec{{2}, 1.0}, PotentialSpec());
        HydroState st = make_gaussian_hydro(g, {0.3, -0.4}, 0.6);
        std::vector<double> phi(st.rho.size());
        for (int ix = 0; ix < g.points; ++ix)
            for (int iy = 0; iy < g.points; ++iy)
                phi[static_cast<std::size_t>(g.index(ix, iy))] =
                    0.2 * g.coord(ix) - 0.15 * std::sin(g.coord(iy));
        st = HydroState(g, st.rho, std::move(phi));
        const double hval = ensemble_hamiltonian(st, vpot, cons);
        const double ewave = wave_energy(to_wave(st, cons), vpot);
        EXPECT_NEAR(hval, ewave, 1e-10 * std::fabs(hval));
    }
}

TEST(HamiltonianGradients, MatchCentralDifferences) {
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.05, 0.02));
    const HydroState st = phased_gaussian(g);
    const EdConstants cons(1.0, 0.125);
    const auto grads = hamiltonian_gradients(st, vpot, cons);
    const double rmax = *std::max_element(st.rho.begin(), st.rho.end());
    for (int i = 0; i < g.points; i += 3) {
        const auto ii = static_cast<std::size_t>(i);
        if (st.rho[ii] < 1e-3 * rmax) continue;
        const double eps_r = 1e-7 * std::max(st.rho[ii], 1e-2);
        auto rp = st.rho, rm = st.rho;
        rp[ii] += eps_r;
        rm[ii] -= eps_r;
        const double fd_r =
            (grid_detail::hamiltonian_value(g, rp, st.phi, vpot, cons.hbar()) -
             grid_detail::hamiltonian_value(g, rm, st.phi, vpot, cons.hbar())) /
            (2.0 * eps_r);
        EXPECT_NEAR(grads.d_rho[ii], fd_r, 1e-5 * std::max(1.0, std::fabs(fd_r)));
        const double eps_p = 1e-6;
        auto pp = st.phi, pm = st.phi;
        pp[ii] += eps_p;
        pm[ii] -= eps_p;
        const double fd_p =
            (grid_detail::hamiltonian_value(g, st.rho, pp, vpot, cons.hbar()) -
             grid_detail::hamiltonian_value(g, st.rho, pm, vpot, cons.hbar())) /
            (2.0 * eps_p);
        EXPECT_NEAR(grads.d_phi[ii], fd_p, 1e-5 * std::max(1.0, std::fabs(fd_p)));
    }
}

TEST(ContinuityRhs, TelescopesToZeroAndTracksTheFlow) {
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = harmonic_1d(g);
    const HydroState st = phased_gaussian(g);
    const EdConstants cons(1.0, 0.125);
    const auto rhs = continuity_rhs(st, cons);
    double sum = 0.0, peak = 0.0;
    for (double f : rhs) {
        sum += f;
        peak = std::max(peak, std::fabs(f));
    }
    EXPECT_NEAR(sum, 0.0, 1e-12 * peak * static_cast<double>(rhs.size()));
    const double dt = 1e-5;
    const HydroState next = step_hamilton(st, vpot, cons, dt);
    double err = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i)
        err = std::max(err, std::fabs((next.rho[i] - st.rho[i]) / dt - rhs[i]));
    EXPECT_LT(err, 1e-4 * peak);
}

TEST(StepHamilton, ConservesMassExactlyAndGuardsArguments) {
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = harmonic_1d(g);
    const EdConstants cons(1.0, 0.125);
    HydroState st = phased_gaussian(g);
    for (int s = 0; s < 100; ++s) st = step_hamilton(st, vpot, cons, 1e-3);
    EXPECT_NEAR(st.mass(), 1.0, 1e-12);
    EXPECT_THROW(step_hamilton(st, vpot, cons, 0.0), std::invalid_argument);
    EXPECT_THROW(step_hamilton(st, std::vector<double>(5, 0.0), cons, 1e-3),
                 std::invalid_argument);
}

TEST(StepHamilton, RejectsStepsThatDriveDensityNegative) {
    // near-empty interior cell with outflow on both links: the drift
    // overshoots the cell content at moderate dt
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = harmonic_1d(g);
    const EdConstants cons(1.0, 0.125);
    std::vector<double> raw(static_cast<std::size_t>(g.points));
    std::vector<double> phi(raw.size());
    for (int i = 0; i < g.points; ++i) {
        const double x = g.coord(i);
        raw[static_cast<std::size_t>(i)] = std::exp(-0.5 * x * x);
        phi[static_cast<std::size_t>(i)] = 0.2 * std::fabs(x - 1.6);
    }
    raw[120] = 5e-18;   // below the kick mask, still draining through sqrt flux
    const HydroState st(g, normalized_density(g, std::move(raw)), std::move(phi));
    try {
        step_hamilton(st, vpot, cons, 1e-3);
        FAIL() << "expected a rejected step at this dt";
    } catch (const StepRejected& e) {
        EXPECT_DOUBLE_EQ(e.suggested_dt, 5e-4);
    }
    // at a tenth of the step the drain is clamped instead of rejected
    const HydroState ok = step_hamilton(st, vpot, cons, 1e-4);
    for (double r : ok.rho) EXPECT_GE(r, 0.0);
}

TEST(EquivalenceTest, PicturesAgreeForTheCoherentPacket) {
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = harmonic_1d(g);
    const EdConstants cons(1.0, 0.125);
    const HydroState initial = make_gaussian_hydro(g, {1.0}, 0.5);
    const EquivalenceReport rep = equivalence_test(initial, vpot, cons, 1.0, 1e-3, 100);
    EXPECT_EQ(rep.steps, 1000);
    EXPECT_FALSE(rep.inconclusive);
    EXPECT_LT(rep.max_discrepancy, 1e-6);
    EXPECT_LT(rep.h_drift_rel, 1e-6);
    EXPECT_LT(rep.mass_drift, 1e-12);
    EXPECT_LT(rep.norm_drift, 1e-12);
    ASSERT_GE(rep.series.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.series.back()[0], 1.0);
}

TEST(EquivalenceTest, DiscrepancyShrinksAsDtSquared) {
    const AmplitudeGrid g(1, 201, 8.0);
    const auto vpot = harmonic_1d(g);
    const EdConstants cons(1.0, 0.125);
    const HydroState initial = make_gaussian_hydro(g, {1.0}, 0.5);
    const double d1 = equivalence_test(initial, vpot, cons, 0.5, 4e-3).max_discrepancy;
    const double d2 = equivalence_test(initial, vpot, cons, 0.5, 2e-3).max_discrepancy;
    EXPECT_GT(d1 / d2, 3.0);
    EXPECT_LT(d1 / d2, 5.0);
}

TEST(CrankNicolson, PreservesNormOverManySteps) {
    const AmplitudeGrid g(1, 801, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
    WaveState w = ground_state_imaginary_time(vpot, g, 1.0).wave;
    for (int s = 0; s < 10000; ++s) w = step_schrodinger(w, vpot, 1e-3);
    EXPECT_NEAR(w.norm2(), 1.0, 1e-10);
}

TEST(CrankNicolson, GroundStatePhaseRotatesAtItsEnergy) {
    const AmplitudeGrid g(1, 801, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
    const GroundStateResult ground = ground_state_imaginary_time(vpot, g, 1.0);
    WaveState w = ground.wave;
    const std::complex<double> z0 = w.psi[static_cast<std::size_t>(g.points / 2)];
    for (int s = 0; s < 1000; ++s) w = step_schrodinger(w, vpot, 1e-3);
    const double phase = std::arg(w.psi[static_cast<std::size_t>(g.points / 2)] / z0);
    EXPECT_NEAR(phase, -ground.energy, 1e-6);
}

TEST(CrankNicolson, CoherentPacketMeanFollowsTheClassicalPath) {
    const AmplitudeGrid g(1, 801, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
    std::vector<std::complex<double>> psi(static_cast<std::size_t>(g.points));
    double n2 = 0.0;
    for (int i = 0; i < g.points; ++i) {
        const double x = g.coord(i) - 1.0;
        psi[static_cast<std::size_t>(i)] = std::exp(-0.5 * x * x);
        n2 += std::norm(psi[static_cast<std::size_t>(i)]);
    }
    n2 *= g.h();
    for (auto& z : psi) z /= std::sqrt(n2);
    WaveState w(g, std::move(psi), 1.0);
    for (int s = 0; s < 1000; ++s) w = step_schrodinger(w, vpot, 1e-3);
    double mean = 0.0;
    for (int i = 0; i < g.points; ++i)
        mean += g.coord(i) * std::norm(w.psi[static_cast<std::size_t>(i)]);
    mean *= g.h();
    EXPECT_NEAR(mean, std::cos(1.0), 1e-4);
}

TEST(ImaginaryTime, HarmonicGroundEnergyOnAFineGrid) {
    const AmplitudeGrid g(1, 40001, 10.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.0));
    const GroundStateResult r = ground_state_imaginary_time(vpot, g, 1.0);
    EXPECT_NEAR(r.energy, 0.5, 1e-8);
    EXPECT_FALSE(grid_detail::has_interior_node(
        g, normalized_density(g, [&] {
            std::vector<double> rho(r.wave.psi.size());
            for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(r.wave.psi[i]);
            return rho;
        }())));
}

TEST(ImaginaryTime, QuarticGroundMatchesDenseEigensolver) {
    const AmplitudeGrid g(1, 801, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{1}, 1.0}, PotentialSpec(1.0, 0.0, 0.1));
    const GroundStateResult r = ground_state_imaginary_time(vpot, g, 1.0);
    const int n = g.points;
    const double c = 1.0 / (2.0 * g.h() * g.h());
    Mat hm = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        hm(i, i) = 2.0 * c + vpot[static_cast<std::size_t>(i)];
        if (i + 1 < n) {
            hm(i, i + 1) = -c;
            hm(i + 1, i) = -c;
        }
    }
    const Eigen::SelfAdjointEigenSolver<Mat> es(hm);
    EXPECT_NEAR(r.energy, es.eigenvalues()(0), 1e-10);
}

TEST(ImaginaryTime, CoupledTwoSiteGround) {
    const AmplitudeGrid g(2, 201, 8.0);
    const auto vpot = grid_potential(g, LatticeSpec{{2}, 1.0}, PotentialSpec());
    const GroundStateResult r = ground_state_imaginary_time(vpot, g, 1.0);
    // normal modes 1 and sqrt(5); h^2 dispersion leaves ~1e-3 at 201 points
    EXPECT_NEAR(r.energy, 0.5 * (1.0 + std::sqrt(5.0)), 3e-3);
}

TEST(ImaginaryTime, GuardsArguments) {
    const AmplitudeGrid g(1, 201, 8.0);
    EXPECT_THROW(ground_state_imaginary_time(std::vector<double>(5, 0.0), g, 1.0),
                 std::invalid_argument);
    EXPECT_THROW(ground_state_imaginary_time(harmonic_1d(g), g, 0.0), std::invalid_argument);
}

TEST(InteriorNodeDetector, SeparatesBimodalFromUnimodal) {
    const AmplitudeGrid g(1, 201, 8.0);
    std::vector<double> two(201, 0.0), one(201, 0.0);
    for (int i = 0; i < 201; ++i) {
        const double x = g.coord(i);
        two[static_cast<std::size_t>(i)] =
            std::exp(-8.0 * (x - 3.0) * (x - 3.0)) + std::exp(-8.0 * (x + 3.0) * (x + 3.0));
        one[static_cast<std::size_t>(i)] = std::exp(-0.5 * x * x);
    }
    EXPECT_TRUE(grid_detail::has_interior_node(g, normalized_density(g, std::move(two))));
    EXPECT_FALSE(grid_detail::has_interior_node(g, normalized_density(g, std::move(one))));
}

TEST(HydroVelocities, GaussianClosedFormsHold) {
    const AmplitudeGrid g(1, 201, 8.0);
    const double mu = 0.5, var = 0.7, eta = 1.3;
    HydroState st = make_gaussian_hydro(g, {mu}, var);
    std::vector<double> phi(st.rho.size());
    for (int i = 0; i < g.points; ++i) phi[static_cast<std::size_t>(i)] = 0.2 * g.coord(i);
    st = HydroState(g, st.rho, std::move(phi));
    const VelocityFields f = hydro_velocities(st, EdConstants(eta, 0.125));
    ASSERT_EQ(f.v.size(), 1u);
    for (int i = 0; i < g.points; ++i) {
        const double x = g.coord(i);
        if (std::fabs(x) > 4.0) continue;   // clamped log tail
        const auto ii = static_cast<std::size_t>(i);
        EXPECT_NEAR(f.v[0][ii], 0.2, 1e-12);
        // log rho is quadratic, so the lattice derivative is exact
        EXPECT_NEAR(f.u[0][ii], 0.5 * eta * (x - mu) / var, 1e-10);
        EXPECT_NEAR(f.b[0][ii], f.v[0][ii] - f.u[0][ii], 1e-13);
    }
    EXPECT_THROW(grid_gradient(g, st.rho, 1), std::invalid_argument);
    EXPECT_THROW(grid_gradient(g, std::vector<double>(5, 0.0), 0), std::invalid_argument);
}

TEST(CommutatorResidual, MachineScaleOnSmoothStates) {
    Rng rng = Rng::for_stream(3, 0);
    const AmplitudeGrid g(1, 1001, 10.0);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const double s = 0.8 + 0.4 * rng.uniform();
        const double mu = -1.0 + 2.0 * rng.uniform();
        const double kmom = -1.0 + 2.0 * rng.uniform();
        std::vector<std::complex<double>> psi(static_cast<std::size_t>(g.points));
        double n2 = 0.0;
        for (int i = 0; i < g.points; ++i) {
            const double x = g.coord(i);
            const double amp = std::exp(-0.25 * (x - mu) * (x - mu) / (s * s));
            psi[static_cast<std::size_t>(i)] = std::polar(amp, kmom * x);
            n2 += amp * amp;
        }
        n2 *= g.h();
        for (auto& z : psi) z /= std::sqrt(n2);
        worst = std::max(worst, commutator_residual(WaveState(g, std::move(psi), 1.0)));
    }
    EXPECT_LT(worst, 1e-8);
}
