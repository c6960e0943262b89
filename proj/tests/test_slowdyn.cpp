#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qhe/circuit.hpp"
#include "qhe/errors.hpp"
#include "qhe/slowdyn.hpp"

using namespace qhe;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

DerivedParameters table1_derived() { return derive_parameters(table1_parameters()); }

PressureOptions fast_options(int M, int n_max) {
    PressureOptions opt;
    opt.grid.points_per_sideband = M;
    opt.n_max = n_max;
    return opt;
}

}

TEST_SUITE("slowdyn") {

TEST_CASE("noise pressure matches frozen references") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(512, 64);

    cplx n20 = noise_pressure(d, DriveState{0.2, 0.0}, opt);
    CHECK(rel(n20.real(), 6.39055867951161e-4) < 1e-8);
    CHECK(rel(n20.imag(), -1.4385136328459e-5) < 1e-8);

    cplx n30 = noise_pressure(d, DriveState{0.3, 0.0}, opt);
    CHECK(rel(n30.real(), 9.989966895202775e-4) < 1e-8);
    CHECK(rel(n30.imag(), -5.7043592454329386e-5) < 1e-8);

    cplx n44 = noise_pressure(d, DriveState{0.44, 0.0}, opt);
    CHECK(rel(n44.real(), 1.6364891908216773e-3) < 1e-8);
    CHECK(rel(n44.imag(), -2.4450981311771754e-4) < 1e-8);
}

TEST_CASE("noise pressure is gauge invariant in the drive phase") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(128, 32);

    cplx base = noise_pressure(d, DriveState{0.3, 0.0}, opt);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
    for (int i = 0; i < 4; ++i) {
        cplx rotated = noise_pressure(d, DriveState{0.3, u(rng)}, opt);
        CHECK(std::abs(rotated - base) <= 1e-10 * std::abs(base));
    }
}

TEST_CASE("quadrature self-convergence at random amplitudes") {
    DerivedParameters d = table1_derived();
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.05, 0.5);
    for (int i = 0; i < 10; ++i) {
        PressureOptions opt = fast_options(128, 0); // auto truncation
        opt.check_quadrature = true;                // doubled-density guard, 1e-4
        CHECK_NOTHROW(noise_pressure(d, DriveState{u(rng), 0.0}, opt));
    }
}

TEST_CASE("total dissipation frozen checkpoints") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(512, 0);

    // gamma_b = 0 leaves the pure back-action rate
    CHECK(rel(total_dissipation(d, 1e-3, 0.0, opt), -d.omega_b / 87519.29420833425) < 1e-6);
    CHECK(rel(total_dissipation(d, 0.2, 0.0, opt), -37319.31) < 1e-4);
    CHECK(rel(total_dissipation(d, 0.44, 0.0, opt), -288332.2496399781) < 1e-6);

    // gamma_b shifts the whole curve rigidly
    double gb = d.omega_b / 13600.0;
    CHECK(rel(total_dissipation(d, 0.2, gb, opt) - gb, total_dissipation(d, 0.2, 0.0, opt)) < 1e-9);

    CHECK_THROWS_AS(total_dissipation(d, 0.0, 0.0, opt), PreconditionViolated);
}

TEST_CASE("default amplitude grid") {
    std::vector<double> grid = default_amplitude_grid();
    CHECK(grid.size() == 400);
    CHECK(grid.front() == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(grid.back() == doctest::Approx(0.6).epsilon(1e-12));
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] > grid[i - 1]);
    CHECK_THROWS_AS(default_amplitude_grid(1), PreconditionViolated);
    CHECK_THROWS_AS(default_amplitude_grid(10, 0.5, 0.1), PreconditionViolated);
}

TEST_CASE("dissipation curve finds the valley and its stationary points") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(128, 0);
    std::vector<double> amps = default_amplitude_grid(48);
    double gamma_b = d.omega_b / 13600.0;

    DissipationCurve curve = dissipation_curve(d, amps, gamma_b, opt);
    REQUIRE(curve.amplitudes.size() == amps.size());
    REQUIRE(curve.gamma_tot.size() == amps.size());
    REQUIRE(curve.noise_pressure.size() == amps.size());
    CHECK(curve.gamma_b == gamma_b);

    double gmin = 1e300;
    for (double g : curve.gamma_tot)
        gmin = std::min(gmin, g);
    CHECK(gmin < 0.0); // the engine can run at Q_b = 13600

    REQUIRE(curve.stationary_points.size() == 2);
    CHECK(curve.stationary_points[0].kind == StationaryPoint::unstable);
    CHECK(curve.stationary_points[1].kind == StationaryPoint::stable);
    CHECK(curve.stationary_points[1].A_b > 0.45);
    CHECK(curve.stationary_points[1].A_b < 0.53);
    CHECK(curve.stationary_points[0].A_b < curve.stationary_points[1].A_b);

    SUBCASE("classification matches the secant slope of the sampled curve") {
        for (const StationaryPoint& sp : curve.stationary_points) {
            std::size_t i = 1;
            while (i + 1 < curve.amplitudes.size() && curve.amplitudes[i] < sp.A_b)
                ++i;
            double secant = (curve.gamma_tot[i] - curve.gamma_tot[i - 1]) /
                            (curve.amplitudes[i] - curve.amplitudes[i - 1]);
            CHECK((secant > 0) == (sp.kind == StationaryPoint::stable));
        }
    }
    SUBCASE("pressure_rate removes the load") {
        for (std::size_t i = 0; i < curve.amplitudes.size(); i += 7)
            CHECK(curve.pressure_rate(i) == curve.gamma_tot[i] - gamma_b);
    }
}

TEST_CASE("quality thresholds and power extraction from the unloaded curve") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(128, 0);
    std::vector<double> amps = default_amplitude_grid(64);

    DissipationCurve curve = dissipation_curve(d, amps, 0.0, opt);

    auto [q_init, q_stop] = q_thresholds(d, curve);
    CHECK(rel(q_init, d.omega_b / std::abs(curve.gamma_tot.front())) < 1e-12);
    CHECK(rel(q_init, 87519.294) < 1e-2);
    CHECK(q_stop > 8200.0);
    CHECK(q_stop < 8700.0);
    CHECK(q_stop <= q_init);

    std::vector<PowerPoint> pts = stable_point_power(d, curve);
    REQUIRE(!pts.empty());
    double c = 2.0 * (1.0 - d.N_L) * Phi0 * Phi0 / (pi * pi * d.L_b);
    for (const PowerPoint& pp : pts) {
        CHECK(pp.P > 0.0);
        CHECK(pp.Q_b > 0.0);
        double gamma_b = d.omega_b / pp.Q_b;
        CHECK(rel(pp.P, gamma_b * pp.A_b * pp.A_b * c) < 1e-9);
    }

    PowerPoint best = max_power_point(d, curve);
    CHECK(best.P > 4.5e-17);
    CHECK(best.P < 6.5e-17);
    CHECK(best.A_b > 0.40);
    CHECK(best.A_b < 0.50);
    CHECK(best.Q_b > 8000.0);
    CHECK(best.Q_b < 9300.0);

    SUBCASE("loaded curves are rejected where gamma_b = 0 is required") {
        DissipationCurve loaded = curve;
        loaded.gamma_b = 1e5;
        CHECK_THROWS_AS(stable_point_power(d, loaded), PreconditionViolated);
        CHECK_THROWS_AS(q_thresholds(d, loaded), PreconditionViolated);
    }
}

TEST_CASE("no self-oscillation without a thermal gradient") {
    // symmetric filters, equal temperatures, classical noise: the back-action
    // rate must never be negative with positive slope, so no stable point
    CircuitParameters p = table1_parameters();
    p.L_c = p.L_h;
    p.C_c = p.C_h;
    p.C_ca = p.C_ha;
    p.T_c = p.T_h;
    DerivedParameters d = derive_parameters(p);

    PressureOptions opt = fast_options(128, 0);
    opt.model = NoiseModel::classical;
    std::vector<double> amps = {0.1, 0.2, 0.3, 0.4, 0.5};
    DissipationCurve curve = dissipation_curve(d, amps, 0.0, opt);

    CHECK(stable_point_power(d, curve).empty());
    double scale = 0.0;
    for (double g : curve.gamma_tot)
        scale = std::max(scale, std::abs(g));
    for (double g : curve.gamma_tot)
        CHECK(g > -1e-6 * scale);
}

TEST_CASE("averaged amplitude-phase integration") {
    DerivedParameters d = table1_derived();
    EvolveOptions opt;
    opt.pressure = fast_options(64, 0); // auto truncation follows the growing amplitude
    opt.cache_tol = 0.02;
    opt.rtol = 1e-5;

    SUBCASE("overdamped start decays essentially exponentially") {
        double gamma_b = d.omega_b / 500.0;
        double t_end = 3.0 / gamma_b;
        auto traj = integrate_amplitude_phase(d, DriveState{0.2, 0.0}, gamma_b, t_end, opt);
        REQUIRE(traj.size() >= 3);
        CHECK(traj.front().t == 0.0);
        CHECK(traj.front().A_b == 0.2);
        CHECK(traj.back().t == doctest::Approx(t_end).epsilon(1e-9));
        for (std::size_t i = 1; i < traj.size(); ++i)
            CHECK(traj[i].A_b < traj[i - 1].A_b + 1e-12);
        // back-action is tiny against this load; the decay tracks exp(-gamma_b t)
        CHECK(traj.back().A_b > 0.008);
        CHECK(traj.back().A_b < 0.013);
    }
    SUBCASE("start above the unstable point grows into the stable amplitude") {
        double gamma_b = d.omega_b / 13600.0;
        auto traj = integrate_amplitude_phase(d, DriveState{0.4, 0.0}, gamma_b, 8e-5, opt);
        REQUIRE(traj.size() >= 3);
        // growth to the attractor, then small hover around it is fine; a real
        // decay would fall far below the running maximum
        double runmax = 0.0;
        for (const auto& s : traj) {
            runmax = std::max(runmax, s.A_b);
            CHECK(s.A_b > runmax - 5e-4);
        }
        CHECK(traj.back().A_b > 0.43);
        CHECK(traj.back().A_b < 0.55);
        // and the drive phase keeps sliding (frequency pulling never vanishes)
        CHECK(std::abs(traj.back().theta_b) > 1e-3);
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(integrate_amplitude_phase(d, DriveState{-0.1, 0.0}, 1e5, 1e-6, opt),
                        PreconditionViolated);
        CHECK_THROWS_AS(integrate_amplitude_phase(d, DriveState{0.1, 0.0}, 1e5, 0.0, opt),
                        PreconditionViolated);
    }
}

TEST_CASE("curve input validation") {
    DerivedParameters d = table1_derived();
    PressureOptions opt = fast_options(64, 16);
    CHECK_THROWS_AS(dissipation_curve(d, {}, 0.0, opt), PreconditionViolated);
    CHECK_THROWS_AS(dissipation_curve(d, {0.3, 0.2}, 0.0, opt), PreconditionViolated);
    CHECK_THROWS_AS(dissipation_curve(d, {-0.1, 0.2}, 0.0, opt), PreconditionViolated);
}

}
