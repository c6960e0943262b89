#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "qhe/greens.hpp"

// Slow dynamics of the low-frequency mode: the noise/time-averaged quadratic
// pressure of the junction phase, the amplitude-dependent total dissipation
// rate, stationary-point classification, self-start/self-sustain quality
// thresholds, output power at stable points, and the averaged amplitude and
// phase equations of motion.

namespace qhe {

struct PressureOptions {
    GridOptions grid;
    int n_max = 64;      // <= 0 selects auto_truncate at the drive amplitude
    NoiseModel model = NoiseModel::quantum;
    int threads = 1;
    bool check_quadrature = false; // doubled-density guard, 1e-4 relative
};

// <phi_s^2>_{xi,t} at the drive: (e^{i theta_b}/2pi) Int sum_n G_n G_{n-1}^* S domega.
// The gauge factor cancels the solution's phase, so the result is
// theta_b-independent and reported as such.
cplx noise_pressure(const DerivedParameters& d, const DriveState& drive,
                    const FrequencyGrid& grid, int n_max, NoiseModel model, int threads = 1);
cplx noise_pressure(const DerivedParameters& d, const DriveState& drive,
                    const PressureOptions& opt);

// Gamma_tot(A_b) = gamma_b + g_b^2/(2 A_b omega_b) * Im <phi_s^2>
double total_dissipation(const DerivedParameters& d, double A_b, double gamma_b,
                         const PressureOptions& opt);

struct StationaryPoint {
    double A_b = 0;
    enum Kind { stable, unstable } kind = stable; // stable = positive slope of Gamma_tot
};

struct DissipationCurve {
    std::vector<double> amplitudes;
    std::vector<double> gamma_tot;       // rad/s
    std::vector<cplx> noise_pressure;    // gauge-removed <phi_s^2> per amplitude
    std::vector<StationaryPoint> stationary_points;
    double gamma_b = 0;

    // back-action part gamma_tot - gamma_b at grid index i
    double pressure_rate(std::size_t i) const { return gamma_tot[i] - gamma_b; }
};

// 400 log-spaced amplitudes on (0, 0.6] by default; dense near zero.
std::vector<double> default_amplitude_grid(int n = 400, double lo = 1e-3, double hi = 0.6);

DissipationCurve dissipation_curve(const DerivedParameters& d, const std::vector<double>& A_grid,
                                   double gamma_b, const PressureOptions& opt);

struct PowerPoint {
    double Q_b = 0; // omega_b / gamma_b at which this amplitude is a stable point
    double A_b = 0;
    double P = 0;   // watt
};

// The gamma_b-sweep reading of a gamma_b = 0 curve: every amplitude where the
// back-action rate is negative with positive slope is the stable operating
// point for gamma_b = -rate; P = 2 gamma_b A_b^2 (1-N_L) Phi0^2 / (pi^2 L_b).
std::vector<PowerPoint> stable_point_power(const DerivedParameters& d,
                                           const DissipationCurve& curve);

// Maximum-power entry of stable_point_power with parabolic refinement over
// the amplitude grid; P = 0 with A_b = NaN when no stable point exists.
PowerPoint max_power_point(const DerivedParameters& d, const DissipationCurve& curve);

// (Q_init, Q_stop): quality factors below which the engine cannot self-start
// from A_b ~ 0 / cannot sustain oscillation anywhere. Infinity when the
// corresponding rate is nonnegative. Requires a gamma_b = 0 curve whose grid
// reaches down to the smallest resolvable amplitude.
std::pair<double, double> q_thresholds(const DerivedParameters& d, const DissipationCurve& curve);

struct EvolveOptions {
    PressureOptions pressure;
    double cache_tol = 1e-3; // re-solve when A_b moves more than this, relative
    double rtol = 1e-6;
    double atol_A = 1e-9;
    double atol_theta = 1e-6;
    std::size_t max_steps = 200000;
};

struct DriveSample {
    double t = 0;
    double A_b = 0;
    double theta_b = 0;
};

// Averaged equations dA/dt = -gamma_b A - (g_b^2/2 omega_b) Im<phi_s^2>,
// A dtheta/dt = -(g_b^2/2 omega_b) Re<phi_s^2>, integrated adaptively with
// the pressure cached over an amplitude table.
std::vector<DriveSample> integrate_amplitude_phase(const DerivedParameters& d, DriveState initial,
                                                   double gamma_b, double t_end,
                                                   const EvolveOptions& opt);

}
