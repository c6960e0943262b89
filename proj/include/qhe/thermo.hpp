#pragma once

#include <complex>
#include <vector>

#include "qhe/slowdyn.hpp"

// Steady heat transport through the linearized device, engine efficiency
// against Carnot and Otto references, and the per-cycle trajectory of the
// working mode in the (effective frequency, photon number) plane.

namespace qhe {

struct HeatFlowReport {
    // per-filter gross power drawn from each bath and re-emitted into it, W
    double input_h = 0, input_c = 0;
    double diss_h = 0, diss_c = 0;
    double q_dot = 0;       // net hot-bath heat flow input_h - diss_h, W
    double q_dot_gross = 0; // gross hot-bath absorption, the efficiency denominator
    double eta_carnot = 0;

    // filled in by efficiency()
    double efficiency = 0;
    double eta_otto_min = 0, eta_otto_max = 0;
};

// Positive-frequency quadrature grid tailored to the heat-flow integrands:
// dense windows around the working-mode peak and both filter poles over an
// omega_b/8 base. density scales the number of window points.
FrequencyGrid make_heatflow_grid(const DerivedParameters& d, int density = 1);

// Two-filter steady state with the working body held at omega_a'(0):
// input_f = C_Sigma_f (1/2pi) Int omega Im[G_ff] S_f domega (even integrand),
// diss_f = 2 gamma_f C_Sigma_f (1/2pi) Int omega^2 (|G_ff|^2 S_f + |G_ff'|^2 S_f') domega.
HeatFlowReport heat_flow(const DerivedParameters& d, const FrequencyGrid& grid, NoiseModel model);
HeatFlowReport heat_flow(const DerivedParameters& d, NoiseModel model = NoiseModel::quantum);

// eta_O(A_b) = 1 - min omega_a' / max omega_a' over one modulation cycle
double otto_efficiency(const DerivedParameters& d, double A_b);

// eta = P / |gross hot-bath absorption|; fills efficiency and the Otto band
// over [A_lo, A_hi] into a copy of the report. Throws DivisionDegenerate
// when the denominator underflows.
HeatFlowReport efficiency(double P, const HeatFlowReport& report, const DerivedParameters& d,
                          double A_lo, double A_hi);

struct CycleTrajectory {
    std::vector<double> times;       // one full period, endpoint included
    std::vector<double> omega_a_eff; // rad/s
    std::vector<double> n_a;         // mean photon number
    std::vector<double> E_a_ind;     // J, inductive energy of the working branch
    std::vector<double> phi_s_sq;    // reconstructed <phi_s^2>(t), dimensionless
    double loop_area = 0;            // signed shoelace area in (omega_a', n_a)
    double phase_shift = 0;          // rad, first harmonic of n_a relative to omega_a'
};

// Time-resolved reconstruction over one drive period from the harmonic sums
// c_q = (1/2pi) Int sum_n G_{n+q} G_n^* S domega, q = 0..harmonic_cutoff,
// assembled into <phi_s^2>(t), E_a_ind(t) and n_a(t).
CycleTrajectory otto_trajectory(const DerivedParameters& d, double A_b, int samples_per_period,
                                const PressureOptions& opt = {}, int harmonic_cutoff = 20);

}
