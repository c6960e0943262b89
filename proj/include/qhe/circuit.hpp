#pragma once

#include <string>

#include "qhe/constants.hpp"

// Lumped-element circuit description and the parameters derived from it:
// flux-bias working point, junction inductance, mode frequencies, coupling
// constants, and the flux-dependent effective frequency of the working mode.

namespace qhe {

struct CircuitParameters {
    // elementary values, SI
    double L_a = 0, L_h = 0, L_c = 0, L_b = 0, L_g = 0; // H
    double C_a = 0, C_h = 0, C_c = 0, C_b = 0;          // F
    double C_ha = 0, C_ca = 0;                          // F, coupling caps
    double I_c = 0;                                     // A
    double Phi_ext = 0;                                 // Wb
    double T_c = 0, T_h = 0;                            // K

    // filter dissipation: either gamma_h/gamma_c directly (rad/s), or a
    // shared quality factor Q_f with gamma_f = omega_f / Q_f.
    double gamma_h = 0, gamma_c = 0;
    double Q_f = 0;

    // throws PreconditionViolated on nonpositive elements, T_c > T_h, or a
    // bias loop deep enough to admit multiple flux minima (I_c L_g >= Phi0/2pi)
    void validate() const;
};

// canonical operating point used by tests and as the CLI default
CircuitParameters table1_parameters();

struct DerivedParameters {
    double phi_g0 = 0; // Wb, flux-potential minimum
    double u = 0;      // phi_g0 / Phi0
    double L_J = 0;    // H
    double g0_sq = 0;  // 1/(H Wb)

    double C_Sigma_a = 0, C_Sigma_h = 0, C_Sigma_c = 0; // F

    double omega_a = 0, omega_h = 0, omega_c = 0; // rad/s
    double omega_s = 0, omega_b = 0;              // rad/s
    double N_L = 0;                               // inductance ratio
    double tau_b = 0;                             // s, 2pi/omega_b

    double alpha_ha = 0, alpha_ca = 0; // C_fa / C_Sigma_a
    double alpha_h = 0, alpha_c = 0;   // C_fa / C_Sigma_f

    double g_s_sq = 0, g_b_sq = 0; // (rad/s)^2

    double gamma_h = 0, gamma_c = 0; // rad/s
    double R_h = 0, R_c = 0;         // ohm

    // carried along for downstream formulas
    double T_h = 0, T_c = 0; // K
    double L_a = 0, L_b = 0; // H
};

// Root of (phi - Phi_ext)/L_g + 2 I_c sin(pi phi / Phi0) = 0, bracketed
// bisection with Newton polish. tol is relative; the residual is accepted
// below tol * (|Phi_ext| or Phi0, whichever is larger) / L_g.
double solve_flux_minimum(const CircuitParameters& p, double tol = 1e-12);

DerivedParameters derive_parameters(const CircuitParameters& p);

// Flux-modulated series inductance of the junction pair as seen by the
// working mode, beta(phi_b) = L_J / (2 - 2 g_s^2 L_J C_Sigma_a phi_b),
// and its participation s = beta/(L_a + beta) in the junction phase,
// phi_s = s(phi_b) * phi_a.
double junction_inductance(const DerivedParameters& d, double phi_b);
double junction_participation(const DerivedParameters& d, double phi_b);

// omega_a'(phi_b) = 1/sqrt(C_Sigma_a (L_a + beta(phi_b))); throws
// SingularOperatingPoint when the modulated inductance degenerates.
double effective_frequency(const DerivedParameters& d, double phi_b);

}
