#include "qhe/circuit.hpp"

#include <cmath>
#include <string>

#include "qhe/errors.hpp"

namespace qhe {

void CircuitParameters::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0))
            throw PreconditionViolated(std::string("parameter must be positive: ") + name);
    };
    positive(L_a, "L_a");
    positive(L_h, "L_h");
    positive(L_c, "L_c");
    positive(L_b, "L_b");
    positive(L_g, "L_g");
    positive(C_a, "C_a");
    positive(C_h, "C_h");
    positive(C_c, "C_c");
    positive(C_b, "C_b");
    positive(C_ha, "C_ha");
    positive(C_ca, "C_ca");
    positive(I_c, "I_c");
    positive(T_c, "T_c");
    positive(T_h, "T_h");
    if (T_c > T_h)
        throw PreconditionViolated("T_c must not exceed T_h");
    if (!(I_c * L_g < Phi0 / (2.0 * pi)))
        throw PreconditionViolated("I_c * L_g >= Phi0/(2*pi): flux minimum not unique");
    if (Q_f <= 0 && (gamma_h <= 0 || gamma_c <= 0))
        throw PreconditionViolated("either Q_f or both gamma_h and gamma_c must be given");
}

CircuitParameters table1_parameters() {
    CircuitParameters p;
    p.L_a = 0.55e-9;
    p.C_a = 0.18e-12;
    p.L_h = 0.75e-9;
    p.C_h = 0.27e-12;
    p.L_c = 1.03e-9;
    p.C_c = 0.37e-12;
    p.L_b = 0.78e-9;
    p.C_b = 0.2e-9;
    p.L_g = 96.5e-12;
    p.C_ha = 9.5e-15;
    p.C_ca = 16.1e-15;
    p.I_c = 0.8e-6;
    p.T_c = 0.010;
    p.T_h = 0.300;
    p.Phi_ext = 0.5253 * Phi0;
    p.Q_f = 85.0;
    return p;
}

double solve_flux_minimum(const CircuitParameters& p, double tol) {
    if (!(tol > 0))
        throw PreconditionViolated("solve_flux_minimum: tol must be positive");
    if (!(p.I_c * p.L_g < Phi0 / (2.0 * pi)))
        throw PreconditionViolated("solve_flux_minimum: uniqueness condition violated");

    auto f = [&](double x) {
        return (x - p.Phi_ext) / p.L_g + 2.0 * p.I_c * std::sin(pi * x / Phi0);
    };
    auto fprime = [&](double x) {
        return 1.0 / p.L_g + 2.0 * p.I_c * (pi / Phi0) * std::cos(pi * x / Phi0);
    };

    // the root obeys |phi - Phi_ext| <= 2 I_c L_g; pad the bracket slightly
    double half = 2.0 * p.I_c * p.L_g * 1.0001 + 1e-30;
    double lo = p.Phi_ext - half, hi = p.Phi_ext + half;
    double flo = f(lo), fhi = f(hi);
    if (flo > 0 || fhi < 0)
        throw NoConvergence("solve_flux_minimum: initial bracket does not straddle the root");

    double scale = std::max(std::abs(p.Phi_ext), Phi0) / p.L_g;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double fx = f(x);
        if (std::abs(fx) < tol * scale)
            return x;
        if (fx > 0)
            hi = x;
        else
            lo = x;
        // Newton step, kept only if it stays inside the bracket
        double step = fx / fprime(x);
        double xn = x - step;
        if (!(xn > lo && xn < hi))
            xn = 0.5 * (lo + hi);
        x = xn;
    }
    throw NoConvergence("solve_flux_minimum: no convergence after 200 iterations");
}

DerivedParameters derive_parameters(const CircuitParameters& p) {
    p.validate();
    DerivedParameters d;
    d.phi_g0 = solve_flux_minimum(p);
    d.u = d.phi_g0 / Phi0;

    double cosu = std::cos(pi * d.u);
    if (!(cosu > 0))
        throw PreconditionViolated("derive_parameters: cos(pi u) <= 0, junction inductance undefined");
    d.L_J = 1.0 / ((4.0 * p.I_c * pi / Phi0) * cosu);
    d.g0_sq = (4.0 * p.I_c * pi * pi / (Phi0 * Phi0)) * std::sin(pi * d.u);

    d.C_Sigma_a = p.C_a + p.C_ha + p.C_ca;
    d.C_Sigma_h = p.C_h + p.C_ha;
    d.C_Sigma_c = p.C_c + p.C_ca;

    d.omega_a = 1.0 / std::sqrt(d.C_Sigma_a * p.L_a);
    d.omega_h = 1.0 / std::sqrt(d.C_Sigma_h * p.L_h);
    d.omega_c = 1.0 / std::sqrt(d.C_Sigma_c * p.L_c);

    d.N_L = 1.0 / (1.0 + p.L_b / p.L_g + p.L_b / d.L_J);
    double rad_b = (1.0 - d.N_L) / (p.L_b * p.C_b);
    double rad_s = 1.0 + 2.0 * p.L_a / d.L_J;
    if (!(rad_b > 0) || !(rad_s > 0))
        throw PreconditionViolated("derive_parameters: negative radicand in mode frequency");
    d.omega_b = std::sqrt(rad_b);
    d.omega_s = std::sqrt(rad_s) * d.omega_a;
    d.tau_b = 2.0 * pi / d.omega_b;

    d.alpha_ha = p.C_ha / d.C_Sigma_a;
    d.alpha_ca = p.C_ca / d.C_Sigma_a;
    d.alpha_h = p.C_ha / d.C_Sigma_h;
    d.alpha_c = p.C_ca / d.C_Sigma_c;

    d.g_s_sq = Phi0 * d.N_L * d.g0_sq / (pi * d.C_Sigma_a);
    d.g_b_sq = Phi0 * d.N_L * d.g0_sq / (pi * p.C_b);

    d.gamma_h = p.gamma_h > 0 ? p.gamma_h : d.omega_h / p.Q_f;
    d.gamma_c = p.gamma_c > 0 ? p.gamma_c : d.omega_c / p.Q_f;
    d.R_h = 1.0 / (2.0 * d.gamma_h * d.C_Sigma_h);
    d.R_c = 1.0 / (2.0 * d.gamma_c * d.C_Sigma_c);

    d.T_h = p.T_h;
    d.T_c = p.T_c;
    d.L_a = p.L_a;
    d.L_b = p.L_b;
    return d;
}

double junction_inductance(const DerivedParameters& d, double phi_b) {
    double den = 2.0 - 2.0 * d.g_s_sq * d.L_J * d.C_Sigma_a * phi_b;
    if (!(den > 1e-12))
        throw SingularOperatingPoint("junction_inductance: flux bias too deep, modulated inductance degenerates");
    return d.L_J / den;
}

double junction_participation(const DerivedParameters& d, double phi_b) {
    double beta = junction_inductance(d, phi_b);
    return beta / (d.L_a + beta);
}

double effective_frequency(const DerivedParameters& d, double phi_b) {
    double beta = junction_inductance(d, phi_b);
    double Leff = d.L_a + beta;
    if (!(Leff > 0))
        throw SingularOperatingPoint("effective_frequency: total effective inductance not positive");
    return 1.0 / std::sqrt(d.C_Sigma_a * Leff);
}

}
