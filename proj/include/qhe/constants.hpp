#pragma once

// Physical constants (SI, 2019 redefinition) and the flux quantum
// convention used throughout: Phi0 = pi*hbar/e (superconducting h/2e).

namespace qhe {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double e_charge = 1.602176634e-19;  // C
inline constexpr double k_B = 1.380649e-23;          // J/K
inline constexpr double Phi0 = pi * hbar / e_charge; // Wb

}
