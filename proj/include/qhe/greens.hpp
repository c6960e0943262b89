#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "qhe/spectral.hpp"

// Sideband-expanded Green's function of the periodically modulated working
// mode: for each grid frequency, the coefficients G_n(omega) solve the
// tridiagonal system with main diagonal P(omega + n omega_b), constant
// off-diagonals R = -2 g_s^2 A_b e^{i theta_b} (super) and conj(R) (sub),
// and a unit right-hand side at n = 0.

namespace qhe {

struct DriveState {
    double A_b = 0.0;     // dimensionless amplitude, >= 0
    double theta_b = 0.0; // rad
};

struct TridiagonalSystem {
    std::vector<cplx> diag; // P(omega + n omega_b), n = -n_max..n_max
    cplx sub, sup;          // conj(R), R
    int n_max = 0;
};

TridiagonalSystem build_diagonals(const DerivedParameters& d, const DriveState& drive,
                                  double omega, int n_max);

struct SidebandGreens {
    int n_max = 0;
    FrequencyGrid grid;
    DriveState drive;
    // row-major per frequency: coefficients[k*(2n_max+1) + (n+n_max)]
    std::vector<cplx> coefficients;
    double residual_norm = 0; // max over omega of ||M g - e0||_2
    double tail_ratio = 0;    // max_k |G_{+-n_max}| / max_{n,k} |G_n|

    cplx at(std::size_t k, int n) const {
        return coefficients[k * (2 * n_max + 1) + (n + n_max)];
    }
};

struct SolveOptions {
    int threads = 1;
    double growth_limit = 1e12;  // Thomas elimination safeguard
    double residual_limit = 1e-10;
    double tail_limit = 1e-8;
    bool enforce_tail = true;    // throw NoTailDecay when the tail invariant fails
};

SidebandGreens solve_sidebands(const DerivedParameters& d, const DriveState& drive,
                               const FrequencyGrid& grid, int n_max,
                               const SolveOptions& opt = {});

struct SidebandSummary {
    double residual_norm = 0;
    double tail_ratio = 0;
};

// Streaming variant: visit(k, g) receives each grid point's solved coefficient
// vector (indexed n + n_max) without materializing the full table. visit runs
// concurrently from worker threads when opt.threads > 1; distinct k only.
SidebandSummary for_each_sideband_solution(
    const DerivedParameters& d, const DriveState& drive, const FrequencyGrid& grid, int n_max,
    const SolveOptions& opt, const std::function<void(std::size_t, const std::vector<cplx>&)>& visit);

// Smallest n_max in doubling steps from 32 (capped at 2048) whose solutions
// at the probe frequencies meet the tail-decay invariant.
int auto_truncate(const DerivedParameters& d, const DriveState& drive,
                  const std::vector<double>& probe_omegas);
std::vector<double> default_probes(const DerivedParameters& d);

}
