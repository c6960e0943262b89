#pragma once

#include <complex>
#include <vector>

#include "qhe/circuit.hpp"

// Frequency-domain building blocks: filter responses, the memory kernel of
// the working mode, bath power spectral densities (quantum or classical),
// the total noise PSD seen by the junction phase, and the undriven Green's
// function. All functions are pure and safe to call concurrently.

namespace qhe {

enum class FilterId { hot, cold };
enum class NoiseModel { quantum, classical };

using cplx = std::complex<double>;

struct FrequencyGrid {
    std::vector<double> points;  // rad/s, strictly increasing
    std::vector<double> weights; // trapezoid quadrature weights

    // When h > 0 every point sits on the lattice omega = index[i]*h with
    // h an exact submultiple of omega_b; sideband shifts omega + n*omega_b
    // are then pure index shifts, which the sideband solver exploits.
    std::vector<long long> index;
    double h = 0;

    bool symmetric = false; // covers [-omega_max, omega_max] mirrored about 0

    std::size_t size() const { return points.size(); }
    // checks ordering, symmetry and coverage >= 1.5 omega_s; throws
    void validate(double omega_s) const;
};

struct GridOptions {
    int points_per_sideband = 512; // fine spacing = omega_b / this, multiple of 8
    double fine_band_hi = 0;       // fine band is [-hi, hi]; 0 picks omega_s
    double omega_max_factor = 2.0; // coarse tail reaches factor * omega_s
};

// Two-tier symmetric quadrature grid: a dense band at spacing omega_b/M
// covering the sideband combs, plus omega_b/8 tails out to the cutoff.
FrequencyGrid make_integration_grid(const DerivedParameters& d, const GridOptions& opt = {});

// Resonance-window grid: base spacing omega_b/8 with refinement windows of
// width 20 gamma_f around the filter poles and around omega_a' +- n omega_b
// for |n| <= 10. Not lattice-aligned; used for table dumps and peak scans.
FrequencyGrid make_window_grid(const DerivedParameters& d, double phi_b = 0.0);

cplx filter_response(const DerivedParameters& d, FilterId f, double omega);
cplx memory_kernel(const DerivedParameters& d, double omega);
double bath_psd(const DerivedParameters& d, FilterId f, double omega, NoiseModel model);
double total_psd(const DerivedParameters& d, double omega, NoiseModel model);
cplx static_greens(const DerivedParameters& d, double phi_b, double omega);

struct SpectralTables {
    FrequencyGrid grid;
    std::vector<cplx> kernel;
    std::vector<double> total;      // total noise PSD
    std::vector<double> psd_h, psd_c;
    std::vector<cplx> resp_h, resp_c;
};

SpectralTables build_spectral_tables(const DerivedParameters& d, const FrequencyGrid& grid,
                                     NoiseModel model);

}
