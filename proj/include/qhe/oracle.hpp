#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qhe/circuit.hpp"
#include "qhe/spectral.hpp"

namespace qhe {

// A synthesized Gaussian noise record for one filter bath.
struct NoiseTrace {
    double dt = 0;
    std::vector<double> samples;
    std::uint64_t seed = 0;
    NoiseModel psd_model = NoiseModel::quantum;
    FilterId filter = FilterId::hot;
};

// Frequency-domain synthesis: independent complex Gaussian amplitudes shaped by
// sqrt(S_f), Hermitian-symmetrized, inverse transformed. Deterministic per seed.
NoiseTrace synthesize_noise(const DerivedParameters& d, FilterId f, double dt,
                            std::size_t n_samples, std::uint64_t seed, NoiseModel model);

// Largest admissible synthesis step for this circuit, expressed as the drive
// period divided by steps_per_period so driven runs can reuse per-period
// propagators.
double oracle_time_step(const DerivedParameters& d, int steps_per_period = 2048);

struct Periodogram {
    std::vector<double> omega;  // rad/s, nonnegative bins
    std::vector<double> psd;    // two-sided density estimate
};

// Welch average of Hann-windowed segments with 50 percent overlap.
Periodogram welch_psd(const std::vector<double>& x, double dt, std::size_t segment);

struct LinearTrajectory {
    double dt = 0;  // spacing of the stored channels (stride times the trace step)
    std::size_t stride = 1;
    std::vector<double> phi_a, phi_s, phi_h, phi_c;
    double phi_s_variance = 0;   // full-resolution variance after the transient cut
    std::size_t discarded = 0;   // leading samples excluded from statistics
};

// Integrates the coupled linear circuit equations at fixed phi_b, driven by the
// two bath traces. Exact per-step propagation of the frozen linear system.
LinearTrajectory simulate_linear(const DerivedParameters& d, const NoiseTrace& hot,
                                 const NoiseTrace& cold, double phi_b_fixed, double t_end,
                                 std::size_t stride = 1);

struct DrivenHarmonics {
    std::complex<double> first_harmonic;  // drive-frame lock-in of phi_s^2 at omega_b
    double mean = 0;                      // cycle average of phi_s^2
    std::size_t periods_used = 0;
};

// Integrates the circuit with the prescribed pump phi_b(t) = 2 A_b cos(w_b t + theta)
// and demodulates phi_s^2 at the pump frequency. The trace step must divide the
// pump period so per-period propagators can be reused.
DrivenHarmonics simulate_driven(const DerivedParameters& d, const NoiseTrace& hot,
                                const NoiseTrace& cold, double A_b, double theta_b,
                                double t_end);

}
