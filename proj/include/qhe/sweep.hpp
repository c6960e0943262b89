#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qhe/circuit.hpp"
#include "qhe/slowdyn.hpp"

// One-parameter sweeps of the engine operating point: for each swept value,
// a full zero-load dissipation curve, power maximization, heat flow and
// efficiency, persisted incrementally so interrupted runs resume.

namespace qhe {

enum class SweepKind { temperature, gap, filter_q, noise_model };

SweepKind parse_sweep_kind(const std::string& name);
std::string sweep_kind_name(SweepKind kind);

struct SweepSpec {
    SweepKind kind = SweepKind::temperature;
    std::vector<double> values;      // sorted ascending; units per kind, see below
    std::filesystem::path base;      // parameter file
    std::filesystem::path outputs;   // directory for incremental results
    int parallelism = 1;
    NoiseModel model = NoiseModel::quantum; // ignored for kind == noise_model
    GridOptions grid;
    std::vector<double> amplitudes;  // empty selects default_amplitude_grid()
};

// Swept-value units: temperature -> T_h in kelvin; gap -> (omega_h - omega_c)
// in units of omega_b, moved symmetrically about the base mean with C_Sigma_f
// and gamma_f/omega_f preserved; filter_q -> Q_f; noise_model -> T_h in kelvin
// with both models run per value.

struct SweepRecord {
    double value = 0;
    double max_power = 0;            // W
    double Q_b_at_max = 0;
    double A_b_at_max = 0;
    double efficiency_at_max = 0;
    double Q_init = 0;
    double Q_stop = 0;
    NoiseModel model = NoiseModel::quantum;
    bool failed = false;
    std::string error;
};

// The base parameter set with one swept value applied.
CircuitParameters apply_sweep_value(const CircuitParameters& base, SweepKind kind, double value);

// Default swept values reproducing the published panels; for gap sweeps the
// base parameter set fixes the reference spacing that is always included.
std::vector<double> default_sweep_values(SweepKind kind, const CircuitParameters& base);

std::vector<SweepRecord> run_sweep(const SweepSpec& spec);

struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r_squared = 0;
};

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

struct ClassicalComparison {
    std::vector<SweepRecord> quantum;
    std::vector<SweepRecord> classical;
    LinearFit classical_fit; // classical max power vs swept T_h
};

// Paired quantum/classical records over the same T_h values plus the linear
// fit of classical max power. Shares run_sweep's persistence layout.
ClassicalComparison run_classical_comparison(const SweepSpec& spec);

}
