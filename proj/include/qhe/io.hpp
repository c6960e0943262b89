#pragma once

#include <filesystem>
#include <string>

#include "qhe/circuit.hpp"
#include "qhe/spectral.hpp"

// Parameter-file ingestion, stable numeric formatting, and atomic output.

namespace qhe {

// Flat JSON object keyed by circuit symbol names in SI units. The external
// flux may be given as Phi_ext_over_Phi0 (dimensionless) or Phi_ext (Wb);
// dissipation as Q_f or as gamma_h plus gamma_c. Unknown or missing keys
// raise ConfigError.
CircuitParameters load_parameters(const std::filesystem::path& file);
CircuitParameters parameters_from_json_text(const std::string& text);
std::string parameters_to_json_text(const CircuitParameters& p);

NoiseModel parse_noise_model(const std::string& name);
std::string noise_model_name(NoiseModel model);

// Shortest round-trip decimal representation; used everywhere results are
// persisted so that repeated runs are byte-identical.
std::string format_double(double v);

// write-temp-then-rename; creates parent directories.
void atomic_write_text(const std::filesystem::path& file, const std::string& content);

std::string read_text(const std::filesystem::path& file);

}
