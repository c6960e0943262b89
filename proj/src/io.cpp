#include "qhe/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "qhe/errors.hpp"

namespace qhe {

namespace {

using json = nlohmann::ordered_json;

std::map<std::string, double CircuitParameters::*> scalar_keys() {
    return {
        {"L_a", &CircuitParameters::L_a},   {"C_a", &CircuitParameters::C_a},
        {"L_h", &CircuitParameters::L_h},   {"C_h", &CircuitParameters::C_h},
        {"L_c", &CircuitParameters::L_c},   {"C_c", &CircuitParameters::C_c},
        {"L_b", &CircuitParameters::L_b},   {"C_b", &CircuitParameters::C_b},
        {"L_g", &CircuitParameters::L_g},   {"C_ha", &CircuitParameters::C_ha},
        {"C_ca", &CircuitParameters::C_ca}, {"I_c", &CircuitParameters::I_c},
        {"T_c", &CircuitParameters::T_c},   {"T_h", &CircuitParameters::T_h},
    };
}

}

CircuitParameters parameters_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parameter file is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("parameter file must hold a single JSON object");

    auto keys = scalar_keys();
    CircuitParameters p;
    bool have_flux = false, have_q = false, have_gh = false, have_gc = false;
    std::map<std::string, bool> seen;
    for (auto& [key, ptr] : keys)
        seen[key] = false;

    for (const auto& [key, value] : j.items()) {
        if (!value.is_number())
            throw ConfigError("parameter '" + key + "' must be a number");
        double v = value.get<double>();
        if (auto it = keys.find(key); it != keys.end()) {
            p.*(it->second) = v;
            seen[key] = true;
        } else if (key == "Phi_ext_over_Phi0") {
            if (have_flux)
                throw ConfigError("give only one of Phi_ext and Phi_ext_over_Phi0");
            p.Phi_ext = v * Phi0;
            have_flux = true;
        } else if (key == "Phi_ext") {
            if (have_flux)
                throw ConfigError("give only one of Phi_ext and Phi_ext_over_Phi0");
            p.Phi_ext = v;
            have_flux = true;
        } else if (key == "Q_f") {
            p.Q_f = v;
            have_q = true;
        } else if (key == "gamma_h") {
            p.gamma_h = v;
            have_gh = true;
        } else if (key == "gamma_c") {
            p.gamma_c = v;
            have_gc = true;
        } else {
            throw ConfigError("unknown parameter key '" + key + "'");
        }
    }

    for (const auto& [key, got] : seen)
        if (!got)
            throw ConfigError("missing parameter key '" + key + "'");
    if (!have_flux)
        throw ConfigError("missing external flux: give Phi_ext_over_Phi0 or Phi_ext");
    if (have_q && (have_gh || have_gc))
        throw ConfigError("give either Q_f or explicit gamma_h/gamma_c, not both");
    if (!have_q && !(have_gh && have_gc))
        throw ConfigError("missing dissipation: give Q_f or both gamma_h and gamma_c");

    p.validate();
    return p;
}

CircuitParameters load_parameters(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw ConfigError("cannot open parameter file: " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parameters_from_json_text(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

std::string parameters_to_json_text(const CircuitParameters& p) {
    json j;
    j["L_a"] = p.L_a;
    j["C_a"] = p.C_a;
    j["L_h"] = p.L_h;
    j["C_h"] = p.C_h;
    j["L_c"] = p.L_c;
    j["C_c"] = p.C_c;
    j["L_b"] = p.L_b;
    j["C_b"] = p.C_b;
    j["L_g"] = p.L_g;
    j["C_ha"] = p.C_ha;
    j["C_ca"] = p.C_ca;
    j["I_c"] = p.I_c;
    j["T_c"] = p.T_c;
    j["T_h"] = p.T_h;
    j["Phi_ext_over_Phi0"] = p.Phi_ext / Phi0;
    if (p.Q_f > 0) {
        j["Q_f"] = p.Q_f;
    } else {
        j["gamma_h"] = p.gamma_h;
        j["gamma_c"] = p.gamma_c;
    }
    return j.dump(2) + "\n";
}

NoiseModel parse_noise_model(const std::string& name) {
    if (name == "quantum")
        return NoiseModel::quantum;
    if (name == "classical")
        return NoiseModel::classical;
    throw ConfigError("unknown noise model '" + name + "' (want quantum or classical)");
}

std::string noise_model_name(NoiseModel model) {
    return model == NoiseModel::quantum ? "quantum" : "classical";
}

std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    // %.17g always round-trips; prefer the shorter %.15g / %.16g when exact
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

void atomic_write_text(const std::filesystem::path& file, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path dir = file.parent_path();
    if (!dir.empty())
        fs::create_directories(dir);
    fs::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw Error("short write: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, file, ec);
    if (ec)
        throw Error("rename failed for " + file.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw Error("cannot open: " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}
