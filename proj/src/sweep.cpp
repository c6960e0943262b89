#include "qhe/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qhe/errors.hpp"
#include "qhe/io.hpp"
#include "qhe/thermo.hpp"

namespace qhe {

namespace {

using json = nlohmann::ordered_json;

json finite_or_string(double v) {
    if (std::isfinite(v))
        return json(v);
    return json(format_double(v));
}

double number_from(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (v.is_number())
        return v.get<double>();
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        if (s == "nan")
            return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("sweep point file: bad numeric field '" + key + "'");
}

std::string point_filename(std::size_t i, NoiseModel model) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "point_%03zu_%s.json", i, noise_model_name(model).c_str());
    return buf;
}

std::string curve_filename(std::size_t i, NoiseModel model) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "point_%03zu_%s_curve.csv", i, noise_model_name(model).c_str());
    return buf;
}

std::string record_to_json_text(const SweepRecord& r) {
    json j;
    j["value"] = r.value;
    j["model"] = noise_model_name(r.model);
    j["failed"] = r.failed;
    j["error"] = r.error;
    j["max_power"] = finite_or_string(r.max_power);
    j["Q_b_at_max"] = finite_or_string(r.Q_b_at_max);
    j["A_b_at_max"] = finite_or_string(r.A_b_at_max);
    j["efficiency_at_max"] = finite_or_string(r.efficiency_at_max);
    j["Q_init"] = finite_or_string(r.Q_init);
    j["Q_stop"] = finite_or_string(r.Q_stop);
    return j.dump(2) + "\n";
}

SweepRecord record_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("sweep point file is not valid JSON: ") + e.what());
    }
    SweepRecord r;
    r.value = number_from(j, "value");
    r.model = parse_noise_model(j.at("model").get<std::string>());
    r.failed = j.at("failed").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.max_power = number_from(j, "max_power");
    r.Q_b_at_max = number_from(j, "Q_b_at_max");
    r.A_b_at_max = number_from(j, "A_b_at_max");
    r.efficiency_at_max = number_from(j, "efficiency_at_max");
    r.Q_init = number_from(j, "Q_init");
    r.Q_stop = number_from(j, "Q_stop");
    return r;
}

SweepRecord compute_record(const CircuitParameters& base, const SweepSpec& spec, double value,
                           NoiseModel model, const std::vector<double>& amplitudes,
                           std::string* curve_csv) {
    SweepRecord rec;
    rec.value = value;
    rec.model = model;
    try {
        CircuitParameters p = apply_sweep_value(base, spec.kind, value);
        DerivedParameters d = derive_parameters(p);

        PressureOptions opt;
        opt.grid = spec.grid;
        opt.model = model;
        opt.threads = std::max(1, spec.parallelism);
        opt.n_max = 0; // auto-truncate at the largest amplitude
        DissipationCurve curve = dissipation_curve(d, amplitudes, 0.0, opt);

        if (curve_csv) {
            std::ostringstream csv;
            csv << "A_b,gamma_tot,re_pressure,im_pressure\n";
            for (std::size_t i = 0; i < curve.amplitudes.size(); ++i)
                csv << format_double(curve.amplitudes[i]) << ','
                    << format_double(curve.gamma_tot[i]) << ','
                    << format_double(curve.noise_pressure[i].real()) << ','
                    << format_double(curve.noise_pressure[i].imag()) << '\n';
            *curve_csv = csv.str();
        }

        PowerPoint mp = max_power_point(d, curve);
        auto [q_init, q_stop] = q_thresholds(d, curve);
        rec.max_power = mp.P;
        rec.Q_b_at_max = mp.Q_b;
        rec.A_b_at_max = mp.A_b;
        rec.Q_init = q_init;
        rec.Q_stop = q_stop;

        if (mp.P > 0) {
            auto pts = stable_point_power(d, curve);
            double a_lo = std::numeric_limits<double>::infinity(), a_hi = 0;
            for (const auto& pt : pts) {
                a_lo = std::min(a_lo, pt.A_b);
                a_hi = std::max(a_hi, pt.A_b);
            }
            HeatFlowReport hf = heat_flow(d, model);
            HeatFlowReport eff = efficiency(mp.P, hf, d, a_lo, a_hi);
            rec.efficiency_at_max = eff.efficiency;
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.max_power = std::numeric_limits<double>::quiet_NaN();
        rec.Q_b_at_max = std::numeric_limits<double>::quiet_NaN();
        rec.A_b_at_max = std::numeric_limits<double>::quiet_NaN();
        rec.efficiency_at_max = std::numeric_limits<double>::quiet_NaN();
        rec.Q_init = std::numeric_limits<double>::quiet_NaN();
        rec.Q_stop = std::numeric_limits<double>::quiet_NaN();
    }
    return rec;
}

std::string records_to_csv(const std::vector<SweepRecord>& records) {
    std::ostringstream csv;
    csv << "value,model,max_power_W,Q_b_at_max,A_b_at_max,efficiency_at_max,Q_init,Q_stop,failed\n";
    for (const auto& r : records)
        csv << format_double(r.value) << ',' << noise_model_name(r.model) << ','
            << format_double(r.max_power) << ',' << format_double(r.Q_b_at_max) << ','
            << format_double(r.A_b_at_max) << ',' << format_double(r.efficiency_at_max) << ','
            << format_double(r.Q_init) << ',' << format_double(r.Q_stop) << ','
            << (r.failed ? 1 : 0) << '\n';
    return csv.str();
}

void validate_spec(const SweepSpec& spec) {
    if (spec.values.empty())
        throw ConfigError("sweep: values must be non-empty");
    for (std::size_t i = 1; i < spec.values.size(); ++i)
        if (!(spec.values[i] > spec.values[i - 1]))
            throw ConfigError("sweep: values must be sorted strictly ascending");
    if (spec.outputs.empty())
        throw ConfigError("sweep: outputs directory must be given");
    if (spec.parallelism < 1)
        throw ConfigError("sweep: parallelism must be >= 1");
}

}

SweepKind parse_sweep_kind(const std::string& name) {
    if (name == "temperature")
        return SweepKind::temperature;
    if (name == "gap")
        return SweepKind::gap;
    if (name == "filter_q")
        return SweepKind::filter_q;
    if (name == "noise_model")
        return SweepKind::noise_model;
    throw ConfigError("unknown sweep kind '" + name +
                      "' (want temperature, gap, filter_q or noise_model)");
}

std::string sweep_kind_name(SweepKind kind) {
    switch (kind) {
    case SweepKind::temperature: return "temperature";
    case SweepKind::gap: return "gap";
    case SweepKind::filter_q: return "filter_q";
    case SweepKind::noise_model: return "noise_model";
    }
    return "unknown";
}

CircuitParameters apply_sweep_value(const CircuitParameters& base, SweepKind kind, double value) {
    CircuitParameters p = base;
    switch (kind) {
    case SweepKind::temperature:
    case SweepKind::noise_model:
        p.T_h = value;
        break;
    case SweepKind::filter_q:
        if (value <= 0)
            throw ConfigError("filter_q sweep: Q_f must be positive");
        p.Q_f = value;
        p.gamma_h = p.gamma_c = 0;
        break;
    case SweepKind::gap: {
        DerivedParameters d0 = derive_parameters(base);
        double mu = 0.5 * (d0.omega_h + d0.omega_c);
        double dw = value * d0.omega_b;
        double wh = mu + 0.5 * dw, wc = mu - 0.5 * dw;
        if (dw <= 0 || wc <= 0)
            throw ConfigError("gap sweep: spacing must keep both filters at positive frequency");
        double CSh = base.C_h + base.C_ha, CSc = base.C_c + base.C_ca;
        p.L_h = 1.0 / (CSh * wh * wh);
        p.L_c = 1.0 / (CSc * wc * wc);
        if (base.Q_f <= 0) {
            // explicit linewidths: rescale to preserve gamma_f / omega_f
            p.gamma_h = base.gamma_h * wh / d0.omega_h;
            p.gamma_c = base.gamma_c * wc / d0.omega_c;
        }
        break;
    }
    }
    p.validate();
    return p;
}

std::vector<double> default_sweep_values(SweepKind kind, const CircuitParameters& base) {
    switch (kind) {
    case SweepKind::temperature:
    case SweepKind::noise_model:
        return {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50};
    case SweepKind::filter_q:
        return {1.0, 3.0, 10.0, 30.0, 85.0, 150.0, 300.0};
    case SweepKind::gap: {
        DerivedParameters d0 = derive_parameters(base);
        double base_ratio = (d0.omega_h - d0.omega_c) / d0.omega_b;
        std::vector<double> v = {5.0, 6.5, 7.5, 8.2, 8.6, 9.0, 9.6, 11.0, 13.0};
        v.push_back(base_ratio);
        std::sort(v.begin(), v.end());
        return v;
    }
    }
    return {};
}

std::vector<SweepRecord> run_sweep(const SweepSpec& spec) {
    validate_spec(spec);
    CircuitParameters base = load_parameters(spec.base);
    std::vector<double> amplitudes =
        spec.amplitudes.empty() ? default_amplitude_grid() : spec.amplitudes;

    std::vector<NoiseModel> models;
    if (spec.kind == SweepKind::noise_model)
        models = {NoiseModel::quantum, NoiseModel::classical};
    else
        models = {spec.model};

    namespace fs = std::filesystem;
    fs::create_directories(spec.outputs);

    std::vector<SweepRecord> records;
    std::vector<std::string> point_files;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
        for (NoiseModel model : models) {
            fs::path pf = spec.outputs / point_filename(i, model);
            point_files.push_back(pf.filename().string());
            if (fs::exists(pf)) {
                SweepRecord rec = record_from_json_text(read_text(pf));
                if (std::abs(rec.value - spec.values[i]) >
                        1e-12 * std::max(1.0, std::abs(spec.values[i])) ||
                    rec.model != model)
                    throw ConfigError("sweep: outputs directory holds results for a different "
                                      "sweep: " + pf.string());
                records.push_back(rec);
                continue;
            }
            std::string curve_csv;
            SweepRecord rec =
                compute_record(base, spec, spec.values[i], model, amplitudes, &curve_csv);
            if (!curve_csv.empty())
                atomic_write_text(spec.outputs / curve_filename(i, model), curve_csv);
            atomic_write_text(pf, record_to_json_text(rec));
            records.push_back(rec);
        }
    }

    atomic_write_text(spec.outputs / "records.csv", records_to_csv(records));

    json manifest;
    manifest["kind"] = sweep_kind_name(spec.kind);
    manifest["model"] = spec.kind == SweepKind::noise_model ? std::string("paired")
                                                            : noise_model_name(spec.model);
    manifest["values"] = spec.values;
    manifest["base"] = spec.base.string();
    manifest["parameters"] = json::parse(parameters_to_json_text(base));
    manifest["amplitudes"] = amplitudes;
    manifest["grid"] = {{"points_per_sideband", spec.grid.points_per_sideband},
                        {"fine_band_hi", spec.grid.fine_band_hi},
                        {"omega_max_factor", spec.grid.omega_max_factor}};
    manifest["parallelism"] = spec.parallelism;
    manifest["points"] = point_files;
    manifest["records"] = "records.csv";
    manifest["format_version"] = 1;
    atomic_write_text(spec.outputs / "manifest.json", manifest.dump(2) + "\n");

    return records;
}

LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw PreconditionViolated("fit_linear: need at least two matching points");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    if (den == 0)
        throw PreconditionViolated("fit_linear: degenerate abscissae");
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0, mean = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss_res += r * r;
        double t = y[i] - mean;
        ss_tot += t * t;
    }
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

ClassicalComparison run_classical_comparison(const SweepSpec& spec) {
    SweepSpec paired = spec;
    paired.kind = SweepKind::noise_model;
    std::vector<SweepRecord> all = run_sweep(paired);

    ClassicalComparison cmp;
    for (const auto& r : all)
        (r.model == NoiseModel::quantum ? cmp.quantum : cmp.classical).push_back(r);

    std::vector<double> x, y;
    for (const auto& r : cmp.classical)
        if (!r.failed && std::isfinite(r.max_power)) {
            x.push_back(r.value);
            y.push_back(r.max_power);
        }
    if (x.size() >= 2) {
        cmp.classical_fit = fit_linear(x, y);
        json j;
        j["slope_W_per_K"] = cmp.classical_fit.slope;
        j["intercept_W"] = cmp.classical_fit.intercept;
        j["r_squared"] = cmp.classical_fit.r_squared;
        atomic_write_text(paired.outputs / "classical_fit.json", j.dump(2) + "\n");
    }
    return cmp;
}

}
