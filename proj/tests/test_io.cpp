#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <json.hpp>

#include "qhe/circuit.hpp"
#include "qhe/constants.hpp"
#include "qhe/errors.hpp"
#include "qhe/io.hpp"

using namespace qhe;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string base_text() { return parameters_to_json_text(table1_parameters()); }

std::string with_mutation(const std::function<void(ojson&)>& mutate) {
    ojson j = ojson::parse(base_text());
    mutate(j);
    return j.dump(2);
}

}

TEST_SUITE("io") {

TEST_CASE("parameter json round trip") {
    CircuitParameters p = table1_parameters();
    CircuitParameters q = parameters_from_json_text(parameters_to_json_text(p));
    CHECK(q.L_a == p.L_a);
    CHECK(q.C_a == p.C_a);
    CHECK(q.L_h == p.L_h);
    CHECK(q.C_h == p.C_h);
    CHECK(q.L_c == p.L_c);
    CHECK(q.C_c == p.C_c);
    CHECK(q.L_b == p.L_b);
    CHECK(q.C_b == p.C_b);
    CHECK(q.L_g == p.L_g);
    CHECK(q.C_ha == p.C_ha);
    CHECK(q.C_ca == p.C_ca);
    CHECK(q.I_c == p.I_c);
    CHECK(q.T_c == p.T_c);
    CHECK(q.T_h == p.T_h);
    CHECK(q.Q_f == p.Q_f);
    // flux crosses a divide/multiply by Phi0, so allow one rounding step
    CHECK(q.Phi_ext == doctest::Approx(p.Phi_ext).epsilon(1e-15));

    SUBCASE("explicit linewidths round trip") {
        CircuitParameters e = p;
        e.Q_f = 0;
        e.gamma_h = 8.1e8;
        e.gamma_c = 5.9e8;
        std::string text = parameters_to_json_text(e);
        CHECK(text.find("gamma_h") != std::string::npos);
        CHECK(text.find("Q_f") == std::string::npos);
        CircuitParameters r = parameters_from_json_text(text);
        CHECK(r.Q_f == 0.0);
        CHECK(r.gamma_h == e.gamma_h);
        CHECK(r.gamma_c == e.gamma_c);
    }
}

TEST_CASE("parameter file matches the built-in set") {
    const char* src = std::getenv("QHE_SOURCE_DIR");
    REQUIRE(src != nullptr);
    CircuitParameters file = load_parameters(fs::path(src) / "params" / "table1.json");
    CircuitParameters builtin = table1_parameters();
    CHECK(file.L_a == builtin.L_a);
    CHECK(file.C_a == builtin.C_a);
    CHECK(file.L_h == builtin.L_h);
    CHECK(file.C_h == builtin.C_h);
    CHECK(file.L_c == builtin.L_c);
    CHECK(file.C_c == builtin.C_c);
    CHECK(file.L_b == builtin.L_b);
    CHECK(file.C_b == builtin.C_b);
    CHECK(file.L_g == builtin.L_g);
    CHECK(file.C_ha == builtin.C_ha);
    CHECK(file.C_ca == builtin.C_ca);
    CHECK(file.I_c == builtin.I_c);
    CHECK(file.T_c == builtin.T_c);
    CHECK(file.T_h == builtin.T_h);
    CHECK(file.Q_f == builtin.Q_f);
    CHECK(file.Phi_ext == doctest::Approx(builtin.Phi_ext).epsilon(1e-15));

    CHECK_THROWS_AS(load_parameters(fs::path(src) / "params" / "no_such_file.json"), ConfigError);
}

TEST_CASE("parameter parsing rejects malformed input") {
    CHECK_THROWS_AS(parameters_from_json_text("{"), ConfigError);
    CHECK_THROWS_AS(parameters_from_json_text("[1, 2]"), ConfigError);

    CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                        j["L_x"] = 1e-9;
                    })),
                    ConfigError);
    CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                        j.erase("L_a");
                    })),
                    ConfigError);
    CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                        j["L_a"] = "thin";
                    })),
                    ConfigError);
    CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                        j["L_a"] = -1e-9;
                    })),
                    ConfigError);

    SUBCASE("flux must be given exactly once") {
        CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                            j.erase("Phi_ext_over_Phi0");
                        })),
                        ConfigError);
        CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                            j["Phi_ext"] = 0.5253 * Phi0;
                        })),
                        ConfigError);
        CircuitParameters p = parameters_from_json_text(with_mutation([](ojson& j) {
            j.erase("Phi_ext_over_Phi0");
            j["Phi_ext"] = 0.5253 * Phi0;
        }));
        CHECK(p.Phi_ext == 0.5253 * Phi0);
    }
    SUBCASE("dissipation must be one of the two forms") {
        CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                            j.erase("Q_f");
                        })),
                        ConfigError);
        CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                            j["gamma_h"] = 8e8;
                        })),
                        ConfigError);
        CHECK_THROWS_AS(parameters_from_json_text(with_mutation([](ojson& j) {
                            j.erase("Q_f");
                            j["gamma_h"] = 8e8;
                        })),
                        ConfigError);
        CircuitParameters p = parameters_from_json_text(with_mutation([](ojson& j) {
            j.erase("Q_f");
            j["gamma_h"] = 8e8;
            j["gamma_c"] = 6e8;
        }));
        CHECK(p.gamma_h == 8e8);
        CHECK(p.gamma_c == 6e8);
    }
}

TEST_CASE("noise model names") {
    CHECK(parse_noise_model("quantum") == NoiseModel::quantum);
    CHECK(parse_noise_model("classical") == NoiseModel::classical);
    CHECK(noise_model_name(NoiseModel::quantum) == "quantum");
    CHECK(noise_model_name(NoiseModel::classical) == "classical");
    CHECK_THROWS_AS(parse_noise_model("Quantum"), ConfigError);
    CHECK_THROWS_AS(parse_noise_model(""), ConfigError);
}

TEST_CASE("double formatting round trips") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(-INFINITY) == "-inf");

    std::mt19937_64 rng(20240815);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> expo(-300, 300);
    for (int i = 0; i < 1000; ++i) {
        double v = std::ldexp(mant(rng), expo(rng));
        std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("atomic text output") {
    fs::path dir = fs::temp_directory_path() / "qhe-test-io";
    fs::remove_all(dir);
    fs::path file = dir / "deep" / "nested" / "out.txt";

    std::string content = "alpha\nbeta\n";
    atomic_write_text(file, content);
    CHECK(read_text(file) == content);
    CHECK(!fs::exists(file.string() + ".tmp"));

    atomic_write_text(file, "gamma\n");
    CHECK(read_text(file) == "gamma\n");

    std::string big(1 << 20, 'x');
    atomic_write_text(file, big);
    CHECK(read_text(file) == big);

    CHECK_THROWS_AS(read_text(dir / "missing.txt"), Error);
    fs::remove_all(dir);
}

}
