#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhe/circuit.hpp"
#include "qhe/errors.hpp"
#include "qhe/greens.hpp"
#include "qhe/io.hpp"
#include "qhe/oracle.hpp"
#include "qhe/slowdyn.hpp"
#include "qhe/spectral.hpp"
#include "qhe/sweep.hpp"
#include "qhe/thermo.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct GlobalOpts {
    std::string params = "params/table1.json";
    std::string out = ".";
    int threads = 1;
    std::uint64_t seed = 12345;
    std::string model = "quantum";
};

json finite_or_string(double v) {
    if (std::isfinite(v))
        return json(v);
    return json(qhe::format_double(v));
}

json derived_to_json(const qhe::DerivedParameters& d) {
    json j;
    j["phi_g0_Wb"] = d.phi_g0;
    j["phi_g0_over_Phi0"] = d.u;
    j["L_J_H"] = d.L_J;
    j["g0_sq"] = d.g0_sq;
    j["C_Sigma_a_F"] = d.C_Sigma_a;
    j["C_Sigma_h_F"] = d.C_Sigma_h;
    j["C_Sigma_c_F"] = d.C_Sigma_c;
    j["omega_a_rad_s"] = d.omega_a;
    j["omega_h_rad_s"] = d.omega_h;
    j["omega_c_rad_s"] = d.omega_c;
    j["omega_s_rad_s"] = d.omega_s;
    j["omega_b_rad_s"] = d.omega_b;
    j["omega_a_eff0_rad_s"] = qhe::effective_frequency(d, 0.0);
    j["N_L"] = d.N_L;
    j["tau_b_s"] = d.tau_b;
    j["alpha_ha"] = d.alpha_ha;
    j["alpha_ca"] = d.alpha_ca;
    j["alpha_h"] = d.alpha_h;
    j["alpha_c"] = d.alpha_c;
    j["g_s_sq"] = d.g_s_sq;
    j["g_b_sq"] = d.g_b_sq;
    j["gamma_h_rad_s"] = d.gamma_h;
    j["gamma_c_rad_s"] = d.gamma_c;
    j["R_h_ohm"] = d.R_h;
    j["R_c_ohm"] = d.R_c;
    return j;
}

qhe::DerivedParameters derive_from(const GlobalOpts& g) {
    return qhe::derive_parameters(qhe::load_parameters(g.params));
}

// gamma_b = 0 reading of a curve computed at any gamma_b
qhe::DissipationCurve unloaded(const qhe::DissipationCurve& curve) {
    qhe::DissipationCurve zero = curve;
    for (auto& v : zero.gamma_tot)
        v -= curve.gamma_b;
    zero.gamma_b = 0;
    zero.stationary_points.clear();
    return zero;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Flux-pumped superconducting engine model: circuit derivation, noise spectra, "
                 "sideband response, slow drive dynamics, heat flow, parameter sweeps and a "
                 "time-domain stochastic cross-check"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "qhe 0.1.0");

    auto g = std::make_shared<GlobalOpts>();
    app.add_option("--params", g->params, "circuit parameter file (flat JSON, SI units)")
        ->capture_default_str();
    app.add_option("--out", g->out, "output directory")->capture_default_str();
    app.add_option("--threads", g->threads, "worker threads for frequency-grid solves")
        ->capture_default_str();
    app.add_option("--seed", g->seed, "base random seed for the stochastic oracle")
        ->capture_default_str();
    app.add_option("--model", g->model, "noise model")
        ->check(CLI::IsMember({"quantum", "classical"}))
        ->capture_default_str();

    // ---- derive ----
    auto* cmd_derive = app.add_subcommand("derive", "print the derived operating point as JSON");
    cmd_derive->fallthrough();
    cmd_derive->callback([g]() {
        qhe::DerivedParameters d = derive_from(*g);
        std::cout << derived_to_json(d).dump(2) << "\n";
    });

    // ---- spectral dump ----
    auto* cmd_spectral = app.add_subcommand("spectral", "frequency-domain tables");
    cmd_spectral->require_subcommand(1);
    cmd_spectral->fallthrough();
    auto* cmd_sdump = cmd_spectral->add_subcommand(
        "dump", "write kernel, PSDs and static response over a frequency grid as CSV");
    cmd_sdump->fallthrough();
    auto sdump_phi = std::make_shared<double>(0.0);
    auto sdump_pps = std::make_shared<int>(512);
    auto sdump_maxf = std::make_shared<double>(2.0);
    auto sdump_window = std::make_shared<bool>(false);
    cmd_sdump->add_option("--phi-b", *sdump_phi, "static pump flux offset")->capture_default_str();
    cmd_sdump->add_option("--points-per-sideband", *sdump_pps, "fine grid density")
        ->capture_default_str();
    cmd_sdump->add_option("--omega-max-factor", *sdump_maxf, "grid reach in units of omega_s")
        ->capture_default_str();
    cmd_sdump->add_flag("--window-grid", *sdump_window,
                        "use the resonance-window grid instead of the aligned lattice");
    cmd_sdump->callback([g, sdump_phi, sdump_pps, sdump_maxf, sdump_window]() {
        qhe::DerivedParameters d = derive_from(*g);
        qhe::NoiseModel model = qhe::parse_noise_model(g->model);
        qhe::FrequencyGrid grid;
        if (*sdump_window) {
            grid = qhe::make_window_grid(d, *sdump_phi);
        } else {
            qhe::GridOptions go;
            go.points_per_sideband = *sdump_pps;
            go.omega_max_factor = *sdump_maxf;
            grid = qhe::make_integration_grid(d, go);
        }
        std::ostringstream csv;
        csv << "omega_rad_s,re_K,im_K,S_total,S_h,S_c,re_G0,im_G0\n";
        for (double w : grid.points) {
            qhe::cplx K = qhe::memory_kernel(d, w);
            qhe::cplx G0 = qhe::static_greens(d, *sdump_phi, w);
            csv << qhe::format_double(w) << ',' << qhe::format_double(K.real()) << ','
                << qhe::format_double(K.imag()) << ','
                << qhe::format_double(qhe::total_psd(d, w, model)) << ','
                << qhe::format_double(qhe::bath_psd(d, qhe::FilterId::hot, w, model)) << ','
                << qhe::format_double(qhe::bath_psd(d, qhe::FilterId::cold, w, model)) << ','
                << qhe::format_double(G0.real()) << ',' << qhe::format_double(G0.imag()) << '\n';
        }
        fs::path out = fs::path(g->out) / "spectral.csv";
        qhe::atomic_write_text(out, csv.str());
        std::cout << "wrote " << out.string() << " (" << grid.size() << " rows)\n";
    });

    // ---- greens solve ----
    auto* cmd_greens = app.add_subcommand("greens", "sideband Green's functions");
    cmd_greens->require_subcommand(1);
    cmd_greens->fallthrough();
    auto* cmd_gsolve = cmd_greens->add_subcommand(
        "solve", "solve the sideband ladder over a grid and write G_n(omega) as CSV");
    cmd_gsolve->fallthrough();
    auto gs_A = std::make_shared<double>(0.2);
    auto gs_theta = std::make_shared<double>(0.0);
    auto gs_nmax = std::make_shared<std::string>("auto");
    auto gs_pps = std::make_shared<int>(128);
    cmd_gsolve->add_option("--A-b", *gs_A, "pump amplitude")->capture_default_str();
    cmd_gsolve->add_option("--theta-b", *gs_theta, "pump phase, rad")->capture_default_str();
    cmd_gsolve->add_option("--n-max", *gs_nmax, "sideband truncation order or 'auto'")
        ->capture_default_str();
    cmd_gsolve->add_option("--points-per-sideband", *gs_pps, "fine grid density")
        ->capture_default_str();
    cmd_gsolve->callback([g, gs_A, gs_theta, gs_nmax, gs_pps]() {
        qhe::DerivedParameters d = derive_from(*g);
        qhe::DriveState drive{*gs_A, *gs_theta};
        int n_max;
        if (*gs_nmax == "auto") {
            n_max = qhe::auto_truncate(d, drive, qhe::default_probes(d));
        } else {
            try {
                n_max = std::stoi(*gs_nmax);
            } catch (const std::exception&) {
                throw qhe::ConfigError("--n-max wants an integer or 'auto'");
            }
            if (n_max < 1)
                throw qhe::ConfigError("--n-max must be positive");
        }
        qhe::GridOptions go;
        go.points_per_sideband = *gs_pps;
        qhe::FrequencyGrid grid = qhe::make_integration_grid(d, go);
        qhe::SolveOptions so;
        so.threads = g->threads;
        qhe::SidebandGreens sol = qhe::solve_sidebands(d, drive, grid, n_max, so);
        std::ostringstream csv;
        csv << "omega,n,re,im\n";
        for (std::size_t k = 0; k < grid.size(); ++k)
            for (int n = -n_max; n <= n_max; ++n) {
                qhe::cplx v = sol.at(k, n);
                csv << qhe::format_double(grid.points[k]) << ',' << n << ','
                    << qhe::format_double(v.real()) << ',' << qhe::format_double(v.imag()) << '\n';
            }
        fs::path out = fs::path(g->out) / "greens.csv";
        qhe::atomic_write_text(out, csv.str());
        std::cout << "wrote " << out.string() << " (n_max " << n_max << ", residual "
                  << sol.residual_norm << ", tail " << sol.tail_ratio << ")\n";
    });

    // ---- engine ----
    auto* cmd_engine = app.add_subcommand("engine", "slow dynamics and thermodynamics");
    cmd_engine->require_subcommand(1);
    cmd_engine->fallthrough();

    auto ec_gamma = std::make_shared<double>(0.0);
    auto ec_qb = std::make_shared<double>(0.0);
    auto ec_namp = std::make_shared<int>(400);
    auto ec_alo = std::make_shared<double>(1e-3);
    auto ec_ahi = std::make_shared<double>(0.6);
    auto ec_pps = std::make_shared<int>(512);
    auto* cmd_curve = cmd_engine->add_subcommand(
        "curve", "dissipation rate and noise pressure versus pump amplitude");
    cmd_curve->fallthrough();
    cmd_curve->add_option("--gamma-b", *ec_gamma, "intrinsic pump-mode damping, rad/s")
        ->capture_default_str();
    cmd_curve->add_option("--q-b", *ec_qb, "pump-mode quality factor (sets gamma_b = omega_b/Q_b)")
        ->capture_default_str();
    cmd_curve->add_option("--amplitudes", *ec_namp, "number of amplitude points")
        ->capture_default_str();
    cmd_curve->add_option("--a-min", *ec_alo, "smallest amplitude")->capture_default_str();
    cmd_curve->add_option("--a-max", *ec_ahi, "largest amplitude")->capture_default_str();
    cmd_curve->add_option("--points-per-sideband", *ec_pps, "fine grid density")
        ->capture_default_str();
    cmd_curve->callback([g, ec_gamma, ec_qb, ec_namp, ec_alo, ec_ahi, ec_pps]() {
        qhe::DerivedParameters d = derive_from(*g);
        double gamma_b = *ec_gamma;
        if (*ec_qb > 0) {
            if (gamma_b > 0)
                throw qhe::ConfigError("give --gamma-b or --q-b, not both");
            gamma_b = d.omega_b / *ec_qb;
        }
        qhe::PressureOptions opt;
        opt.grid.points_per_sideband = *ec_pps;
        opt.model = qhe::parse_noise_model(g->model);
        opt.threads = g->threads;
        opt.n_max = 0;
        auto A = qhe::default_amplitude_grid(*ec_namp, *ec_alo, *ec_ahi);
        qhe::DissipationCurve curve = qhe::dissipation_curve(d, A, gamma_b, opt);

        std::ostringstream csv;
        csv << "A_b,gamma_tot,re_pressure,im_pressure\n";
        for (std::size_t i = 0; i < curve.amplitudes.size(); ++i)
            csv << qhe::format_double(curve.amplitudes[i]) << ','
                << qhe::format_double(curve.gamma_tot[i]) << ','
                << qhe::format_double(curve.noise_pressure[i].real()) << ','
                << qhe::format_double(curve.noise_pressure[i].imag()) << '\n';
        fs::path out_csv = fs::path(g->out) / "curve.csv";
        qhe::atomic_write_text(out_csv, csv.str());

        qhe::DissipationCurve zero = unloaded(curve);
        qhe::PowerPoint mp = qhe::max_power_point(d, zero);
        auto [q_init, q_stop] = qhe::q_thresholds(d, zero);
        json summary;
        summary["gamma_b"] = gamma_b;
        summary["stationary_points"] = json::array();
        for (const auto& sp : curve.stationary_points)
            summary["stationary_points"].push_back(
                {{"A_b", sp.A_b},
                 {"kind", sp.kind == qhe::StationaryPoint::stable ? "stable" : "unstable"}});
        summary["Q_init"] = finite_or_string(q_init);
        summary["Q_stop"] = finite_or_string(q_stop);
        summary["max_power"] = {{"P_W", finite_or_string(mp.P)},
                                {"A_b", finite_or_string(mp.A_b)},
                                {"Q_b", finite_or_string(mp.Q_b)}};
        fs::path out_json = fs::path(g->out) / "curve_summary.json";
        qhe::atomic_write_text(out_json, summary.dump(2) + "\n");
        std::cout << summary.dump(2) << "\n";
    });

    auto ev_a0 = std::make_shared<double>(0.0);
    auto ev_theta0 = std::make_shared<double>(0.0);
    auto ev_gamma = std::make_shared<double>(0.0);
    auto ev_qb = std::make_shared<double>(0.0);
    auto ev_tend = std::make_shared<double>(0.0);
    auto ev_pps = std::make_shared<int>(512);
    auto* cmd_evolve = cmd_engine->add_subcommand(
        "evolve", "integrate the averaged amplitude/phase equations of the pump mode");
    cmd_evolve->fallthrough();
    cmd_evolve->add_option("--a0", *ev_a0, "initial amplitude")->required();
    cmd_evolve->add_option("--theta0", *ev_theta0, "initial phase, rad")->capture_default_str();
    cmd_evolve->add_option("--gamma-b", *ev_gamma, "intrinsic pump-mode damping, rad/s")
        ->capture_default_str();
    cmd_evolve->add_option("--q-b", *ev_qb, "pump-mode quality factor")->capture_default_str();
    cmd_evolve->add_option("--t-end", *ev_tend, "integration horizon, seconds")->required();
    cmd_evolve->add_option("--points-per-sideband", *ev_pps, "fine grid density")
        ->capture_default_str();
    cmd_evolve->callback([g, ev_a0, ev_theta0, ev_gamma, ev_qb, ev_tend, ev_pps]() {
        qhe::DerivedParameters d = derive_from(*g);
        double gamma_b = *ev_gamma;
        if (*ev_qb > 0) {
            if (gamma_b > 0)
                throw qhe::ConfigError("give --gamma-b or --q-b, not both");
            gamma_b = d.omega_b / *ev_qb;
        }
        qhe::EvolveOptions opt;
        opt.pressure.grid.points_per_sideband = *ev_pps;
        opt.pressure.model = qhe::parse_noise_model(g->model);
        opt.pressure.threads = g->threads;
        auto samples = qhe::integrate_amplitude_phase(d, {*ev_a0, *ev_theta0}, gamma_b,
                                                      *ev_tend, opt);
        std::ostringstream csv;
        csv << "t,A_b,theta_b\n";
        for (const auto& s : samples)
            csv << qhe::format_double(s.t) << ',' << qhe::format_double(s.A_b) << ','
                << qhe::format_double(s.theta_b) << '\n';
        fs::path out = fs::path(g->out) / "evolve.csv";
        qhe::atomic_write_text(out, csv.str());
        std::cout << "wrote " << out.string() << " (" << samples.size() << " samples, final A_b "
                  << samples.back().A_b << ")\n";
    });

    auto th_namp = std::make_shared<int>(400);
    auto th_pps = std::make_shared<int>(512);
    auto th_skip = std::make_shared<bool>(false);
    auto* cmd_thermo = cmd_engine->add_subcommand(
        "thermo", "heat flow, Carnot bound, efficiency and Otto band at maximum power");
    cmd_thermo->fallthrough();
    cmd_thermo->add_option("--amplitudes", *th_namp, "number of amplitude points")
        ->capture_default_str();
    cmd_thermo->add_option("--points-per-sideband", *th_pps, "fine grid density")
        ->capture_default_str();
    cmd_thermo->add_flag("--heat-only", *th_skip, "skip the power maximization");
    cmd_thermo->callback([g, th_namp, th_pps, th_skip]() {
        qhe::DerivedParameters d = derive_from(*g);
        qhe::NoiseModel model = qhe::parse_noise_model(g->model);
        qhe::HeatFlowReport hf = qhe::heat_flow(d, model);
        json j;
        j["input_h_W"] = hf.input_h;
        j["input_c_W"] = hf.input_c;
        j["diss_h_W"] = hf.diss_h;
        j["diss_c_W"] = hf.diss_c;
        j["q_dot_W"] = hf.q_dot;
        j["q_dot_gross_W"] = hf.q_dot_gross;
        j["eta_carnot"] = hf.eta_carnot;
        if (!*th_skip) {
            qhe::PressureOptions opt;
            opt.grid.points_per_sideband = *th_pps;
            opt.model = model;
            opt.threads = g->threads;
            opt.n_max = 0;
            auto A = qhe::default_amplitude_grid(*th_namp);
            qhe::DissipationCurve curve = qhe::dissipation_curve(d, A, 0.0, opt);
            qhe::PowerPoint mp = qhe::max_power_point(d, curve);
            auto [q_init, q_stop] = qhe::q_thresholds(d, curve);
            j["max_power_W"] = finite_or_string(mp.P);
            j["A_b_at_max"] = finite_or_string(mp.A_b);
            j["Q_b_at_max"] = finite_or_string(mp.Q_b);
            j["Q_init"] = finite_or_string(q_init);
            j["Q_stop"] = finite_or_string(q_stop);
            if (mp.P > 0) {
                auto pts = qhe::stable_point_power(d, curve);
                double a_lo = std::numeric_limits<double>::infinity(), a_hi = 0;
                for (const auto& pt : pts) {
                    a_lo = std::min(a_lo, pt.A_b);
                    a_hi = std::max(a_hi, pt.A_b);
                }
                qhe::HeatFlowReport eff = qhe::efficiency(mp.P, hf, d, a_lo, a_hi);
                j["efficiency"] = eff.efficiency;
                j["eta_otto_min"] = eff.eta_otto_min;
                j["eta_otto_max"] = eff.eta_otto_max;
            }
        }
        fs::path out = fs::path(g->out) / "thermo.json";
        qhe::atomic_write_text(out, j.dump(2) + "\n");
        std::cout << j.dump(2) << "\n";
    });

    auto cy_A = std::make_shared<double>(0.44);
    auto cy_samples = std::make_shared<int>(256);
    auto cy_harm = std::make_shared<int>(20);
    auto cy_pps = std::make_shared<int>(512);
    auto* cmd_cycle = cmd_engine->add_subcommand(
        "cycle", "per-period trajectory of the working mode in (frequency, photon number)");
    cmd_cycle->fallthrough();
    cmd_cycle->add_option("--A-b", *cy_A, "pump amplitude")->capture_default_str();
    cmd_cycle->add_option("--samples", *cy_samples, "samples per period")->capture_default_str();
    cmd_cycle->add_option("--harmonics", *cy_harm, "harmonic cutoff")->capture_default_str();
    cmd_cycle->add_option("--points-per-sideband", *cy_pps, "fine grid density")
        ->capture_default_str();
    cmd_cycle->callback([g, cy_A, cy_samples, cy_harm, cy_pps]() {
        qhe::DerivedParameters d = derive_from(*g);
        qhe::PressureOptions opt;
        opt.grid.points_per_sideband = *cy_pps;
        opt.model = qhe::parse_noise_model(g->model);
        opt.threads = g->threads;
        opt.n_max = 0;
        qhe::CycleTrajectory traj = qhe::otto_trajectory(d, *cy_A, *cy_samples, opt, *cy_harm);
        std::ostringstream csv;
        csv << "t,omega_a_eff,n_a,E_a_ind\n";
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            csv << qhe::format_double(traj.times[i]) << ','
                << qhe::format_double(traj.omega_a_eff[i]) << ','
                << qhe::format_double(traj.n_a[i]) << ','
                << qhe::format_double(traj.E_a_ind[i]) << '\n';
        fs::path out = fs::path(g->out) / "cycle.csv";
        qhe::atomic_write_text(out, csv.str());
        json summary;
        summary["A_b"] = *cy_A;
        summary["loop_area"] = traj.loop_area;
        summary["phase_shift_rad"] = traj.phase_shift;
        summary["eta_otto"] = qhe::otto_efficiency(d, *cy_A);
        fs::path out_json = fs::path(g->out) / "cycle_summary.json";
        qhe::atomic_write_text(out_json, summary.dump(2) + "\n");
        std::cout << summary.dump(2) << "\n";
    });

    // ---- sweep run ----
    auto* cmd_sweep = app.add_subcommand("sweep", "one-parameter engine sweeps");
    cmd_sweep->require_subcommand(1);
    cmd_sweep->fallthrough();
    auto* cmd_srun = cmd_sweep->add_subcommand("run", "run a sweep with incremental persistence");
    cmd_srun->fallthrough();
    auto sw_kind = std::make_shared<std::string>();
    auto sw_values = std::make_shared<std::vector<double>>();
    auto sw_namp = std::make_shared<int>(400);
    auto sw_pps = std::make_shared<int>(512);
    cmd_srun->add_option("--kind", *sw_kind, "temperature | gap | filter_q | noise_model")
        ->required();
    cmd_srun->add_option("--values", *sw_values, "swept values (comma separated)")
        ->delimiter(',');
    cmd_srun->add_option("--amplitudes", *sw_namp, "number of amplitude points")
        ->capture_default_str();
    cmd_srun->add_option("--points-per-sideband", *sw_pps, "fine grid density")
        ->capture_default_str();
    cmd_srun->callback([g, sw_kind, sw_values, sw_namp, sw_pps]() {
        qhe::SweepSpec spec;
        spec.kind = qhe::parse_sweep_kind(*sw_kind);
        spec.base = g->params;
        spec.outputs = g->out;
        spec.parallelism = g->threads;
        spec.model = qhe::parse_noise_model(g->model);
        spec.grid.points_per_sideband = *sw_pps;
        spec.amplitudes = qhe::default_amplitude_grid(*sw_namp);
        spec.values = sw_values->empty()
                          ? qhe::default_sweep_values(spec.kind, qhe::load_parameters(spec.base))
                          : *sw_values;
        if (spec.kind == qhe::SweepKind::noise_model) {
            qhe::ClassicalComparison cmp = qhe::run_classical_comparison(spec);
            std::cout << "paired sweep over " << cmp.quantum.size()
                      << " values; classical fit R^2 = " << cmp.classical_fit.r_squared << "\n";
        } else {
            auto records = qhe::run_sweep(spec);
            std::size_t failed = 0;
            for (const auto& r : records)
                failed += r.failed ? 1 : 0;
            std::cout << "swept " << records.size() << " points (" << failed << " failed); "
                      << "records at " << (spec.outputs / "records.csv").string() << "\n";
        }
    });

    // ---- oracle run ----
    auto* cmd_oracle = app.add_subcommand("oracle", "stochastic time-domain cross-check");
    cmd_oracle->require_subcommand(1);
    cmd_oracle->fallthrough();
    auto* cmd_orun = cmd_oracle->add_subcommand(
        "run", "compare time-domain statistics against the frequency-domain pipeline");
    cmd_orun->fallthrough();
    auto or_lin_seeds = std::make_shared<int>(32);
    auto or_drv_seeds = std::make_shared<int>(64);
    auto or_log2 = std::make_shared<int>(22);
    auto or_spp = std::make_shared<int>(2048);
    auto or_phis = std::make_shared<std::vector<double>>(std::vector<double>{0.0, 0.27, -0.27});
    auto or_amps = std::make_shared<std::vector<double>>(std::vector<double>{0.2, 0.44});
    auto or_dump = std::make_shared<bool>(false);
    cmd_orun->add_option("--linear-seeds", *or_lin_seeds, "ensemble size per fixed phi_b")
        ->capture_default_str();
    cmd_orun->add_option("--driven-seeds", *or_drv_seeds, "ensemble size per pump amplitude")
        ->capture_default_str();
    cmd_orun->add_option("--log2-samples", *or_log2, "trace length exponent")
        ->capture_default_str();
    cmd_orun->add_option("--steps-per-period", *or_spp, "pump period subdivision")
        ->capture_default_str();
    cmd_orun->add_option("--phi-b", *or_phis, "fixed offsets for the linear check")
        ->delimiter(',');
    cmd_orun->add_option("--A-b", *or_amps, "pump amplitudes for the driven check")
        ->delimiter(',');
    cmd_orun->add_flag("--dump-traces", *or_dump, "write a decimated trajectory CSV per case");
    cmd_orun->callback([g, or_lin_seeds, or_drv_seeds, or_log2, or_spp, or_phis, or_amps,
                        or_dump]() {
        qhe::DerivedParameters d = derive_from(*g);
        qhe::NoiseModel model = qhe::parse_noise_model(g->model);
        if (*or_log2 < 14 || *or_log2 > 26)
            throw qhe::ConfigError("--log2-samples out of the supported range [14, 26]");
        std::size_t N = std::size_t(1) << *or_log2;
        double dt = qhe::oracle_time_step(d, *or_spp);
        double t_end = static_cast<double>(N) * dt;

        json report;
        report["seed"] = g->seed;
        report["model"] = qhe::noise_model_name(model);
        report["samples"] = N;
        report["dt_s"] = dt;

        qhe::GridOptions go; // pipeline-side targets on the default grid
        json lin = json::array();
        for (double phi_b : *or_phis) {
            qhe::FrequencyGrid grid = qhe::make_integration_grid(d, go);
            double target = 0;
            for (std::size_t k = 0; k < grid.size(); ++k)
                target += std::norm(qhe::static_greens(d, phi_b, grid.points[k])) *
                          qhe::total_psd(d, grid.points[k], model) * grid.weights[k];
            target *= (grid.symmetric ? 1.0 : 2.0) / (2.0 * qhe::pi);

            double sum = 0, sumsq = 0;
            for (int s = 0; s < *or_lin_seeds; ++s) {
                std::uint64_t seed = g->seed + static_cast<std::uint64_t>(s);
                auto hot = qhe::synthesize_noise(d, qhe::FilterId::hot, dt, N, seed, model);
                auto cold = qhe::synthesize_noise(d, qhe::FilterId::cold, dt, N, seed, model);
                auto traj = qhe::simulate_linear(d, hot, cold, phi_b, t_end, 4096);
                sum += traj.phi_s_variance;
                sumsq += traj.phi_s_variance * traj.phi_s_variance;
                if (*or_dump && s == 0) {
                    std::ostringstream csv;
                    csv << "t,phi_a,phi_s,phi_h,phi_c\n";
                    for (std::size_t i = 0; i < traj.phi_s.size(); ++i)
                        csv << qhe::format_double(static_cast<double>(i) * traj.dt) << ','
                            << qhe::format_double(traj.phi_a[i]) << ','
                            << qhe::format_double(traj.phi_s[i]) << ','
                            << qhe::format_double(traj.phi_h[i]) << ','
                            << qhe::format_double(traj.phi_c[i]) << '\n';
                    std::ostringstream name;
                    name << "trace_linear_phi_b_" << phi_b << ".csv";
                    qhe::atomic_write_text(fs::path(g->out) / name.str(), csv.str());
                }
            }
            double n = *or_lin_seeds;
            double mean = sum / n;
            double sem = n > 1 ? std::sqrt(std::max(0.0, sumsq / n - mean * mean) / (n - 1)) : 0;
            double rel = std::abs(mean - target) / target;
            lin.push_back({{"phi_b", phi_b},
                           {"seeds", *or_lin_seeds},
                           {"target_variance", target},
                           {"estimate", mean},
                           {"sem", sem},
                           {"rel_dev", rel},
                           {"pass", rel <= 0.05}});
            std::cout << "linear phi_b=" << phi_b << ": estimate " << mean << " vs target "
                      << target << " (rel " << rel << ")\n";
        }
        report["linear"] = lin;

        json drv = json::array();
        for (double A_b : *or_amps) {
            qhe::PressureOptions popt;
            popt.model = model;
            popt.threads = g->threads;
            qhe::cplx target = qhe::noise_pressure(d, qhe::DriveState{A_b, 0.0}, popt);

            qhe::cplx acc(0, 0);
            double re_sum = 0, re_sq = 0, im_sum = 0, im_sq = 0;
            for (int s = 0; s < *or_drv_seeds; ++s) {
                std::uint64_t seed = g->seed + static_cast<std::uint64_t>(s);
                auto hot = qhe::synthesize_noise(d, qhe::FilterId::hot, dt, N, seed, model);
                auto cold = qhe::synthesize_noise(d, qhe::FilterId::cold, dt, N, seed, model);
                auto h = qhe::simulate_driven(d, hot, cold, A_b, 0.0, t_end);
                acc += h.first_harmonic;
                re_sum += h.first_harmonic.real();
                re_sq += h.first_harmonic.real() * h.first_harmonic.real();
                im_sum += h.first_harmonic.imag();
                im_sq += h.first_harmonic.imag() * h.first_harmonic.imag();
            }
            double n = *or_drv_seeds;
            qhe::cplx mean = acc / n;
            double sem_re =
                n > 1 ? std::sqrt(std::max(0.0, re_sq / n - (re_sum / n) * (re_sum / n)) / (n - 1))
                      : 0;
            double sem_im =
                n > 1 ? std::sqrt(std::max(0.0, im_sq / n - (im_sum / n) * (im_sum / n)) / (n - 1))
                      : 0;
            double rel = std::abs(mean - target) / std::abs(target);
            bool im_sign = (mean.imag() < 0) == (target.imag() < 0);
            drv.push_back({{"A_b", A_b},
                           {"seeds", *or_drv_seeds},
                           {"target_re", target.real()},
                           {"target_im", target.imag()},
                           {"estimate_re", mean.real()},
                           {"estimate_im", mean.imag()},
                           {"sem_re", sem_re},
                           {"sem_im", sem_im},
                           {"rel_dev", rel},
                           {"im_sign_consistent", im_sign},
                           {"pass", rel <= 0.10 && im_sign}});
            std::cout << "driven A_b=" << A_b << ": estimate (" << mean.real() << ", "
                      << mean.imag() << ") vs target (" << target.real() << ", " << target.imag()
                      << ") rel " << rel << "\n";
        }
        report["driven"] = drv;

        fs::path out = fs::path(g->out) / "oracle.json";
        qhe::atomic_write_text(out, report.dump(2) + "\n");
        std::cout << "wrote " << out.string() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}

}

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const qhe::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const qhe::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
