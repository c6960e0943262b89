#include "qhe/thermo.hpp"

#include <algorithm>
#include <cmath>

#include "qhe/errors.hpp"

namespace qhe {

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& x) {
    std::size_t n = x.size();
    std::vector<double> w(n);
    if (n < 2)
        return w;
    w[0] = 0.5 * (x[1] - x[0]);
    w[n - 1] = 0.5 * (x[n - 1] - x[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        w[i] = 0.5 * (x[i + 1] - x[i - 1]);
    return w;
}

}

FrequencyGrid make_heatflow_grid(const DerivedParameters& d, int density) {
    if (density < 1)
        throw PreconditionViolated("make_heatflow_grid: density must be >= 1");
    double wap = effective_frequency(d, 0.0);
    double omega_max = 2.0 * d.omega_s;
    std::vector<double> pts;

    double base = d.omega_b / 8.0;
    for (double w = base; w <= omega_max; w += base)
        pts.push_back(w);

    // the working peak is much narrower than the filter lines; measure its half
    // width directly from the static response instead of guessing
    double kappa_a;
    {
        double g0 = std::abs(static_greens(d, 0.0, wap));
        double target = g0 / std::sqrt(2.0);
        double lo = 0, hi = 40.0 * d.gamma_h;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            if (std::abs(static_greens(d, 0.0, wap + mid)) > target)
                lo = mid;
            else
                hi = mid;
        }
        kappa_a = std::max(0.5 * (lo + hi), 1e5);
    }

    auto add_window = [&](double center, double half, double step) {
        for (double w = center - half; w <= center + half + 0.5 * step; w += step)
            if (w > 0 && w <= omega_max)
                pts.push_back(w);
    };
    add_window(wap, 80.0 * kappa_a, kappa_a / (8.0 * density));
    add_window(d.omega_h, 30.0 * d.gamma_h, d.gamma_h / (30.0 * density));
    add_window(d.omega_c, 30.0 * d.gamma_c, d.gamma_c / (30.0 * density));

    std::sort(pts.begin(), pts.end());
    std::vector<double> clean;
    clean.reserve(pts.size());
    for (double w : pts)
        if (clean.empty() || w - clean.back() > 1e-6)
            clean.push_back(w);

    FrequencyGrid g;
    g.points = std::move(clean);
    g.weights = trapezoid_weights(g.points);
    g.symmetric = false;
    return g;
}

HeatFlowReport heat_flow(const DerivedParameters& d, const FrequencyGrid& grid, NoiseModel model) {
    double wap = effective_frequency(d, 0.0);
    double wap2 = wap * wap;

    double input_h = 0, input_c = 0, diss_h = 0, diss_c = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double w = grid.points[i];
        double wt = grid.weights[i];
        double w2 = w * w, w4 = w2 * w2;
        cplx th(d.omega_h * d.omega_h - w2, -2.0 * d.gamma_h * w);
        cplx tc(d.omega_c * d.omega_c - w2, -2.0 * d.gamma_c * w);
        double W = wap2 - w2;
        if (W == 0.0)
            W = 1e-6 * wap2;
        cplx a11 = th - d.alpha_h * d.alpha_ha * w4 / W;
        cplx a22 = tc - d.alpha_c * d.alpha_ca * w4 / W;
        cplx a12 = -d.alpha_h * d.alpha_ca * w4 / W;
        cplx a21 = -d.alpha_c * d.alpha_ha * w4 / W;
        cplx det = a11 * a22 - a12 * a21;
        if (std::abs(det) < 1e-250)
            throw PoleEncountered("heat_flow: singular filter system at omega = " + std::to_string(w));
        cplx Ghh = a22 / det, Gcc = a11 / det;
        cplx Ghc = -a12 / det, Gch = -a21 / det;
        double Sh = bath_psd(d, FilterId::hot, w, model);
        double Sc = bath_psd(d, FilterId::cold, w, model);
        input_h += wt * w * Ghh.imag() * Sh;
        input_c += wt * w * Gcc.imag() * Sc;
        diss_h += wt * w2 * (std::norm(Ghh) * Sh + std::norm(Ghc) * Sc);
        diss_c += wt * w2 * (std::norm(Gcc) * Sc + std::norm(Gch) * Sh);
    }
    HeatFlowReport r;
    // even integrands: on a positive-frequency grid the factor 2 folds 1/2pi into 1/pi
    double norm = grid.symmetric ? 2.0 * pi : pi;
    r.input_h = d.C_Sigma_h * input_h / norm;
    r.input_c = d.C_Sigma_c * input_c / norm;
    r.diss_h = 2.0 * d.gamma_h * d.C_Sigma_h * diss_h / norm;
    r.diss_c = 2.0 * d.gamma_c * d.C_Sigma_c * diss_c / norm;
    r.q_dot = r.input_h - r.diss_h;
    r.q_dot_gross = std::abs(r.input_h);
    r.eta_carnot = 1.0 - d.T_c / d.T_h;
    return r;
}

HeatFlowReport heat_flow(const DerivedParameters& d, NoiseModel model) {
    return heat_flow(d, make_heatflow_grid(d), model);
}

double otto_efficiency(const DerivedParameters& d, double A_b) {
    double w_min = effective_frequency(d, 2.0 * A_b);
    double w_max = effective_frequency(d, -2.0 * A_b);
    if (w_min > w_max)
        std::swap(w_min, w_max);
    return 1.0 - w_min / w_max;
}

HeatFlowReport efficiency(double P, const HeatFlowReport& report, const DerivedParameters& d,
                          double A_lo, double A_hi) {
    HeatFlowReport out = report;
    if (!(out.q_dot_gross > 1e-300))
        throw DivisionDegenerate("efficiency: heat-flow denominator underflows");
    out.efficiency = P / out.q_dot_gross;
    if (A_hi < A_lo)
        std::swap(A_lo, A_hi);
    if (A_hi > 0) {
        out.eta_otto_min = otto_efficiency(d, A_lo);
        out.eta_otto_max = otto_efficiency(d, A_hi);
    }
    return out;
}

CycleTrajectory otto_trajectory(const DerivedParameters& d, double A_b, int samples_per_period,
                                const PressureOptions& opt, int harmonic_cutoff) {
    if (samples_per_period < 8)
        throw PreconditionViolated("otto_trajectory: need at least 8 samples per period");
    if (A_b < 0)
        throw PreconditionViolated("otto_trajectory: A_b must be nonnegative");

    int qmax = harmonic_cutoff;
    FrequencyGrid grid = make_integration_grid(d, opt.grid);
    std::vector<double> S(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        S[i] = total_psd(d, grid.points[i], opt.model);

    std::vector<cplx> cq(qmax + 1, cplx(0.0, 0.0));
    if (A_b > 0) {
        int n_max = opt.n_max > 0 ? opt.n_max
                                  : auto_truncate(d, DriveState{A_b, 0.0}, default_probes(d));
        std::vector<std::vector<cplx>> partial(grid.size());
        SolveOptions sopt;
        sopt.threads = opt.threads;
        for_each_sideband_solution(d, DriveState{A_b, 0.0}, grid, n_max, sopt,
                                   [&](std::size_t k, const std::vector<cplx>& g) {
                                       std::vector<cplx> row(qmax + 1, cplx(0.0, 0.0));
                                       std::size_t m = g.size();
                                       for (int q = 0; q <= qmax; ++q) {
                                           cplx acc(0.0, 0.0);
                                           for (std::size_t i = q; i < m; ++i)
                                               acc += g[i] * std::conj(g[i - q]);
                                           row[q] = acc * (S[k] * grid.weights[k]);
                                       }
                                       partial[k] = std::move(row);
                                   });
        double span = grid.symmetric ? 1.0 : 2.0;
        for (const auto& row : partial)
            for (int q = 0; q <= qmax; ++q)
                cq[q] += row[q] * span / (2.0 * pi);
        if (std::abs(cq[0]) > 0 && std::abs(cq[qmax]) / std::abs(cq[0]) > 1e-4)
            throw HarmonicTruncation("otto_trajectory: harmonic tail " +
                                     std::to_string(std::abs(cq[qmax]) / std::abs(cq[0])) +
                                     " relative at cutoff " + std::to_string(qmax));
    } else {
        // undriven: only the stationary variance survives
        cplx acc(0.0, 0.0);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            cplx G0 = static_greens(d, 0.0, grid.points[k]);
            acc += std::norm(G0) * S[k] * grid.weights[k];
        }
        double span = grid.symmetric ? 1.0 : 2.0;
        cq[0] = acc * span / (2.0 * pi);
    }

    CycleTrajectory traj;
    int n = samples_per_period;
    traj.times.resize(n + 1);
    traj.omega_a_eff.resize(n + 1);
    traj.n_a.resize(n + 1);
    traj.E_a_ind.resize(n + 1);
    traj.phi_s_sq.resize(n + 1);

    double flux_sq = (Phi0 / pi) * (Phi0 / pi); // dimensionless phase -> flux squared
    cplx h_n(0.0, 0.0), h_w(0.0, 0.0);          // first harmonics for the phase shift
    for (int j = 0; j <= n; ++j) {
        double t = d.tau_b * j / n;
        traj.times[j] = t;
        double phase = d.omega_b * t;
        double rec = cq[0].real();
        for (int q = 1; q <= qmax; ++q)
            rec += 2.0 * (cq[q] * std::exp(cplx(0.0, -q * phase))).real();
        traj.phi_s_sq[j] = rec;
        double phi_b = 2.0 * A_b * std::cos(phase);
        double beta = junction_inductance(d, phi_b);
        double waeff = effective_frequency(d, phi_b);
        double E_ind = flux_sq * rec * (d.L_a + beta) / (2.0 * beta * beta);
        double E_a = 2.0 * E_ind;
        traj.omega_a_eff[j] = waeff;
        traj.E_a_ind[j] = E_ind;
        traj.n_a[j] = E_a / (hbar * waeff);
        if (j < n) {
            cplx rot = std::exp(cplx(0.0, phase));
            h_n += traj.n_a[j] * rot;
            h_w += waeff * rot;
        }
    }

    double area = 0;
    for (int j = 0; j < n; ++j) {
        double x0 = traj.omega_a_eff[j], y0 = traj.n_a[j];
        double x1 = traj.omega_a_eff[j + 1], y1 = traj.n_a[j + 1];
        area += x0 * y1 - x1 * y0;
    }
    traj.loop_area = 0.5 * area;
    traj.phase_shift = std::abs(h_w) > 0 && std::abs(h_n) > 0 ? std::arg(h_n / h_w) : 0.0;
    return traj;
}

}
