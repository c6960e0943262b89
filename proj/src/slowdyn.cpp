#include "qhe/slowdyn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "qhe/errors.hpp"

namespace qhe {

namespace {

// integral core shared by the public entry points; S is precomputed on grid
cplx pressure_on_grid(const DerivedParameters& d, const DriveState& drive,
                      const FrequencyGrid& grid, const std::vector<double>& S, int n_max,
                      int threads) {
    std::size_t nw = grid.size();
    std::vector<cplx> contrib(nw);
    SolveOptions sopt;
    sopt.threads = threads;
    for_each_sideband_solution(d, drive, grid, n_max, sopt,
                               [&](std::size_t k, const std::vector<cplx>& g) {
                                   cplx F(0.0, 0.0);
                                   for (std::size_t i = 1; i < g.size(); ++i)
                                       F += g[i] * std::conj(g[i - 1]);
                                   contrib[k] = F * S[k] * grid.weights[k];
                               });
    cplx acc(0.0, 0.0);
    for (const auto& c : contrib)
        acc += c;
    double span = grid.symmetric ? 1.0 : 2.0; // even integrand on half-line grids
    return acc * span / (2.0 * pi) * std::exp(cplx(0.0, drive.theta_b));
}

std::vector<double> psd_on_grid(const DerivedParameters& d, const FrequencyGrid& grid,
                                NoiseModel model) {
    std::vector<double> S(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        S[i] = total_psd(d, grid.points[i], model);
    return S;
}

int resolve_n_max(const DerivedParameters& d, const DriveState& drive, int requested) {
    if (requested > 0)
        return requested;
    return auto_truncate(d, drive, default_probes(d));
}

// Auto-selected truncations come from a few probe frequencies, but the solve
// enforces the tail invariant on the whole grid; widen the band and retry
// instead of surfacing the probe heuristic's blind spots. The raised value is
// written back so later evaluations start from it.
cplx pressure_auto_retry(const DerivedParameters& d, const DriveState& drive,
                         const FrequencyGrid& grid, const std::vector<double>& S, int& n_max,
                         int threads) {
    for (;;) {
        try {
            return pressure_on_grid(d, drive, grid, S, n_max, threads);
        } catch (const NoTailDecay&) {
            if (n_max >= 2048)
                throw;
            n_max = std::min(2 * n_max, 2048);
        }
    }
}

}

cplx noise_pressure(const DerivedParameters& d, const DriveState& drive,
                    const FrequencyGrid& grid, int n_max, NoiseModel model, int threads) {
    if (drive.A_b == 0.0)
        return cplx(0.0, 0.0); // no sidebands, every G_n G_{n-1}* product vanishes
    auto S = psd_on_grid(d, grid, model);
    return pressure_on_grid(d, drive, grid, S, n_max, threads);
}

cplx noise_pressure(const DerivedParameters& d, const DriveState& drive,
                    const PressureOptions& opt) {
    if (drive.A_b == 0.0)
        return cplx(0.0, 0.0);
    int n_max = resolve_n_max(d, drive, opt.n_max);
    bool auto_n = opt.n_max <= 0;
    FrequencyGrid grid = make_integration_grid(d, opt.grid);
    auto S = psd_on_grid(d, grid, opt.model);
    cplx value = auto_n ? pressure_auto_retry(d, drive, grid, S, n_max, opt.threads)
                        : pressure_on_grid(d, drive, grid, S, n_max, opt.threads);
    if (opt.check_quadrature) {
        GridOptions dense = opt.grid;
        dense.points_per_sideband *= 2;
        FrequencyGrid grid2 = make_integration_grid(d, dense);
        auto S2 = psd_on_grid(d, grid2, opt.model);
        int n_before = n_max;
        cplx v2 = auto_n ? pressure_auto_retry(d, drive, grid2, S2, n_max, opt.threads)
                         : pressure_on_grid(d, drive, grid2, S2, n_max, opt.threads);
        if (auto_n && n_max != n_before) // keep the comparison at a common truncation
            value = pressure_auto_retry(d, drive, grid, S, n_max, opt.threads);
        double scale = std::abs(v2);
        if (scale > 0 && std::abs(v2 - value) > 1e-4 * scale)
            throw QuadratureNotConverged("noise_pressure: doubled grid density moved the result by " +
                                         std::to_string(std::abs(v2 - value) / scale) + " relative");
    }
    return value;
}

double total_dissipation(const DerivedParameters& d, double A_b, double gamma_b,
                         const PressureOptions& opt) {
    if (!(A_b > 0))
        throw PreconditionViolated("total_dissipation: A_b must be positive");
    DriveState drive{A_b, 0.0};
    cplx N = noise_pressure(d, drive, opt);
    return gamma_b + d.g_b_sq / (2.0 * A_b * d.omega_b) * N.imag();
}

std::vector<double> default_amplitude_grid(int n, double lo, double hi) {
    if (n < 2 || !(lo > 0) || !(hi > lo))
        throw PreconditionViolated("default_amplitude_grid: need n >= 2 and 0 < lo < hi");
    std::vector<double> A(n);
    double l0 = std::log(lo), l1 = std::log(hi);
    for (int i = 0; i < n; ++i)
        A[i] = std::exp(l0 + (l1 - l0) * i / (n - 1));
    A.back() = hi;
    return A;
}

DissipationCurve dissipation_curve(const DerivedParameters& d, const std::vector<double>& A_grid,
                                   double gamma_b, const PressureOptions& opt) {
    if (A_grid.empty())
        throw PreconditionViolated("dissipation_curve: empty amplitude grid");
    for (std::size_t i = 0; i < A_grid.size(); ++i)
        if (!(A_grid[i] > 0) || (i > 0 && !(A_grid[i] > A_grid[i - 1])))
            throw PreconditionViolated("dissipation_curve: amplitudes must be positive and increasing");

    DissipationCurve curve;
    curve.amplitudes = A_grid;
    curve.gamma_b = gamma_b;
    curve.gamma_tot.resize(A_grid.size());
    curve.noise_pressure.resize(A_grid.size());

    int n_max = resolve_n_max(d, DriveState{A_grid.back(), 0.0}, opt.n_max);
    bool auto_n = opt.n_max <= 0;
    FrequencyGrid grid = make_integration_grid(d, opt.grid);
    auto S = psd_on_grid(d, grid, opt.model);

    auto pressure_at = [&](double A) {
        DriveState drive{A, 0.0};
        return auto_n ? pressure_auto_retry(d, drive, grid, S, n_max, opt.threads)
                      : pressure_on_grid(d, drive, grid, S, n_max, opt.threads);
    };

    for (std::size_t i = 0; i < A_grid.size(); ++i) {
        cplx N = pressure_at(A_grid[i]);
        curve.noise_pressure[i] = N;
        curve.gamma_tot[i] = gamma_b + d.g_b_sq / (2.0 * A_grid[i] * d.omega_b) * N.imag();
    }

    // locate and refine the zero crossings of Gamma_tot
    auto gamma_at = [&](double A) {
        cplx N = pressure_at(A);
        return gamma_b + d.g_b_sq / (2.0 * A * d.omega_b) * N.imag();
    };
    double gamma_ref = d.omega_b / 1e6;
    double tol = 1e-3 * gamma_ref;
    for (std::size_t i = 0; i + 1 < A_grid.size(); ++i) {
        double f0 = curve.gamma_tot[i], f1 = curve.gamma_tot[i + 1];
        if (f0 == 0.0 || f0 * f1 >= 0)
            continue;
        double lo = A_grid[i], hi = A_grid[i + 1];
        double flo = f0;
        double root = 0.5 * (lo + hi), froot = gamma_at(root);
        for (int it = 0; it < 80 && std::abs(froot) >= tol; ++it) {
            if ((flo < 0) == (froot < 0)) {
                lo = root;
                flo = froot;
            } else {
                hi = root;
            }
            root = 0.5 * (lo + hi);
            if (hi - lo < 1e-15 * std::max(1.0, root))
                break;
            froot = gamma_at(root);
        }
        if (std::abs(froot) >= tol)
            throw NoConvergence("dissipation_curve: stationary point refinement stalled near A_b = " +
                                std::to_string(root));
        double step = std::min((A_grid[i + 1] - A_grid[i]) / 8.0, 0.5 * root);
        double slope = (gamma_at(root + step) - gamma_at(root - step)) / (2.0 * step);
        StationaryPoint sp;
        sp.A_b = root;
        sp.kind = slope > 0 ? StationaryPoint::stable : StationaryPoint::unstable;
        curve.stationary_points.push_back(sp);
    }
    return curve;
}

std::vector<PowerPoint> stable_point_power(const DerivedParameters& d,
                                           const DissipationCurve& curve) {
    if (curve.gamma_b != 0.0)
        throw PreconditionViolated("stable_point_power: requires a gamma_b = 0 curve");
    std::vector<PowerPoint> out;
    double c = (1.0 - d.N_L) * Phi0 * Phi0 / (pi * pi * d.L_b);
    std::size_t n = curve.amplitudes.size();
    for (std::size_t i = 0; i < n; ++i) {
        double rate = curve.gamma_tot[i];
        if (!(rate < 0))
            continue;
        double prev = curve.gamma_tot[i > 0 ? i - 1 : i];
        double next = curve.gamma_tot[i + 1 < n ? i + 1 : i];
        double slope = next - prev;
        if (!(slope > 0))
            continue; // descending or flat side of a valley: unstable for the matching gamma_b
        PowerPoint pp;
        pp.A_b = curve.amplitudes[i];
        double gamma_b = -rate;
        pp.Q_b = d.omega_b / gamma_b;
        pp.P = 2.0 * gamma_b * pp.A_b * pp.A_b * c;
        out.push_back(pp);
    }
    return out;
}

PowerPoint max_power_point(const DerivedParameters& d, const DissipationCurve& curve) {
    auto pts = stable_point_power(d, curve);
    PowerPoint best;
    best.A_b = std::numeric_limits<double>::quiet_NaN();
    if (pts.empty())
        return best;
    std::size_t ib = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (pts[i].P > pts[ib].P)
            ib = i;
    best = pts[ib];
    // parabolic refinement when the discrete maximum has same-branch neighbors
    if (ib > 0 && ib + 1 < pts.size()) {
        double x0 = pts[ib - 1].A_b, x1 = pts[ib].A_b, x2 = pts[ib + 1].A_b;
        double y0 = pts[ib - 1].P, y1 = pts[ib].P, y2 = pts[ib + 1].P;
        double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
        double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
        if (den != 0.0) {
            double xv = x1 - 0.5 * num / den;
            if (xv > x0 && xv < x2) {
                auto lagrange = [&](double x) {
                    return y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2)) +
                           y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2)) +
                           y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
                };
                double yv = lagrange(xv);
                if (yv >= y1) {
                    best.A_b = xv;
                    best.P = yv;
                    double c = (1.0 - d.N_L) * Phi0 * Phi0 / (pi * pi * d.L_b);
                    double gamma_b = best.P / (2.0 * best.A_b * best.A_b * c);
                    best.Q_b = d.omega_b / gamma_b;
                }
            }
        }
    }
    return best;
}

std::pair<double, double> q_thresholds(const DerivedParameters& d, const DissipationCurve& curve) {
    if (curve.gamma_b != 0.0)
        throw PreconditionViolated("q_thresholds: requires a gamma_b = 0 curve");
    double inf = std::numeric_limits<double>::infinity();
    double q_init = inf, q_stop = inf;
    double origin_rate = curve.gamma_tot.front();
    if (origin_rate < 0)
        q_init = d.omega_b / std::abs(origin_rate);
    double min_rate = *std::min_element(curve.gamma_tot.begin(), curve.gamma_tot.end());
    if (min_rate < 0)
        q_stop = d.omega_b / std::abs(min_rate);
    return {q_init, q_stop};
}

namespace {

// pressure response kernel q(A) = <phi_s^2>(A)/A, regular at A -> 0; cached
// over amplitudes and linearly interpolated within the cache tolerance
class PressureCache {
  public:
    PressureCache(const DerivedParameters& d, const PressureOptions& opt, double cache_tol)
        : d_(d), opt_(opt), tol_(cache_tol) {
        n_max_ = opt.n_max > 0 ? opt.n_max : 0;
        auto_n_ = opt.n_max <= 0;
        grid_ = make_integration_grid(d, opt.grid);
        S_ = psd_on_grid(d, grid_, opt.model);
    }

    cplx kernel(double A) {
        double Aq = std::max(A, floor_);
        auto hi = table_.lower_bound(Aq);
        if (hi != table_.end()) {
            if (hi->first == Aq)
                return hi->second;
            if (hi != table_.begin()) {
                auto lo = std::prev(hi);
                if (hi->first - lo->first <= tol_ * Aq) {
                    double t = (Aq - lo->first) / (hi->first - lo->first);
                    return lo->second * (1.0 - t) + hi->second * t;
                }
            }
        }
        if (n_max_ == 0)
            n_max_ = auto_truncate(d_, DriveState{Aq, 0.0}, default_probes(d_));
        cplx N = auto_n_ ? pressure_auto_retry(d_, DriveState{Aq, 0.0}, grid_, S_, n_max_,
                                               opt_.threads)
                         : pressure_on_grid(d_, DriveState{Aq, 0.0}, grid_, S_, n_max_,
                                            opt_.threads);
        cplx q = N / Aq;
        table_.emplace(Aq, q);
        return q;
    }

  private:
    const DerivedParameters& d_;
    PressureOptions opt_;
    double tol_;
    double floor_ = 1e-6;
    int n_max_;
    bool auto_n_ = false;
    FrequencyGrid grid_;
    std::vector<double> S_;
    std::map<double, cplx> table_;
};

}

std::vector<DriveSample> integrate_amplitude_phase(const DerivedParameters& d, DriveState initial,
                                                   double gamma_b, double t_end,
                                                   const EvolveOptions& opt) {
    if (initial.A_b < 0)
        throw PreconditionViolated("integrate_amplitude_phase: initial amplitude must be >= 0");
    if (!(t_end > 0))
        throw PreconditionViolated("integrate_amplitude_phase: t_end must be positive");

    PressureCache cache(d, opt.pressure, opt.cache_tol);
    double back = d.g_b_sq / (2.0 * d.omega_b);

    auto rhs = [&](double A, double& dA, double& dtheta) {
        cplx q = cache.kernel(A);
        dA = -gamma_b * A - back * A * q.imag();
        dtheta = -back * q.real();
    };

    // slow-evolution regime check at the start
    {
        double dA0, dth0;
        double A0 = std::max(initial.A_b, 1e-6);
        rhs(A0, dA0, dth0);
        double rate = std::abs(dA0 / A0);
        if (rate > d.omega_b / 10.0)
            throw PreconditionViolated("integrate_amplitude_phase: |Gamma_tot| not small against omega_b");
    }

    std::vector<DriveSample> samples;
    double t = 0, A = initial.A_b, theta = initial.theta_b;
    samples.push_back({t, A, theta});

    // Bogacki-Shampine 3(2) embedded pair; the field is smooth and low-order
    // adaptivity is plenty at these tolerances
    double dt = t_end * 1e-6;
    double dt_min = t_end * 1e-14;
    std::size_t steps = 0;
    double k1A, k1T;
    rhs(A, k1A, k1T);
    while (t < t_end) {
        if (++steps > opt.max_steps)
            throw StiffnessDetected("integrate_amplitude_phase: step budget exhausted");
        dt = std::min(dt, t_end - t);
        double k2A, k2T, k3A, k3T, k4A, k4T;
        double A2 = std::max(A + 0.5 * dt * k1A, 0.0);
        rhs(A2, k2A, k2T);
        double A3 = std::max(A + 0.75 * dt * k2A, 0.0);
        rhs(A3, k3A, k3T);
        double An = std::max(A + dt * (2.0 / 9.0 * k1A + 1.0 / 3.0 * k2A + 4.0 / 9.0 * k3A), 0.0);
        double Tn = theta + dt * (2.0 / 9.0 * k1T + 1.0 / 3.0 * k2T + 4.0 / 9.0 * k3T);
        rhs(An, k4A, k4T);
        double errA = dt * std::abs(-5.0 / 72.0 * k1A + 1.0 / 12.0 * k2A + 1.0 / 9.0 * k3A -
                                    1.0 / 8.0 * k4A);
        double errT = dt * std::abs(-5.0 / 72.0 * k1T + 1.0 / 12.0 * k2T + 1.0 / 9.0 * k3T -
                                    1.0 / 8.0 * k4T);
        double scaleA = opt.atol_A + opt.rtol * std::abs(An);
        double scaleT = opt.atol_theta + opt.rtol * std::abs(Tn);
        double err = std::max(errA / scaleA, errT / scaleT);
        if (err <= 1.0) {
            t += dt;
            A = An;
            theta = Tn;
            k1A = k4A;
            k1T = k4T;
            samples.push_back({t, A, theta});
        }
        double grow = err > 0 ? 0.9 * std::pow(err, -1.0 / 3.0) : 4.0;
        dt *= std::clamp(grow, 0.2, 4.0);
        if (dt < dt_min)
            throw StiffnessDetected("integrate_amplitude_phase: step size underflow");
    }
    return samples;
}

}
