#include "qhe/greens.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "qhe/errors.hpp"
#include "qhe/parallel.hpp"

namespace qhe {

namespace {

struct RowResult {
    double residual = 0;
    double tail = 0;     // max |g_{+-n_max}|
    double peak = 0;     // max_n |g_n|
};

// Thomas elimination with growth monitoring; returns false when the local
// amplification exceeds the limit and a pivoted solve should take over.
bool thomas_solve(const std::vector<cplx>& diag, cplx sub, cplx sup, std::size_t rhs_pos,
                  double growth_limit, std::vector<cplx>& g, std::vector<cplx>& cp,
                  std::vector<cplx>& dp) {
    std::size_t m = diag.size();
    cp.resize(m);
    dp.resize(m);
    double growth = 0;
    cplx den = diag[0];
    if (den == cplx(0.0, 0.0))
        return false;
    cp[0] = sup / den;
    dp[0] = (rhs_pos == 0 ? 1.0 : 0.0) / den;
    growth = std::abs(cp[0]);
    for (std::size_t i = 1; i < m; ++i) {
        den = diag[i] - sub * cp[i - 1];
        double mag = std::abs(den);
        if (mag == 0.0)
            return false;
        cp[i] = sup / den;
        dp[i] = ((i == rhs_pos ? 1.0 : 0.0) - sub * dp[i - 1]) / den;
        growth = std::max(growth, std::abs(cp[i]));
        if (growth > growth_limit)
            return false;
    }
    g.resize(m);
    g[m - 1] = dp[m - 1];
    for (std::size_t i = m - 1; i-- > 0;)
        g[i] = dp[i] - cp[i] * g[i + 1];
    return true;
}

void pivoted_solve(const std::vector<cplx>& diag, cplx sub, cplx sup, std::size_t rhs_pos,
                   std::vector<cplx>& g) {
    using Mat = Eigen::MatrixXcd;
    using Vec = Eigen::VectorXcd;
    const auto m = static_cast<Eigen::Index>(diag.size());
    Mat A = Mat::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        A(i, i) = diag[i];
        if (i > 0)
            A(i, i - 1) = sub;
        if (i + 1 < m)
            A(i, i + 1) = sup;
    }
    Vec b = Vec::Zero(m);
    b(static_cast<Eigen::Index>(rhs_pos)) = 1.0;
    Eigen::PartialPivLU<Mat> lu(A);
    Vec x = lu.solve(b);
    if (!x.allFinite())
        throw IllConditioned("solve_sidebands: pivoted fallback produced non-finite solution");
    g.assign(x.data(), x.data() + m);
}

double row_residual(const std::vector<cplx>& diag, cplx sub, cplx sup, std::size_t rhs_pos,
                    const std::vector<cplx>& g) {
    std::size_t m = diag.size();
    double acc = 0;
    for (std::size_t i = 0; i < m; ++i) {
        cplx r = diag[i] * g[i];
        if (i > 0)
            r += sub * g[i - 1];
        if (i + 1 < m)
            r += sup * g[i + 1];
        if (i == rhs_pos)
            r -= 1.0;
        acc += std::norm(r);
    }
    return std::sqrt(acc);
}

RowResult solve_row(const std::vector<cplx>& diag, cplx sub, cplx sup, double growth_limit,
                    double residual_limit, std::vector<cplx>& g, std::vector<cplx>& cp,
                    std::vector<cplx>& dp) {
    std::size_t m = diag.size();
    std::size_t rhs_pos = (m - 1) / 2;
    if (!thomas_solve(diag, sub, sup, rhs_pos, growth_limit, g, cp, dp))
        pivoted_solve(diag, sub, sup, rhs_pos, g);
    RowResult r;
    r.residual = row_residual(diag, sub, sup, rhs_pos, g);
    if (r.residual > residual_limit) {
        // the Thomas pass went through but lost accuracy; retry pivoted
        pivoted_solve(diag, sub, sup, rhs_pos, g);
        r.residual = row_residual(diag, sub, sup, rhs_pos, g);
        if (r.residual > residual_limit)
            throw IllConditioned("solve_sidebands: residual " + std::to_string(r.residual) +
                                 " above limit after pivoted fallback");
    }
    for (std::size_t i = 0; i < m; ++i)
        r.peak = std::max(r.peak, std::abs(g[i]));
    r.tail = std::max(std::abs(g[0]), std::abs(g[m - 1]));
    return r;
}

}

TridiagonalSystem build_diagonals(const DerivedParameters& d, const DriveState& drive,
                                  double omega, int n_max) {
    if (n_max < 1)
        throw PreconditionViolated("build_diagonals: n_max must be >= 1");
    if (drive.A_b < 0)
        throw PreconditionViolated("build_diagonals: A_b must be nonnegative");
    TridiagonalSystem sys;
    sys.n_max = n_max;
    sys.diag.resize(2 * n_max + 1);
    double ws2 = d.omega_s * d.omega_s;
    for (int n = -n_max; n <= n_max; ++n)
        sys.diag[n + n_max] = ws2 - memory_kernel(d, omega + n * d.omega_b);
    cplx R = -2.0 * d.g_s_sq * drive.A_b * std::exp(cplx(0.0, drive.theta_b));
    sys.sup = R;
    sys.sub = std::conj(R);
    return sys;
}

SidebandSummary for_each_sideband_solution(
    const DerivedParameters& d, const DriveState& drive, const FrequencyGrid& grid, int n_max,
    const SolveOptions& opt, const std::function<void(std::size_t, const std::vector<cplx>&)>& visit) {
    if (n_max < 1)
        throw PreconditionViolated("solve_sidebands: n_max must be >= 1");
    if (drive.A_b < 0)
        throw PreconditionViolated("solve_sidebands: A_b must be nonnegative");
    std::size_t nw = grid.size();
    std::size_t rows = 2 * static_cast<std::size_t>(n_max) + 1;

    cplx R = -2.0 * d.g_s_sq * drive.A_b * std::exp(cplx(0.0, drive.theta_b));
    cplx sup = R, sub = std::conj(R);
    double ws2 = d.omega_s * d.omega_s;

    // On lattice-aligned grids every needed kernel value sits on the same
    // lattice; cache K over nonnegative indices once and mirror by symmetry.
    std::vector<cplx> kcache;
    long long max_idx = 0;
    bool aligned = grid.h > 0 && !grid.index.empty();
    long long M = 0;
    if (aligned) {
        double Mf = d.omega_b / grid.h;
        M = std::llround(Mf);
        aligned = std::abs(Mf - static_cast<double>(M)) < 1e-9 * Mf;
    }
    if (aligned) {
        for (long long idx : grid.index)
            max_idx = std::max(max_idx, std::llabs(idx));
        max_idx += static_cast<long long>(n_max) * M;
        kcache.resize(max_idx + 1);
        parallel_for(kcache.size(), opt.threads, [&](std::size_t m) {
            kcache[m] = memory_kernel(d, static_cast<double>(m) * grid.h);
        });
    }

    std::vector<RowResult> results(nw);
    auto solve_one = [&](std::size_t k, std::vector<cplx>& diag, std::vector<cplx>& g,
                         std::vector<cplx>& cp, std::vector<cplx>& dp) {
        diag.resize(rows);
        if (aligned) {
            long long base = grid.index[k];
            for (int n = -n_max; n <= n_max; ++n) {
                long long idx = base + static_cast<long long>(n) * M;
                cplx K = idx >= 0 ? kcache[idx] : std::conj(kcache[-idx]);
                diag[n + n_max] = ws2 - K;
            }
        } else {
            double w = grid.points[k];
            for (int n = -n_max; n <= n_max; ++n)
                diag[n + n_max] = ws2 - memory_kernel(d, w + n * d.omega_b);
        }
        results[k] = solve_row(diag, sub, sup, opt.growth_limit, opt.residual_limit, g, cp, dp);
        visit(k, g);
    };

    // On a mirrored grid the negative-frequency rows follow exactly from
    // g_{-n}(-omega) = conj(g_n(omega)); solve the upper half only.
    bool mirror = grid.symmetric && nw >= 2;
    if (mirror) {
        for (std::size_t k = 0; k < nw / 2 && mirror; ++k)
            if (std::abs(grid.points[k] + grid.points[nw - 1 - k]) >
                1e-9 * (std::abs(grid.points[nw - 1 - k]) + 1.0))
                mirror = false;
    }

    if (mirror) {
        std::size_t start = nw / 2;
        parallel_for(nw - start, opt.threads, [&](std::size_t j) {
            thread_local std::vector<cplx> diag, g, cp, dp, h;
            std::size_t k = start + j;
            solve_one(k, diag, g, cp, dp);
            std::size_t p = nw - 1 - k;
            if (p != k) {
                h.resize(rows);
                for (std::size_t i = 0; i < rows; ++i)
                    h[i] = std::conj(g[rows - 1 - i]);
                results[p] = results[k];
                visit(p, h);
            }
        });
    } else {
        parallel_for(nw, opt.threads, [&](std::size_t k) {
            thread_local std::vector<cplx> diag, g, cp, dp;
            solve_one(k, diag, g, cp, dp);
        });
    }

    double peak = 0, tail = 0, res = 0;
    for (const auto& r : results) {
        peak = std::max(peak, r.peak);
        tail = std::max(tail, r.tail);
        res = std::max(res, r.residual);
    }
    SidebandSummary s;
    s.residual_norm = res;
    s.tail_ratio = peak > 0 ? tail / peak : 0.0;
    if (drive.A_b > 0 && opt.enforce_tail && s.tail_ratio > opt.tail_limit)
        throw NoTailDecay("solve_sidebands: tail ratio " + std::to_string(s.tail_ratio) +
                          " above limit at n_max = " + std::to_string(n_max));
    return s;
}

SidebandGreens solve_sidebands(const DerivedParameters& d, const DriveState& drive,
                               const FrequencyGrid& grid, int n_max, const SolveOptions& opt) {
    SidebandGreens out;
    out.n_max = n_max;
    out.grid = grid;
    out.drive = drive;
    std::size_t rows = 2 * static_cast<std::size_t>(std::max(n_max, 1)) + 1;
    out.coefficients.resize(grid.size() * rows);
    auto summary = for_each_sideband_solution(
        d, drive, grid, n_max, opt, [&](std::size_t k, const std::vector<cplx>& g) {
            std::copy(g.begin(), g.end(), out.coefficients.begin() + k * rows);
        });
    out.residual_norm = summary.residual_norm;
    out.tail_ratio = summary.tail_ratio;
    return out;
}

std::vector<double> default_probes(const DerivedParameters& d) {
    double wap = effective_frequency(d, 0.0);
    return {wap, -wap, d.omega_h, -d.omega_h, d.omega_c, -d.omega_c};
}

int auto_truncate(const DerivedParameters& d, const DriveState& drive,
                  const std::vector<double>& probe_omegas) {
    if (probe_omegas.empty())
        throw PreconditionViolated("auto_truncate: probe set must be non-empty");
    const double tail_limit = 1e-8;
    for (int n_max = 32; n_max <= 2048; n_max *= 2) {
        double worst = 0;
        std::vector<cplx> g, cp, dp;
        for (double w : probe_omegas) {
            auto sys = build_diagonals(d, drive, w, n_max);
            RowResult r = solve_row(sys.diag, sys.sub, sys.sup, 1e12, 1e-10, g, cp, dp);
            if (r.peak > 0)
                worst = std::max(worst, r.tail / r.peak);
        }
        if (worst < tail_limit || drive.A_b == 0.0)
            return n_max;
    }
    throw NoTailDecay("auto_truncate: tail invariant unmet at n_max = 2048");
}

}
