#include "qhe/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qhe/errors.hpp"

namespace qhe {

void FrequencyGrid::validate(double omega_s) const {
    if (points.size() < 2)
        throw PreconditionViolated("FrequencyGrid: needs at least two points");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i] > points[i - 1]))
            throw PreconditionViolated("FrequencyGrid: points must be strictly increasing");
    if (symmetric) {
        std::size_t n = points.size();
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(points[i] + points[n - 1 - i]) > 1e-6 * std::abs(points.back()))
                throw PreconditionViolated("FrequencyGrid: symmetric grid is not mirrored about 0");
        if (points.back() < 1.5 * omega_s)
            throw PreconditionViolated("FrequencyGrid: coverage below 1.5 omega_s");
    }
    if (h > 0 && index.size() != points.size())
        throw PreconditionViolated("FrequencyGrid: alignment index size mismatch");
}

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

FrequencyGrid make_integration_grid(const DerivedParameters& d, const GridOptions& opt) {
    int M = opt.points_per_sideband;
    if (M < 8 || M % 8 != 0)
        throw PreconditionViolated("GridOptions: points_per_sideband must be a positive multiple of 8");
    double h = d.omega_b / M;
    double fine_hi = opt.fine_band_hi > 0 ? opt.fine_band_hi : d.omega_s;
    double omega_max = opt.omega_max_factor * d.omega_s;
    if (omega_max < 1.5 * d.omega_s)
        throw PreconditionViolated("GridOptions: omega_max_factor must be at least 1.5");

    long long J = static_cast<long long>(std::ceil(fine_hi / h));
    long long stride = M / 8; // coarse spacing omega_b/8, still on the lattice
    std::vector<long long> idx;
    // negative coarse tail, negative-to-positive fine band, positive coarse tail
    std::vector<long long> tail;
    for (long long m = J + stride; m * h <= omega_max; m += stride)
        tail.push_back(m);
    idx.reserve(2 * (J + tail.size()) + 1);
    for (auto it = tail.rbegin(); it != tail.rend(); ++it)
        idx.push_back(-*it);
    for (long long m = -J; m <= J; ++m)
        idx.push_back(m);
    for (long long m : tail)
        idx.push_back(m);

    FrequencyGrid g;
    g.h = h;
    g.index = std::move(idx);
    g.points.resize(g.index.size());
    for (std::size_t i = 0; i < g.index.size(); ++i)
        g.points[i] = g.index[i] * h;
    g.weights = trapezoid_weights(g.points);
    g.symmetric = true;
    g.validate(d.omega_s);
    return g;
}

FrequencyGrid make_window_grid(const DerivedParameters& d, double phi_b) {
    double omega_max = 2.0 * d.omega_s;
    double base = d.omega_b / 8.0;
    double wap = effective_frequency(d, phi_b);

    std::set<double> pts;
    for (double w = -omega_max; w <= omega_max + 0.5 * base; w += base)
        pts.insert(w);

    auto add_window = [&](double center, double gamma) {
        double half = 10.0 * gamma; // total width 20 gamma_f
        double step = gamma / 10.0;
        for (double w = center - half; w <= center + half + 0.5 * step; w += step) {
            if (std::abs(w) <= omega_max)
                pts.insert(w);
        }
    };
    double gmin = std::min(d.gamma_h, d.gamma_c);
    for (int sgn : {-1, 1}) {
        add_window(sgn * d.omega_h, d.gamma_h);
        add_window(sgn * d.omega_c, d.gamma_c);
        for (int n = -10; n <= 10; ++n)
            add_window(sgn * wap + n * d.omega_b, gmin);
    }

    FrequencyGrid g;
    g.points.assign(pts.begin(), pts.end());
    // drop near-duplicates that would break strict ordering downstream
    std::vector<double> clean;
    clean.reserve(g.points.size());
    for (double w : g.points)
        if (clean.empty() || w - clean.back() > 1e-9 * base)
            clean.push_back(w);
    g.points = std::move(clean);
    g.weights = trapezoid_weights(g.points);
    g.symmetric = false; // refined asymmetrically when phi_b shifts the peak
    return g;
}

cplx filter_response(const DerivedParameters& d, FilterId f, double omega) {
    double alpha_fa = (f == FilterId::hot) ? d.alpha_ha : d.alpha_ca;
    double wf = (f == FilterId::hot) ? d.omega_h : d.omega_c;
    double gf = (f == FilterId::hot) ? d.gamma_h : d.gamma_c;
    cplx den(wf * wf - omega * omega, -2.0 * gf * omega);
    if (omega == 0.0)
        return cplx(0.0, 0.0);
    if (std::abs(den) < 1e-280)
        throw PoleEncountered("filter_response: denominator underflow at omega = " + std::to_string(omega));
    return alpha_fa * omega * omega / den;
}

cplx memory_kernel(const DerivedParameters& d, double omega) {
    double w2 = omega * omega;
    cplx den_h(d.omega_h * d.omega_h - w2, -2.0 * d.gamma_h * omega);
    cplx den_c(d.omega_c * d.omega_c - w2, -2.0 * d.gamma_c * omega);
    cplx ph = d.alpha_ha * w2 / den_h;
    cplx pc = d.alpha_ca * w2 / den_c;
    cplx den = d.omega_a * d.omega_a - w2 * (1.0 + d.alpha_h * ph + d.alpha_c * pc);
    double scale = std::max(d.omega_a * d.omega_a, w2);
    if (std::abs(den) < 1e-12 * scale)
        throw PoleEncountered("memory_kernel: pole at omega = " + std::to_string(omega));
    double wa2 = d.omega_a * d.omega_a;
    return wa2 * wa2 / den;
}

double bath_psd(const DerivedParameters& d, FilterId f, double omega, NoiseModel model) {
    double gf = (f == FilterId::hot) ? d.gamma_h : d.gamma_c;
    double Rf = (f == FilterId::hot) ? d.R_h : d.R_c;
    double T = (f == FilterId::hot) ? d.T_h : d.T_c;
    if (!(T > 0))
        throw PreconditionViolated("bath_psd: temperature must be positive");
    if (model == NoiseModel::classical)
        return 8.0 * gf * gf * Rf * k_B * T;
    double aw = std::abs(omega);
    double x = hbar * aw / (2.0 * k_B * T);
    if (x < 1e-8)
        return 8.0 * gf * gf * Rf * k_B * T; // analytic omega -> 0 limit
    return 4.0 * hbar * aw * gf * gf * Rf / std::tanh(x);
}

double total_psd(const DerivedParameters& d, double omega, NoiseModel model) {
    double w2 = omega * omega;
    cplx den_h(d.omega_h * d.omega_h - w2, -2.0 * d.gamma_h * omega);
    cplx den_c(d.omega_c * d.omega_c - w2, -2.0 * d.gamma_c * omega);
    cplx ph = d.alpha_ha * w2 / den_h;
    cplx pc = d.alpha_ca * w2 / den_c;
    cplx den = d.omega_a * d.omega_a - w2 * (1.0 + d.alpha_h * ph + d.alpha_c * pc);
    double scale = std::max(d.omega_a * d.omega_a, w2);
    double n2 = std::norm(den);
    if (n2 < (1e-12 * scale) * (1e-12 * scale))
        throw PoleEncountered("total_psd: pole at omega = " + std::to_string(omega));
    double Sh = bath_psd(d, FilterId::hot, omega, model);
    double Sc = bath_psd(d, FilterId::cold, omega, model);
    double wa2 = d.omega_a * d.omega_a;
    double pref = (pi / Phi0) * (pi / Phi0); // flux -> dimensionless junction phase
    return pref * wa2 * wa2 * (std::norm(ph) * Sh + std::norm(pc) * Sc) / n2;
}

cplx static_greens(const DerivedParameters& d, double phi_b, double omega) {
    cplx den = d.omega_s * d.omega_s - 2.0 * d.g_s_sq * phi_b - memory_kernel(d, omega);
    if (std::abs(den) < 1e-12 * d.omega_s * d.omega_s)
        throw PoleEncountered("static_greens: pole at omega = " + std::to_string(omega));
    return 1.0 / den;
}

SpectralTables build_spectral_tables(const DerivedParameters& d, const FrequencyGrid& grid,
                                     NoiseModel model) {
    SpectralTables t;
    t.grid = grid;
    std::size_t n = grid.size();
    t.kernel.resize(n);
    t.total.resize(n);
    t.psd_h.resize(n);
    t.psd_c.resize(n);
    t.resp_h.resize(n);
    t.resp_c.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double w = grid.points[i];
        t.kernel[i] = memory_kernel(d, w);
        t.total[i] = total_psd(d, w, model);
        t.psd_h[i] = bath_psd(d, FilterId::hot, w, model);
        t.psd_c[i] = bath_psd(d, FilterId::cold, w, model);
        t.resp_h[i] = filter_response(d, FilterId::hot, w);
        t.resp_c[i] = filter_response(d, FilterId::cold, w);
    }
    return t;
}

}
