#include "qhe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <fftw3.h>

#include "qhe/errors.hpp"

namespace qhe {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

// FFTW planning is not thread safe; execution is.
std::mutex fftw_mutex;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double max_time_step(const DerivedParameters& d) {
    return 2.0 * pi / (20.0 * d.omega_s);
}

void check_traces(const NoiseTrace& hot, const NoiseTrace& cold, double t_end) {
    if (hot.dt <= 0 || cold.dt <= 0)
        throw PreconditionViolated("simulate: trace dt must be positive");
    if (std::abs(hot.dt - cold.dt) > 1e-12 * hot.dt)
        throw PreconditionViolated("simulate: hot and cold traces must share dt");
    if (t_end <= 0)
        throw PreconditionViolated("simulate: t_end must be positive");
    std::size_t need = static_cast<std::size_t>(std::ceil(t_end / hot.dt));
    if (hot.samples.size() < need || cold.samples.size() < need)
        throw PreconditionViolated("simulate: traces do not cover [0, t_end]");
}

Eigen::Matrix3d mass_matrix(const DerivedParameters& d) {
    Eigen::Matrix3d M;
    M << 1.0, d.alpha_ha, d.alpha_ca,
        d.alpha_h, 1.0, 0.0,
        d.alpha_c, 0.0, 1.0;
    return M;
}

// First-order form of the coupled circuit equations with the SQUID coefficient
// frozen at the given phi_b. The state is (phi, v/omega_s): raw (phi, phi_dot)
// mixes scales by ~20 decades and Eigen's exp() and eigensolver have no
// balancing step, so they lose the propagator entirely on the raw form.
// Positions are untouched by the scaling and they are all we ever measure.
Mat6 system_matrix(const DerivedParameters& d, const Eigen::Matrix3d& Minv, double phi_b) {
    double s = junction_participation(d, phi_b);
    Eigen::Matrix3d K = Eigen::Vector3d(d.omega_a * d.omega_a * (1.0 - s),
                                        d.omega_h * d.omega_h,
                                        d.omega_c * d.omega_c)
                            .asDiagonal();
    Eigen::Matrix3d D = Eigen::Vector3d(0.0, 2.0 * d.gamma_h, 2.0 * d.gamma_c).asDiagonal();
    Mat6 A = Mat6::Zero();
    A.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity() * d.omega_s;
    A.block<3, 3>(3, 0) = -Minv * K / d.omega_s;
    A.block<3, 3>(3, 3) = -Minv * D;
    return A;
}

// Exact one-step propagator pair: x(t+dt) = E x(t) + J f with f constant over
// the step. Both come out of one augmented matrix exponential.
void step_operators(const Mat6& A, double dt, Mat6& E, Mat6& J) {
    Eigen::Matrix<double, 12, 12> aug = Eigen::Matrix<double, 12, 12>::Zero();
    aug.block<6, 6>(0, 0) = A * dt;
    aug.block<6, 6>(0, 6) = Eigen::Matrix<double, 6, 6>::Identity() * dt;
    Eigen::Matrix<double, 12, 12> ex = aug.exp();
    E = ex.block<6, 6>(0, 0);
    J = ex.block<6, 6>(0, 6);
}

Mat62 force_columns(const DerivedParameters& d, const Eigen::Matrix3d& Minv) {
    // bath forces enter the filter acceleration rows, rescaled like the state
    Mat62 B = Mat62::Zero();
    B.block<3, 1>(3, 0) = Minv.col(1) / d.omega_s;
    B.block<3, 1>(3, 1) = Minv.col(2) / d.omega_s;
    return B;
}

}

double oracle_time_step(const DerivedParameters& d, int steps_per_period) {
    if (steps_per_period < 2)
        throw PreconditionViolated("oracle_time_step: steps_per_period must be >= 2");
    double dt = d.tau_b / steps_per_period;
    if (dt > max_time_step(d))
        throw PreconditionViolated("oracle_time_step: step does not resolve omega_s; "
                                   "increase steps_per_period");
    return dt;
}

NoiseTrace synthesize_noise(const DerivedParameters& d, FilterId f, double dt,
                            std::size_t n_samples, std::uint64_t seed, NoiseModel model) {
    if (dt <= 0)
        throw PreconditionViolated("synthesize_noise: dt must be positive");
    if (dt > max_time_step(d) * (1.0 + 1e-12))
        throw PreconditionViolated("synthesize_noise: dt must satisfy dt <= 2*pi/(20*omega_s)");
    if (n_samples < 4 || (n_samples & (n_samples - 1)) != 0)
        throw PreconditionViolated("synthesize_noise: n_samples must be a power of two >= 4");

    std::size_t N = n_samples, H = N / 2;
    double pref = (pi / Phi0) * (pi / Phi0);
    double dw = 2.0 * pi / (static_cast<double>(N) * dt);

    std::uint64_t stream = splitmix64(seed ^ (f == FilterId::hot ? 0x686f74ULL : 0x636f6c64ULL));
    std::mt19937_64 rng(stream);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::complex<double>> X(H + 1);
    for (std::size_t k = 0; k <= H; ++k) {
        double S = pref * bath_psd(d, f, static_cast<double>(k) * dw, model);
        if (k == 0 || k == H) {
            X[k] = std::sqrt(static_cast<double>(N) * S / dt) * gauss(rng);
        } else {
            double amp = std::sqrt(static_cast<double>(N) * S / (2.0 * dt));
            double g = gauss(rng), gp = gauss(rng);
            X[k] = amp * std::complex<double>(g, gp);
        }
    }

    NoiseTrace trace;
    trace.dt = dt;
    trace.seed = seed;
    trace.psd_model = model;
    trace.filter = f;
    trace.samples.resize(N);
    {
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(fftw_mutex);
            plan = fftw_plan_dft_c2r_1d(static_cast<int>(N),
                                        reinterpret_cast<fftw_complex*>(X.data()),
                                        trace.samples.data(), FFTW_ESTIMATE);
        }
        if (!plan)
            throw NumericalError("synthesize_noise: fftw plan creation failed");
        fftw_execute(plan);
        {
            std::lock_guard<std::mutex> lock(fftw_mutex);
            fftw_destroy_plan(plan);
        }
    }
    double inv = 1.0 / static_cast<double>(N);
    for (double& v : trace.samples)
        v *= inv;
    return trace;
}

Periodogram welch_psd(const std::vector<double>& x, double dt, std::size_t segment) {
    if (segment < 8 || (segment & (segment - 1)) != 0)
        throw PreconditionViolated("welch_psd: segment must be a power of two >= 8");
    if (x.size() < segment)
        throw PreconditionViolated("welch_psd: trace shorter than one segment");
    std::size_t L = segment, hop = L / 2;
    std::size_t nseg = (x.size() - L) / hop + 1;

    std::vector<double> window(L);
    double u = 0;
    for (std::size_t j = 0; j < L; ++j) {
        window[j] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(j) / static_cast<double>(L)));
        u += window[j] * window[j];
    }
    u /= static_cast<double>(L);

    std::vector<double> in(L);
    std::vector<std::complex<double>> out(L / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(L), in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    if (!plan)
        throw NumericalError("welch_psd: fftw plan creation failed");

    Periodogram pg;
    pg.omega.resize(L / 2 + 1);
    pg.psd.assign(L / 2 + 1, 0.0);
    for (std::size_t k = 0; k <= L / 2; ++k)
        pg.omega[k] = 2.0 * pi * static_cast<double>(k) / (static_cast<double>(L) * dt);

    for (std::size_t s = 0; s < nseg; ++s) {
        const double* seg = x.data() + s * hop;
        for (std::size_t j = 0; j < L; ++j)
            in[j] = seg[j] * window[j];
        fftw_execute_dft_r2c(plan, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
        for (std::size_t k = 0; k <= L / 2; ++k)
            pg.psd[k] += std::norm(out[k]);
    }
    {
        std::lock_guard<std::mutex> lock(fftw_mutex);
        fftw_destroy_plan(plan);
    }
    double scale = dt / (static_cast<double>(L) * u * static_cast<double>(nseg));
    for (double& v : pg.psd)
        v *= scale;
    return pg;
}

LinearTrajectory simulate_linear(const DerivedParameters& d, const NoiseTrace& hot,
                                 const NoiseTrace& cold, double phi_b_fixed, double t_end,
                                 std::size_t stride) {
    check_traces(hot, cold, t_end);
    if (stride < 1)
        throw PreconditionViolated("simulate_linear: stride must be >= 1");
    double dt = hot.dt;
    std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt));
    steps = std::min(steps, std::min(hot.samples.size(), cold.samples.size()));

    Eigen::Matrix3d M = mass_matrix(d);
    Eigen::Matrix3d Minv = M.inverse();
    Mat6 A = system_matrix(d, Minv, phi_b_fixed);

    Eigen::EigenSolver<Mat6> es(A, false);
    double max_re = es.eigenvalues().real().maxCoeff();
    if (max_re > 1e-6 * d.omega_b)
        throw PreconditionViolated("simulate_linear: system has an undamped or growing mode "
                                   "at this phi_b");

    Mat6 E, J;
    step_operators(A, dt, E, J);
    Mat62 F = J * force_columns(d, Minv);
    double s = junction_participation(d, phi_b_fixed);

    double gmin = std::min(d.gamma_h, d.gamma_c);
    if (gmin <= 0)
        throw PreconditionViolated("simulate_linear: filter damping must be positive");
    std::size_t discard = static_cast<std::size_t>(std::ceil(10.0 / gmin / dt));

    LinearTrajectory traj;
    traj.dt = dt * static_cast<double>(stride);
    traj.stride = stride;
    traj.discarded = std::min(discard, steps);
    std::size_t kept = steps / stride;
    traj.phi_a.reserve(kept);
    traj.phi_s.reserve(kept);
    traj.phi_h.reserve(kept);
    traj.phi_c.reserve(kept);

    Vec6 x = Vec6::Zero();
    double sum = 0, sumsq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < steps; ++i) {
        x = E * x + F * Eigen::Vector2d(hot.samples[i], cold.samples[i]);
        double phi_s = s * x[0];
        if (i >= discard) {
            sum += phi_s;
            sumsq += phi_s * phi_s;
            ++count;
        }
        if (i % stride == 0) {
            traj.phi_a.push_back(x[0]);
            traj.phi_s.push_back(phi_s);
            traj.phi_h.push_back(x[1]);
            traj.phi_c.push_back(x[2]);
        }
        if ((i & 0xffff) == 0xffff && !x.allFinite())
            throw StiffnessDetected("simulate_linear: state diverged");
    }
    if (!x.allFinite())
        throw StiffnessDetected("simulate_linear: state diverged");
    if (count > 1) {
        double mean = sum / static_cast<double>(count);
        traj.phi_s_variance = sumsq / static_cast<double>(count) - mean * mean;
    }
    return traj;
}

DrivenHarmonics simulate_driven(const DerivedParameters& d, const NoiseTrace& hot,
                                const NoiseTrace& cold, double A_b, double theta_b,
                                double t_end) {
    check_traces(hot, cold, t_end);
    if (A_b < 0)
        throw PreconditionViolated("simulate_driven: A_b must be nonnegative");
    double dt = hot.dt;
    double spp_real = d.tau_b / dt;
    long long spp = std::llround(spp_real);
    if (spp < 16 || std::abs(spp_real - static_cast<double>(spp)) > 1e-9 * spp_real)
        throw PreconditionViolated("simulate_driven: trace dt must divide the pump period; "
                                   "use oracle_time_step()");
    std::size_t nper = static_cast<std::size_t>(t_end / d.tau_b + 1e-9);
    const std::size_t discard_periods = 8;
    if (nper < discard_periods + 2)
        throw PreconditionViolated("simulate_driven: t_end must cover at least 10 pump periods");
    std::size_t steps = nper * static_cast<std::size_t>(spp);
    if (hot.samples.size() < steps || cold.samples.size() < steps)
        throw PreconditionViolated("simulate_driven: traces do not cover the requested periods");

    Eigen::Matrix3d M = mass_matrix(d);
    Eigen::Matrix3d Minv = M.inverse();
    Mat62 B = force_columns(d, Minv);

    std::size_t P = static_cast<std::size_t>(spp);
    std::vector<Mat6> E(P);
    std::vector<Mat62> F(P);
    std::vector<double> s_sample(P);       // participation at sample times
    std::vector<std::complex<double>> rot(P);  // drive-frame demodulator at sample times
    for (std::size_t j = 0; j < P; ++j) {
        double t_mid = (static_cast<double>(j) + 0.5) * dt;
        double phib = 2.0 * A_b * std::cos(d.omega_b * t_mid + theta_b);
        Mat6 A = system_matrix(d, Minv, phib);
        Mat6 Jop;
        step_operators(A, dt, E[j], Jop);
        F[j] = Jop * B;
        double t_smp = static_cast<double>(j + 1) * dt;
        double phase = d.omega_b * t_smp + theta_b;
        s_sample[j] = junction_participation(d, 2.0 * A_b * std::cos(phase));
        rot[j] = std::polar(1.0, phase);
    }

    Vec6 x = Vec6::Zero();
    std::complex<double> c1(0.0, 0.0);
    double c0 = 0;
    std::size_t count = 0, i = 0;
    for (std::size_t per = 0; per < nper; ++per) {
        bool measure = per >= discard_periods;
        for (std::size_t j = 0; j < P; ++j, ++i) {
            x = E[j] * x + F[j] * Eigen::Vector2d(hot.samples[i], cold.samples[i]);
            if (measure) {
                double phi_s = s_sample[j] * x[0];
                double w = phi_s * phi_s;
                c0 += w;
                c1 += w * rot[j];
                ++count;
            }
        }
        if (!x.allFinite())
            throw StiffnessDetected("simulate_driven: state diverged");
    }

    DrivenHarmonics h;
    h.periods_used = nper - discard_periods;
    if (count > 0) {
        h.mean = c0 / static_cast<double>(count);
        h.first_harmonic = c1 / static_cast<double>(count);
    }
    return h;
}

}
