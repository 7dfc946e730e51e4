#include "coopdet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "coopdet/error.hpp"
#include "coopdet/format.hpp"

namespace coopdet {

using cd = std::complex<double>;
using Vec = Eigen::VectorXcd;

namespace {

constexpr double kGaussianHalfSpan = 8.0;  // support of a gaussian pulse in sigma0

void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw IntegrationError("dynamics: empty time grid");
    if (!(grid.front() >= 0.0)) throw IntegrationError("dynamics: time grid must start at t >= 0");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] >= grid[k - 1]))
            throw IntegrationError("dynamics: time grid must be nondecreasing");
}

// Envelope value for a step inside [seg_lo, seg_hi]. Flat pulses are constant
// on every segment between breakpoints, so the segment midpoint decides.
struct SegmentEnvelope {
    const PulseSpec* pulse;
    double mid;
    double operator()(double t) const {
        return pulse->shape == PulseSpec::Shape::flat ? pulse->envelope(mid) : pulse->envelope(t);
    }
};

// Walks the merged list of output times and breakpoints, calling
// record(k) after reaching grid[k].
template <class Step, class Record>
void sweep_grid(const PulseSpec& pulse, std::span<const double> grid, Step&& step,
                Record&& record) {
    std::vector<double> stops(grid.begin(), grid.end());
    std::vector<double> marks = pulse.breakpoints();
    marks.push_back(pulse.end_time());
    for (double b : marks)
        if (b > 0.0 && b < grid.back()) stops.push_back(b);
    std::sort(stops.begin(), stops.end());

    double t = 0.0;
    std::size_t next_out = 0;
    for (double stop : stops) {
        if (stop > t) step(t, stop);
        while (next_out < grid.size() && grid[next_out] <= t) record(next_out++);
    }
}

double pulse_max_step(const PulseSpec& pulse) {
    return pulse.shape == PulseSpec::Shape::gaussian ? pulse.width : 0.25 * pulse.width;
}

}  // namespace

// --------------------------------------------------------------------------
// PulseSpec

PulseSpec PulseSpec::gaussian(double omega0, double sigma0, double center) {
    if (!(sigma0 > 0.0)) throw IntegrationError("pulse: sigma0 must be positive");
    return {omega0, Shape::gaussian, sigma0, center};
}

PulseSpec PulseSpec::gaussian(double omega0, double sigma0) {
    return gaussian(omega0, sigma0, kGaussianHalfSpan * sigma0);
}

PulseSpec PulseSpec::flat(double omega0, double start, double window) {
    if (!(window > 0.0)) throw IntegrationError("pulse: window must be positive");
    return {omega0, Shape::flat, window, start};
}

double PulseSpec::envelope(double t) const {
    if (shape == Shape::flat) return (t >= origin && t < origin + width) ? 1.0 / std::sqrt(width) : 0.0;
    if (t < start_time() || t > end_time()) return 0.0;
    const double x = (t - origin) / width;
    // (2 pi sigma^2)^(-1/4) exp(-(t - tc)^2 / (4 sigma^2))
    return std::pow(2.0 * std::numbers::pi * width * width, -0.25) * std::exp(-0.25 * x * x);
}

double PulseSpec::start_time() const {
    return shape == Shape::flat ? origin : origin - kGaussianHalfSpan * width;
}

double PulseSpec::end_time() const {
    return shape == Shape::flat ? origin + width : origin + kGaussianHalfSpan * width;
}

std::vector<double> PulseSpec::breakpoints() const {
    if (shape == Shape::flat) return {origin, origin + width};
    return {};
}

double PulseSpec::temporal_width() const {
    return shape == Shape::flat ? width / std::sqrt(12.0) : width;
}

double square_norm(const PulseSpec& pulse, std::span<const double> grid) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double e = pulse.envelope(0.5 * (grid[k] + grid[k + 1]));
        acc += (grid[k + 1] - grid[k]) * e * e;
    }
    return acc;
}

// --------------------------------------------------------------------------
// TimeTrace

std::vector<double> TimeTrace::total_cum() const {
    std::vector<double> out(times.size(), 0.0);
    for (const auto& ch : cum)
        for (std::size_t k = 0; k < ch.size(); ++k) out[k] += ch[k];
    return out;
}

double TimeTrace::final_total() const {
    double s = 0.0;
    for (const auto& ch : cum)
        if (!ch.empty()) s += ch.back();
    return s;
}

void write_csv(const TimeTrace& trace, std::ostream& os) {
    const int n = trace.num_channels();
    os << "time_fs";
    for (int i = 0; i < n; ++i) os << ",rate_ch" << i;
    for (int i = 0; i < n; ++i) os << ",cum_ch" << i;
    os << '\n';
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        os << format_number(trace.times[k] * kHbarEvFs);
        for (int i = 0; i < n; ++i) os << ',' << format_number(trace.rate[i][k] / kHbarEvFs);
        for (int i = 0; i < n; ++i) os << ',' << format_number(trace.cum[i][k]);
        os << '\n';
    }
}

std::vector<double> default_time_grid(const CompiledModel& model, const PulseSpec& pulse,
                                      std::size_t points, double decay_times) {
    const double decay = model.min_decay();
    const double tail = decay > 0.0 ? decay_times / decay : 0.0;
    const double t_end = pulse.end_time() + tail;
    std::vector<double> grid(std::max<std::size_t>(points, 2));
    for (std::size_t k = 0; k < grid.size(); ++k)
        grid[k] = t_end * static_cast<double>(k) / static_cast<double>(grid.size() - 1);
    return grid;
}

// --------------------------------------------------------------------------
// Density-matrix hierarchy

namespace {

using Sparse = Eigen::SparseMatrix<cd>;

struct HierarchyOperators {
    Eigen::Index dim = 0;
    Eigen::MatrixXcd h_eff;        // H - (i/2) sum O^+ O
    std::vector<Sparse> jumps;     // Y_j, X_i, L
    Sparse lower;                  // L
    Sparse raise;                  // L^+
    std::vector<std::vector<Eigen::Index>> channel_dark;   // C_j indices per channel
    std::vector<std::vector<Eigen::Index>> channel_bright; // 1_j indices per channel
};

HierarchyOperators build_operators(const CompiledModel& model, double omega0) {
    const auto m = static_cast<Eigen::Index>(model.size());
    HierarchyOperators ops;
    ops.dim = 1 + 2 * m;
    const auto excited = [](Eigen::Index j) { return 1 + j; };
    const auto dark = [m](Eigen::Index j) { return 1 + m + j; };

    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(ops.dim, ops.dim);
    for (Eigen::Index j = 0; j < m; ++j) h(excited(j), excited(j)) = model.elements[j].energy - omega0;

    // Y_j = Gamma_j |C_j><1_j|
    for (Eigen::Index j = 0; j < m; ++j) {
        const double rate = model.elements[j].decay_sq;
        if (rate <= 0.0) continue;
        Sparse y(ops.dim, ops.dim);
        y.insert(dark(j), excited(j)) = std::sqrt(rate);
        ops.jumps.push_back(std::move(y));
    }
    // X_i = chi sum_{j in i} |C_j><C_j|
    ops.channel_dark.resize(static_cast<std::size_t>(model.num_channels));
    ops.channel_bright.resize(static_cast<std::size_t>(model.num_channels));
    for (Eigen::Index j = 0; j < m; ++j) {
        const int ch = model.elements[j].channel;
        if (ch == kNoChannel) continue;
        ops.channel_dark[static_cast<std::size_t>(ch)].push_back(dark(j));
        ops.channel_bright[static_cast<std::size_t>(ch)].push_back(excited(j));
    }
    if (model.chi > 0.0) {
        for (const auto& members : ops.channel_dark) {
            if (members.empty()) continue;
            Sparse x(ops.dim, ops.dim);
            for (auto idx : members) x.insert(idx, idx) = model.chi;
            ops.jumps.push_back(std::move(x));
        }
    }
    // L = sum_j sqrt(w_j) gamma |0><1_j|
    ops.lower.resize(ops.dim, ops.dim);
    const double gamma = std::sqrt(model.gamma_sq);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double c = gamma * std::sqrt(model.elements[j].weight);
        if (c != 0.0) ops.lower.insert(0, excited(j)) = c;
    }
    ops.lower.makeCompressed();
    ops.raise = ops.lower.adjoint();
    ops.jumps.push_back(ops.lower);

    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(ops.dim, ops.dim);
    for (const auto& o : ops.jumps) k += Eigen::MatrixXcd(o.adjoint() * o);
    ops.h_eff = h - cd(0.0, 0.5) * k;
    return ops;
}

// V(r) = -i (H_eff r - r H_eff^+) + sum_k O_k r O_k^+
void apply_lindblad(const HierarchyOperators& ops, const Eigen::MatrixXcd& r,
                    Eigen::Ref<Eigen::MatrixXcd> out) {
    out.noalias() = cd(0.0, -1.0) * (ops.h_eff * r);
    out.noalias() += cd(0.0, 1.0) * (r * ops.h_eff.adjoint());
    for (const auto& o : ops.jumps) {
        const Eigen::MatrixXcd left = o * r;
        out.noalias() += left * o.adjoint();
    }
}

void check_density_matrix(const Eigen::MatrixXcd& rho, double t, const DynamicsOptions& opts) {
    std::ostringstream os;
    os.precision(10);
    const double trace_err = std::abs(rho.trace() - cd(1.0, 0.0));
    if (trace_err > opts.trace_tol) {
        os << "hierarchy: trace drifted by " << trace_err << " at t = " << t;
        throw IntegrationError(os.str());
    }
    const double herm_err = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm_err > opts.positivity_tol) {
        os << "hierarchy: rho lost Hermiticity (" << herm_err << ") at t = " << t;
        throw IntegrationError(os.str());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (rho + rho.adjoint()),
                                                        Eigen::EigenvaluesOnly);
    const double lowest = eig.eigenvalues().minCoeff();
    if (lowest < -opts.positivity_tol) {
        os << "hierarchy: negative eigenvalue " << lowest << " at t = " << t;
        throw IntegrationError(os.str());
    }
}

TimeTrace empty_trace(const CompiledModel& model, std::span<const double> grid) {
    TimeTrace trace;
    trace.times.assign(grid.begin(), grid.end());
    trace.rate.assign(static_cast<std::size_t>(model.num_channels), std::vector<double>(grid.size(), 0.0));
    trace.cum.assign(static_cast<std::size_t>(model.num_channels), std::vector<double>(grid.size(), 0.0));
    return trace;
}

}  // namespace

TimeTrace evolve_fock_hierarchy(const CompiledModel& model, const PulseSpec& pulse,
                                std::span<const double> grid, const DynamicsOptions& opts,
                                HierarchyState* final_state) {
    check_grid(grid);
    const HierarchyOperators ops = build_operators(model, pulse.omega0);
    const Eigen::Index d = ops.dim, d2 = d * d;

    Eigen::MatrixXcd rho0 = Eigen::MatrixXcd::Zero(d, d);
    rho0(0, 0) = 1.0;
    const Eigen::MatrixXcd source = ops.lower * rho0 - rho0 * ops.lower;  // [L, rho(t0)]

    Vec y = Vec::Zero(2 * d2);
    Eigen::Map<Eigen::MatrixXcd>(y.data(), d, d) = rho0;

    TimeTrace trace = empty_trace(model, grid);
    DormandPrince5 solver(opts.integrator);
    solver.set_max_step(std::min(opts.integrator.h_max, pulse_max_step(pulse)));

    Eigen::MatrixXcd scratch(d, d);
    auto rhs_for = [&](SegmentEnvelope env) {
        return [&, env](double t, const Vec& state, Vec& dstate) {
            Eigen::Map<const Eigen::MatrixXcd> rho(state.data(), d, d);
            Eigen::Map<const Eigen::MatrixXcd> aux(state.data() + d2, d, d);
            Eigen::Map<Eigen::MatrixXcd> drho(dstate.data(), d, d);
            Eigen::Map<Eigen::MatrixXcd> daux(dstate.data() + d2, d, d);
            apply_lindblad(ops, rho, drho);
            apply_lindblad(ops, aux, daux);
            const double e = env(t);
            if (e != 0.0) {
                // e [aux, L^+] + e [L, aux^+] = C + C^+ with C = e [aux, L^+]
                scratch.noalias() = aux * ops.raise;
                scratch.noalias() -= ops.raise * aux;
                drho += e * scratch;
                drho += e * scratch.adjoint();
                daux += e * source;
            }
        };
    };

    sweep_grid(
        pulse, grid,
        [&](double& t, double stop) {
            if (t >= pulse.end_time()) solver.set_max_step(opts.integrator.h_max);
            solver.advance(rhs_for({&pulse, 0.5 * (t + stop)}), t, stop, y);
        },
        [&](std::size_t k) {
            Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), d, d);
            check_density_matrix(rho, grid[k], opts);
            for (int ch = 0; ch < model.num_channels; ++ch) {
                double cum = 0.0, rate = 0.0;
                for (auto idx : ops.channel_dark[static_cast<std::size_t>(ch)]) cum += rho(idx, idx).real();
                const auto& bright = ops.channel_bright[static_cast<std::size_t>(ch)];
                for (std::size_t n = 0; n < bright.size(); ++n) {
                    const auto j = bright[n] - 1;
                    rate += model.elements[static_cast<std::size_t>(j)].decay_sq * rho(bright[n], bright[n]).real();
                }
                trace.cum[static_cast<std::size_t>(ch)][k] = cum;
                trace.rate[static_cast<std::size_t>(ch)][k] = rate;
            }
        });

    if (final_state) {
        final_state->rho = Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d);
        final_state->varrho = Eigen::Map<const Eigen::MatrixXcd>(y.data() + d2, d, d);
    }
    return trace;
}

// --------------------------------------------------------------------------
// Single-excitation amplitudes

namespace {

struct AmplitudeSystem {
    Eigen::VectorXcd diag;    // -i (E_j - w0) - Gamma_j^2 / 2
    Eigen::VectorXd weight;
    Eigen::VectorXd emission; // Gamma_j^2 w_j
    std::vector<int> channel;
    double half_gamma_sq = 0.0;
    double gamma = 0.0;
    Eigen::Index m = 0;

    AmplitudeSystem(const CompiledModel& model, double omega0) {
        m = static_cast<Eigen::Index>(model.size());
        diag.resize(m);
        weight.resize(m);
        emission.resize(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto& e = model.elements[static_cast<std::size_t>(j)];
            diag[j] = cd(-0.5 * e.decay_sq, -(e.energy - omega0));
            weight[j] = e.weight;
            emission[j] = e.decay_sq * e.weight;
            channel.push_back(e.channel);
        }
        half_gamma_sq = 0.5 * model.gamma_sq;
        gamma = std::sqrt(model.gamma_sq);
    }

    // Writes dc/dt into dc; the caller handles any accumulators.
    void amplitudes(double e, const cd* c, cd* dc) const {
        cd field = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) field += weight[j] * c[j];
        const cd drive = half_gamma_sq * field + gamma * e;
        for (Eigen::Index j = 0; j < m; ++j) dc[j] = diag[j] * c[j] - drive;
    }
};

}  // namespace

TimeTrace evolve_single_excitation(const CompiledModel& model, const PulseSpec& pulse,
                                   std::span<const double> grid, const DynamicsOptions& opts) {
    check_grid(grid);
    const AmplitudeSystem sys(model, pulse.omega0);
    const Eigen::Index m = sys.m;
    const int n = model.num_channels;

    Vec y = Vec::Zero(m + n);  // amplitudes, then cumulative detection per channel
    TimeTrace trace = empty_trace(model, grid);
    DormandPrince5 solver(opts.integrator);
    solver.set_max_step(std::min(opts.integrator.h_max, pulse_max_step(pulse)));

    auto rhs_for = [&](SegmentEnvelope env) {
        return [&, env](double t, const Vec& state, Vec& dstate) {
            sys.amplitudes(env(t), state.data(), dstate.data());
            dstate.tail(n).setZero();
            for (Eigen::Index j = 0; j < m; ++j)
                if (sys.channel[static_cast<std::size_t>(j)] != kNoChannel)
                    dstate[m + sys.channel[static_cast<std::size_t>(j)]] += sys.emission[j] * std::norm(state[j]);
        };
    };

    sweep_grid(
        pulse, grid,
        [&](double& t, double stop) {
            if (t >= pulse.end_time()) solver.set_max_step(opts.integrator.h_max);
            solver.advance(rhs_for({&pulse, 0.5 * (t + stop)}), t, stop, y);
        },
        [&](std::size_t k) {
            for (int ch = 0; ch < n; ++ch) trace.cum[static_cast<std::size_t>(ch)][k] = y[m + ch].real();
            for (Eigen::Index j = 0; j < m; ++j)
                if (sys.channel[static_cast<std::size_t>(j)] != kNoChannel)
                    trace.rate[static_cast<std::size_t>(sys.channel[static_cast<std::size_t>(j)])][k] +=
                        sys.emission[j] * std::norm(y[j]);
        });
    return trace;
}

DetectionMoments detection_time_moments(const CompiledModel& model, const PulseSpec& pulse,
                                        const DynamicsOptions& opts) {
    const AmplitudeSystem sys(model, pulse.omega0);
    const Eigen::Index m = sys.m;
    const int n = model.num_channels;
    const double t_ref = pulse.origin;

    // amplitudes, then (m0, m1, m2) per channel about t_ref
    Vec y = Vec::Zero(m + 3 * n);
    DormandPrince5 solver(opts.integrator);
    solver.set_max_step(std::min(opts.integrator.h_max, pulse_max_step(pulse)));

    auto rhs_for = [&](SegmentEnvelope env) {
        return [&, env](double t, const Vec& state, Vec& dstate) {
            sys.amplitudes(env(t), state.data(), dstate.data());
            dstate.tail(3 * n).setZero();
            const double s = t - t_ref;
            for (Eigen::Index j = 0; j < m; ++j) {
                const int ch = sys.channel[static_cast<std::size_t>(j)];
                if (ch == kNoChannel) continue;
                const double r = sys.emission[j] * std::norm(state[j]);
                dstate[m + 3 * ch] += r;
                dstate[m + 3 * ch + 1] += r * s;
                dstate[m + 3 * ch + 2] += r * s * s;
            }
        };
    };

    double t = 0.0;
    std::vector<double> stops = pulse.breakpoints();
    stops.push_back(pulse.end_time());
    std::sort(stops.begin(), stops.end());
    for (double stop : stops)
        if (stop > t) solver.advance(rhs_for({&pulse, 0.5 * (t + stop)}), t, stop, y);

    // Drain: the residual excitation bounds every moment still to come.
    solver.set_max_step(opts.integrator.h_max);
    const double decay = model.min_decay();
    const double chunk = decay > 0.0 ? 2.0 / decay : std::max(1.0, pulse.width);
    auto excitation = [&] {
        double x = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) x += sys.weight[j] * std::norm(y[j]);
        return x;
    };
    auto detected = [&] {
        double p = 0.0;
        for (int ch = 0; ch < n; ++ch) p += y[m + 3 * ch].real();
        return p;
    };
    constexpr double kTailTol = 1e-14;
    constexpr int kMaxChunks = 100000;
    int chunks = 0;
    while (excitation() > kTailTol * std::max(detected(), 1e-300) && excitation() > 1e-300) {
        if (++chunks > kMaxChunks)
            throw IntegrationError("detection_time_moments: excitation did not drain");
        solver.advance(rhs_for({&pulse, t + 0.5 * chunk}), t, t + chunk, y);
    }

    DetectionMoments out;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int ch = 0; ch < n; ++ch) {
        const double a = y[m + 3 * ch].real(), b = y[m + 3 * ch + 1].real(), c = y[m + 3 * ch + 2].real();
        out.channel_probability.push_back(a);
        out.channel_mean.push_back(a > 0.0 ? b / a : 0.0);
        out.channel_variance.push_back(a > 0.0 ? c / a - (b / a) * (b / a) : 0.0);
        m0 += a;
        m1 += b;
        m2 += c;
    }
    out.probability = m0;
    if (m0 > 0.0) {
        out.mean = m1 / m0;
        out.variance = m2 / m0 - out.mean * out.mean;
    }
    return out;
}

}  // namespace coopdet
