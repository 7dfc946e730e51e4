#include "coopdet/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "coopdet/error.hpp"
#include "coopdet/parallel.hpp"
#include "coopdet/steady_state.hpp"

namespace coopdet {

using cd = std::complex<double>;

std::vector<double> evaluation_grid(const DetectorSpec& spec, int points_per_spacing) {
    if (points_per_spacing < 1) throw std::invalid_argument("evaluation_grid: points_per_spacing < 1");
    const auto centers = spec.bin_centers();
    const double width = spec.band_hi - spec.band_lo;
    const double spacing = centers.size() > 1
                               ? (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1)
                               : width;
    const double step = (spacing > 0.0 ? spacing : width) / points_per_spacing;
    const auto n = static_cast<std::size_t>(std::ceil(width / step - 1e-9));

    std::vector<double> grid;
    for (std::size_t k = 0; k <= n; ++k)
        grid.push_back(std::min(spec.band_hi, spec.band_lo + width * static_cast<double>(k) / static_cast<double>(n)));
    for (std::size_t i = 0; i < centers.size(); ++i) {
        grid.push_back(centers[i]);
        if (i + 1 < centers.size()) grid.push_back(0.5 * (centers[i] + centers[i + 1]));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [&](double a, double b) { return std::abs(a - b) <= 1e-12 * width; }),
               grid.end());
    return grid;
}

double worst_case_inefficiency(const CompiledModel& model, std::span<const double> omega_grid) {
    if (omega_grid.empty()) throw std::invalid_argument("worst_case_inefficiency: empty grid");
    double worst = 0.0;
    for (const auto& r : channel_probabilities(model, omega_grid, SolveMethod::rank1))
        worst = std::max(worst, 1.0 - r.total);
    return worst;
}

namespace {

// Per grid point, per design group: s = sum frac_j / B_j and q = sum frac_j Gamma_j^2 / |B_j|^2,
// so that with x_g = n_g gamma^2, D = 1 + sum_g x_g s_g / 2 and P = sum_g x_g q_g / |D|^2.
struct GroupBasis {
    std::size_t points = 0;
    std::size_t groups = 0;
    std::vector<cd> s;       // [k * groups + g]
    std::vector<double> q;
};

GroupBasis build_basis(const CompiledModel& model, std::span<const double> grid) {
    GroupBasis basis;
    basis.points = grid.size();
    basis.groups = static_cast<std::size_t>(model.num_groups);
    basis.s.assign(basis.points * basis.groups, 0.0);
    basis.q.assign(basis.points * basis.groups, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (const auto& e : model.elements) {
            const cd b(0.5 * e.decay_sq, grid[k] - e.energy);
            if (b == 0.0) throw NumericalError("optimize_weights: grid point on an undamped element", grid[k]);
            const std::size_t idx = k * basis.groups + static_cast<std::size_t>(e.group);
            basis.s[idx] += e.group_fraction / b;
            if (e.channel != kNoChannel) basis.q[idx] += e.group_fraction * e.decay_sq / std::norm(b);
        }
    }
    return basis;
}

struct DesignProblem {
    const GroupBasis* basis = nullptr;
    std::vector<std::size_t> free_groups;   // optimized groups, in variable order
    std::vector<double> fixed_x;            // x_g for every group (used when not free)
    double scale = 1.0;                     // x = scale * u

    // Inefficiency 1 - P_k and its gradient in u.
    double point(std::size_t k, const Eigen::VectorXd& u, double* grad) const {
        const std::size_t ng = basis->groups;
        std::vector<double> x = fixed_x;
        for (std::size_t v = 0; v < free_groups.size(); ++v) x[free_groups[v]] = scale * u[static_cast<Eigen::Index>(v)];
        cd d = 1.0;
        double qsum = 0.0;
        for (std::size_t g = 0; g < ng; ++g) {
            d += 0.5 * x[g] * basis->s[k * ng + g];
            qsum += x[g] * basis->q[k * ng + g];
        }
        const double dd = std::norm(d);
        if (grad) {
            for (std::size_t v = 0; v < free_groups.size(); ++v) {
                const std::size_t g = free_groups[v];
                const double dp = basis->q[k * ng + g] / dd -
                                  qsum / (dd * dd) * (std::conj(d) * basis->s[k * ng + g]).real();
                grad[v] = -scale * dp;
            }
        }
        return 1.0 - qsum / dd;
    }

    double smoothed(const Eigen::VectorXd& u, Eigen::VectorXd& grad, double temperature) const {
        const std::size_t nv = free_groups.size();
        struct Sample {
            double e;
            std::vector<double> g;
        };
        const auto samples = parallel_map(basis->points, [&](std::size_t k) {
            Sample s{0.0, std::vector<double>(nv)};
            s.e = point(k, u, s.g.data());
            return s;
        });
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& s : samples) top = std::max(top, s.e);
        double z = 0.0;
        grad.setZero(static_cast<Eigen::Index>(nv));
        for (const auto& s : samples) {
            const double w = std::exp((s.e - top) / temperature);
            z += w;
            for (std::size_t v = 0; v < nv; ++v) grad[static_cast<Eigen::Index>(v)] += w * s.g[v];
        }
        grad /= z;
        return top + temperature * std::log(z);
    }
};

double reference_rate(const DetectorSpec& spec) {
    const double g = spec.min_decay();
    if (!(g > 0.0)) throw SpecError("bins", "optimization needs a positive gamma_cap_sq");
    return g;
}

DetectorSpec with_weights(DetectorSpec spec, const DesignProblem& prob, const Eigen::VectorXd& u,
                          double gamma_sq) {
    const std::size_t nbins = spec.bins.size();
    for (std::size_t v = 0; v < prob.free_groups.size(); ++v) {
        const std::size_t g = prob.free_groups[v];
        const double n = prob.scale * u[static_cast<Eigen::Index>(v)] / gamma_sq;
        if (g < nbins)
            spec.bins[g].weight = n;
        else
            spec.endcaps[g - nbins].weight = n;
    }
    return spec;
}

struct RunOutcome {
    Eigen::VectorXd u;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

RunOutcome anneal(const DesignProblem& prob, Eigen::VectorXd u, const OptimizeOptions& opts) {
    const auto nv = static_cast<Eigen::Index>(prob.free_groups.size());
    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(nv);
    const Eigen::VectorXd hi = Eigen::VectorXd::Constant(nv, opts.upper_bound);
    RunOutcome out;
    out.converged = true;
    for (double temperature : opts.temperatures) {
        const Objective fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
            return prob.smoothed(x, g, temperature);
        };
        const auto res = minimize_lbfgsb(fn, u, lo, hi, opts.lbfgsb);
        u = res.x;
        out.iterations += res.iterations;
        out.converged = res.converged;
        out.history.insert(out.history.end(), res.history.begin(), res.history.end());
    }
    out.u = std::move(u);
    return out;
}

}  // namespace

OptimizationResult optimize_weights(const DetectorSpec& spec, std::span<const double> omega_grid,
                                    const OptimizeOptions& opts) {
    if (omega_grid.empty()) throw std::invalid_argument("optimize_weights: empty grid");
    if (opts.temperatures.empty()) throw std::invalid_argument("optimize_weights: no temperatures");
    if (!(spec.gamma_sq > 0.0)) throw SpecError("gamma_sq", "optimization needs gamma_sq > 0");

    const double scale = reference_rate(spec);
    const CompiledModel model = compile_detector(spec);
    const GroupBasis basis = build_basis(model, omega_grid);

    DesignProblem prob;
    prob.basis = &basis;
    prob.scale = scale;
    const std::size_t nbins = spec.bins.size();
    prob.fixed_x.assign(basis.groups, 0.0);
    for (std::size_t g = 0; g < basis.groups; ++g) {
        const double n = g < nbins ? spec.bins[g].weight : spec.endcaps[g - nbins].weight;
        if (g < nbins || opts.optimize_endcaps)
            prob.free_groups.push_back(g);
        else
            prob.fixed_x[g] = n * spec.gamma_sq;
    }

    const auto nv = static_cast<Eigen::Index>(prob.free_groups.size());
    const Eigen::VectorXd start = Eigen::VectorXd::Constant(nv, 1.0 / static_cast<double>(nbins));

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);

    OptimizationResult best;
    best.omega_grid.assign(omega_grid.begin(), omega_grid.end());
    bool have_best = false;
    int total_iterations = 0;
    for (int attempt = 0; attempt <= std::max(0, opts.restarts); ++attempt) {
        Eigen::VectorXd u0 = start;
        if (attempt > 0)
            for (Eigen::Index v = 0; v < nv; ++v) u0[v] *= std::exp(jitter(rng));
        RunOutcome run = anneal(prob, u0, opts);
        total_iterations += run.iterations;

        DetectorSpec designed = with_weights(spec, prob, run.u, spec.gamma_sq);
        const double worst = worst_case_inefficiency(compile_detector(designed), omega_grid);
        if (!have_best || worst < best.worst_inefficiency) {
            have_best = true;
            best.spec = std::move(designed);
            best.worst_inefficiency = worst;
            best.converged = run.converged;
            best.objective_history = std::move(run.history);
        }
    }
    best.iterations = total_iterations;
    return best;
}

OptimizationResult optimize_weights(const DetectorSpec& spec, const OptimizeOptions& opts) {
    const auto grid = evaluation_grid(spec, opts.points_per_spacing);
    return optimize_weights(spec, grid, opts);
}

namespace {

DetectorSpec at_rate(DetectorSpec spec, double gamma_cap_sq, double delta_omega) {
    for (auto& b : spec.bins) {
        b.gamma_cap_sq = gamma_cap_sq;
        b.dispersion = delta_omega;
        b.subdivisions.reset();
    }
    return spec;
}

}  // namespace

CalibrationResult calibrate_gamma(const DetectorSpec& spec, double delta_omega, double efficiency_floor,
                                  const CalibrateOptions& opts) {
    if (!(efficiency_floor > 0.0 && efficiency_floor < 1.0))
        throw std::invalid_argument("calibrate_gamma: floor must lie in (0, 1)");
    if (!(delta_omega >= 0.0)) throw std::invalid_argument("calibrate_gamma: negative dispersion");
    if (!(opts.bracket_lo > 0.0 && opts.bracket_hi > opts.bracket_lo))
        throw std::invalid_argument("calibrate_gamma: bad bracket");

    CalibrationResult out;
    auto probe = [&](double rate) {
        ++out.probes;
        const DetectorSpec candidate = at_rate(spec, rate, delta_omega);
        if (!opts.omega_grid.empty()) return optimize_weights(candidate, opts.omega_grid, opts.optimize);
        return optimize_weights(candidate, opts.optimize);
    };
    auto feasible = [&](const OptimizationResult& r) {
        return 1.0 - r.worst_inefficiency >= efficiency_floor;
    };

    OptimizationResult top = probe(opts.bracket_hi);
    if (!feasible(top)) {
        std::ostringstream os;
        os << "calibrate_gamma: floor " << efficiency_floor << " not reached at gamma_cap_sq = "
           << opts.bracket_hi << " eV (best efficiency " << 1.0 - top.worst_inefficiency << ")";
        throw InfeasibleError(os.str(), 1.0 - top.worst_inefficiency);
    }
    OptimizationResult bottom = probe(opts.bracket_lo);
    if (feasible(bottom)) {
        out.gamma_cap_sq = opts.bracket_lo;
        out.design = std::move(bottom);
        return out;
    }

    double lo = opts.bracket_lo, hi = opts.bracket_hi;
    while (hi / lo - 1.0 > opts.rel_width) {
        const double mid = std::sqrt(lo * hi);
        OptimizationResult r = probe(mid);
        if (feasible(r)) {
            hi = mid;
            top = std::move(r);
        } else {
            lo = mid;
        }
    }
    out.gamma_cap_sq = hi;
    out.design = std::move(top);
    return out;
}

double band_average_resolution(const CompiledModel& model, const DetectorSpec& spec,
                               int points_per_spacing) {
    const auto centers = spec.bin_centers();
    const double width = spec.band_hi - spec.band_lo;
    const double spacing = centers.size() > 1
                               ? (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1)
                               : width;
    const auto n = static_cast<std::size_t>(std::ceil(width / (spacing / points_per_spacing) - 1e-9));
    std::vector<double> grid;
    for (std::size_t k = 0; k <= n; ++k)
        grid.push_back(spec.band_lo + width * static_cast<double>(k) / static_cast<double>(n));
    const MetricsReport report = efficiency_curve(model, grid);
    double sum = 0.0;
    int count = 0;
    for (const auto& s : report.omega_sigma)
        if (s) sum += *s, ++count;
    if (count == 0) throw UndefinedMomentsError("band_average_resolution: no detection in band");
    return sum / count;
}

std::vector<TradeoffPoint> resolution_jitter_tradeoff(const DetectorSpec& spec,
                                                      std::span<const double> delta_omegas,
                                                      const TradeoffOptions& opts) {
    std::vector<double> sorted(delta_omegas.begin(), delta_omegas.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<TradeoffPoint> out;
    for (double dw : sorted) {
        TradeoffPoint pt;
        pt.delta_omega = dw;
        try {
            const auto cal = calibrate_gamma(spec, dw, opts.efficiency_floor, opts.calibrate);
            pt.gamma_cap_sq = cal.gamma_cap_sq;
            pt.min_efficiency = 1.0 - cal.design.worst_inefficiency;
            const CompiledModel model = compile_detector(cal.design.spec);
            pt.omega_sigma = band_average_resolution(model, cal.design.spec);
            const double center = 0.5 * (spec.band_lo + spec.band_hi);
            pt.jitter_fs = system_jitter(model, center, opts.jitter).jitter_fs;
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        out.push_back(std::move(pt));
    }
    return out;
}

nlohmann::json to_json(const OptimizationResult& result) {
    const double omega = result.spec.band_hi - result.spec.band_lo;
    nlohmann::json scaled = nlohmann::json::array();
    for (const auto& b : result.spec.bins) scaled.push_back(b.weight * result.spec.gamma_sq / omega);
    nlohmann::json caps = nlohmann::json::array();
    for (const auto& c : result.spec.endcaps) caps.push_back(c.weight * result.spec.gamma_sq / omega);
    return {{"spec", spec_to_json(result.spec)},
            {"worst_inefficiency", result.worst_inefficiency},
            {"min_efficiency", 1.0 - result.worst_inefficiency},
            {"iterations", result.iterations},
            {"converged", result.converged},
            {"grid_points", result.omega_grid.size()},
            {"scaled_bin_weights", scaled},
            {"scaled_endcap_weights", caps}};
}

}  // namespace coopdet
