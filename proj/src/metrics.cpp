#include "coopdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "coopdet/error.hpp"
#include "coopdet/format.hpp"
#include "coopdet/parallel.hpp"

namespace coopdet {

FrequencyMoments frequency_moments(const ChannelResponse& response,
                                   std::span<const double> bin_centers) {
    if (response.pi.size() != bin_centers.size())
        throw std::invalid_argument("frequency_moments: channel count mismatch");
    if (!(response.total > 0.0))
        throw UndefinedMomentsError("frequency_moments: zero detection probability");
    double mu = 0.0;
    for (std::size_t i = 0; i < bin_centers.size(); ++i) mu += bin_centers[i] * response.pi[i];
    mu /= response.total;
    double var = 0.0;
    for (std::size_t i = 0; i < bin_centers.size(); ++i) {
        const double d = bin_centers[i] - mu;
        var += d * d * response.pi[i];
    }
    return {mu, std::sqrt(std::max(0.0, var / response.total))};
}

double MetricsReport::min_efficiency() const {
    return efficiency.empty() ? 0.0 : *std::min_element(efficiency.begin(), efficiency.end());
}

MetricsReport efficiency_curve(const CompiledModel& model, std::span<const double> omega_grid) {
    const auto responses = channel_probabilities(model, omega_grid, SolveMethod::rank1);
    MetricsReport report;
    report.omega_grid.assign(omega_grid.begin(), omega_grid.end());
    for (const auto& r : responses) {
        report.efficiency.push_back(r.total);
        if (r.total > 0.0) {
            const auto m = frequency_moments(r, model.channel_centers);
            report.omega_mu.emplace_back(m.omega_mu);
            report.omega_sigma.emplace_back(m.omega_sigma);
        } else {
            report.omega_mu.emplace_back();
            report.omega_sigma.emplace_back();
        }
    }
    report.jitter_fs.assign(report.size(), std::nullopt);
    return report;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

nlohmann::json value_or_null(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void write_csv(const MetricsReport& report, std::ostream& os) {
    os << "omega0_eV,P,omega_mu_eV,omega_sigma_eV,jitter_fs\n";
    for (std::size_t k = 0; k < report.size(); ++k) {
        os << format_number(report.omega_grid[k]) << ',' << format_number(report.efficiency[k]) << ','
           << cell(report.omega_mu[k]) << ',' << cell(report.omega_sigma[k]) << ','
           << (k < report.jitter_fs.size() ? cell(report.jitter_fs[k]) : std::string()) << '\n';
    }
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < report.size(); ++k) {
        rows.push_back({{"omega0_eV", report.omega_grid[k]},
                        {"P", report.efficiency[k]},
                        {"omega_mu_eV", value_or_null(report.omega_mu[k])},
                        {"omega_sigma_eV", value_or_null(report.omega_sigma[k])},
                        {"jitter_fs", k < report.jitter_fs.size() ? value_or_null(report.jitter_fs[k])
                                                                  : nlohmann::json(nullptr)}});
    }
    return rows;
}

double to_femtoseconds(double dimensionless_time, double unit_energy) {
    if (!(unit_energy > 0.0)) throw std::invalid_argument("to_femtoseconds: unit energy must be positive");
    return dimensionless_time * kHbarEvFs / unit_energy;
}

std::vector<double> default_jitter_schedule(const CompiledModel& model) {
    const double g = model.min_decay();
    if (!(g > 0.0)) throw std::invalid_argument("system_jitter: model has no monitored decay rate");
    return {20.0 / g, 40.0 / g, 80.0 / g, 160.0 / g};
}

std::pair<double, double> extrapolate_to_zero(std::span<const double> h, std::span<const double> a) {
    const std::size_t n = a.size();
    if (n == 0 || h.size() != n) throw std::invalid_argument("extrapolate_to_zero: bad samples");
    if (n == 1) return {a[0], a[0]};
    // p[i] holds the value at 0 of the interpolant through samples i..i+order
    std::vector<double> p(a.begin(), a.end());
    double lower = p[n - 1];
    for (std::size_t order = 1; order < n; ++order) {
        for (std::size_t i = 0; i + order < n; ++i)
            p[i] = (h[i + order] * p[i] - h[i] * p[i + 1]) / (h[i + order] - h[i]);
        if (order == n - 2) lower = p[1];
    }
    return {p[0], lower};
}

namespace {

struct JitterSample {
    double excess = 0.0;
    double probability = 0.0;
    std::vector<double> channel_excess;
    std::vector<double> channel_probability;
};

std::string jitter_failure(const char* what, double omega0) {
    std::ostringstream os;
    os.precision(12);
    os << "system_jitter: " << what << " at omega0 = " << omega0 << " eV";
    return os.str();
}

}  // namespace

JitterResult system_jitter(const CompiledModel& model, double omega0, const JitterOptions& opts) {
    std::vector<double> schedule =
        opts.sigma0_schedule.empty() ? default_jitter_schedule(model) : opts.sigma0_schedule;
    for (std::size_t k = 0; k < schedule.size(); ++k)
        if (!(schedule[k] > 0.0) || (k > 0 && !(schedule[k] > schedule[k - 1])))
            throw std::invalid_argument("system_jitter: schedule must be positive and increasing");

    const auto samples = parallel_map(schedule.size(), [&](std::size_t k) {
        const auto pulse = PulseSpec::gaussian(omega0, schedule[k]);
        const DetectionMoments m = detection_time_moments(model, pulse, opts.dynamics);
        JitterSample s;
        s.probability = m.probability;
        const double s0 = schedule[k] * schedule[k];
        s.excess = m.variance - s0;
        for (std::size_t i = 0; i < m.channel_variance.size(); ++i)
            s.channel_excess.push_back(m.channel_variance[i] - s0);
        s.channel_probability = m.channel_probability;
        return s;
    });

    JitterResult result;
    result.sigma0 = schedule;
    std::vector<double> h, partial_fs;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        h.push_back(1.0 / (schedule[k] * schedule[k]));
        result.excess_variance.push_back(samples[k].excess);
        partial_fs.push_back(to_femtoseconds(std::sqrt(std::max(0.0, samples[k].excess)), 1.0));
    }
    result.probability = samples.back().probability;
    if (!(result.probability > 0.0))
        throw ConvergenceError(jitter_failure("no detection", omega0), partial_fs);

    const auto [best, second] = extrapolate_to_zero(h, result.excess_variance);
    if (!(best > 0.0) || !(second > 0.0))
        throw ConvergenceError(jitter_failure("extrapolated variance is not positive", omega0), partial_fs);
    result.sigma_sys = std::sqrt(best);
    result.jitter_fs = to_femtoseconds(result.sigma_sys, 1.0);
    result.convergence = std::abs(result.sigma_sys - std::sqrt(second)) / result.sigma_sys;
    if (!(result.convergence <= opts.tolerance))
        throw ConvergenceError(jitter_failure("schedule did not converge", omega0), partial_fs);

    if (opts.per_channel) {
        const std::size_t n = samples.back().channel_excess.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!(samples.back().channel_probability[i] > 0.0)) {
                result.channel_jitter_fs.push_back(std::nan(""));
                continue;
            }
            std::vector<double> a;
            for (const auto& s : samples) a.push_back(s.channel_excess[i]);
            const double v = extrapolate_to_zero(h, a).first;
            result.channel_jitter_fs.push_back(to_femtoseconds(std::sqrt(std::max(0.0, v)), 1.0));
        }
    }
    return result;
}

}  // namespace coopdet
