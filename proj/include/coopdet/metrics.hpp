// metrics.hpp: efficiency, frequency resolution and system jitter

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "coopdet/dynamics.hpp"
#include "coopdet/model.hpp"
#include "coopdet/steady_state.hpp"

namespace coopdet {

struct FrequencyMoments {
    double omega_mu = 0.0;     // eV
    double omega_sigma = 0.0;  // eV, standard deviation
};

// Throws UndefinedMomentsError when response.total == 0.
FrequencyMoments frequency_moments(const ChannelResponse& response,
                                   std::span<const double> bin_centers);

struct MetricsReport {
    std::vector<double> omega_grid;
    std::vector<double> efficiency;
    std::vector<std::optional<double>> omega_mu;     // empty where P == 0
    std::vector<std::optional<double>> omega_sigma;
    std::vector<std::optional<double>> jitter_fs;    // only where computed

    std::size_t size() const noexcept { return omega_grid.size(); }
    double min_efficiency() const;
};

// P, omega_mu and omega_sigma over the grid (rank-one path).
MetricsReport efficiency_curve(const CompiledModel& model, std::span<const double> omega_grid);

// Columns omega0_eV, P, omega_mu_eV, omega_sigma_eV, jitter_fs.
void write_csv(const MetricsReport& report, std::ostream& os);
nlohmann::json to_json(const MetricsReport& report);

// t_fs = t * hbar / unit_energy. Throws std::invalid_argument for unit_energy <= 0.
double to_femtoseconds(double dimensionless_time, double unit_energy);

struct JitterOptions {
    // Pulse widths in hbar/eV, increasing. Empty selects {20, 40, 80, 160} / min Gamma^2.
    std::vector<double> sigma0_schedule;
    double tolerance = 0.05;   // relative convergence required of the limit
    bool per_channel = false;  // also extrapolate each channel's conditional jitter
    DynamicsOptions dynamics{};
};

struct JitterResult {
    double sigma_sys = 0.0;      // hbar/eV
    double jitter_fs = 0.0;
    double convergence = 0.0;    // relative change between the two best extrapolants
    double probability = 0.0;    // detection probability at the widest pulse
    std::vector<double> sigma0;          // schedule used
    std::vector<double> excess_variance; // sigma^2 - sigma0^2 for each sigma0
    std::vector<double> channel_jitter_fs;  // filled when per_channel is set
};

// Detection-time spread with the pulse width removed in quadrature,
// extrapolated to an infinitely long pulse. Throws ConvergenceError (carrying
// the per-width sequence in fs) if the estimate misses the tolerance.
JitterResult system_jitter(const CompiledModel& model, double omega0,
                           const JitterOptions& opts = {});

std::vector<double> default_jitter_schedule(const CompiledModel& model);

// Polynomial extrapolation to h = 0 of samples (h_k, a_k) via Neville's scheme.
// Returns the full-order value and the one-order-lower value from the same tail.
std::pair<double, double> extrapolate_to_zero(std::span<const double> h, std::span<const double> a);

}  // namespace coopdet
