// optimize.hpp: weight design, decay-rate calibration and the resolution/jitter sweep

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "coopdet/lbfgsb.hpp"
#include "coopdet/metrics.hpp"
#include "coopdet/model.hpp"

namespace coopdet {

// Uniform samples over the band at `points_per_spacing` per bin spacing, plus
// every bin center and every midpoint between neighbouring centers. Sorted,
// duplicates removed.
std::vector<double> evaluation_grid(const DetectorSpec& spec, int points_per_spacing = 20);

// max over the grid of 1 - P (rank-one path).
double worst_case_inefficiency(const CompiledModel& model, std::span<const double> omega_grid);

struct OptimizeOptions {
    int points_per_spacing = 20;   // used when no grid is supplied
    std::vector<double> temperatures{1e-2, 1e-3, 1e-4};
    double upper_bound = 1e4;      // on n_i gamma^2 / Gamma^2
    bool optimize_endcaps = true;
    int restarts = 0;              // extra randomly perturbed starts
    std::uint64_t seed = 0;
    LbfgsbOptions lbfgsb{};
};

struct OptimizationResult {
    DetectorSpec spec;
    double worst_inefficiency = 1.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_history;
    std::vector<double> omega_grid;
};

// Minimizes a log-sum-exp smoothing of max(1 - P) over the grid in the design
// weights (bins, and endcaps if enabled), annealing the temperature, then
// recomputes the exact worst case for the returned spec. gamma_sq stays fixed.
OptimizationResult optimize_weights(const DetectorSpec& spec, std::span<const double> omega_grid,
                                    const OptimizeOptions& opts = {});
OptimizationResult optimize_weights(const DetectorSpec& spec, const OptimizeOptions& opts = {});

struct CalibrateOptions {
    double bracket_lo = 1e-3;      // eV
    double bracket_hi = 0.3;       // eV
    double rel_width = 1e-3;
    std::vector<double> omega_grid;  // empty: evaluation_grid of each probed spec
    OptimizeOptions optimize{};
};

struct CalibrationResult {
    double gamma_cap_sq = 0.0;
    OptimizationResult design;     // optimized at gamma_cap_sq
    int probes = 0;
};

// Sets every bin's decay rate and dispersion (subdivisions from the default
// rule) and bisects for the smallest rate whose optimized design has min
// efficiency >= floor. Throws InfeasibleError if the top of the bracket fails.
CalibrationResult calibrate_gamma(const DetectorSpec& spec, double delta_omega, double efficiency_floor,
                                  const CalibrateOptions& opts = {});

struct TradeoffPoint {
    double delta_omega = 0.0;
    double gamma_cap_sq = 0.0;
    double omega_sigma = 0.0;   // band average, eV
    double jitter_fs = 0.0;     // at band center
    double min_efficiency = 0.0;
    std::optional<std::string> error;
};

struct TradeoffOptions {
    double efficiency_floor = 0.99;
    CalibrateOptions calibrate{};
    JitterOptions jitter{};
};

// One calibrate + evaluate run per dispersion, sorted by dispersion. A failing
// point keeps its error message and the sweep continues.
std::vector<TradeoffPoint> resolution_jitter_tradeoff(const DetectorSpec& spec,
                                                      std::span<const double> delta_omegas,
                                                      const TradeoffOptions& opts = {});

// Mean of omega_sigma over uniform in-band samples where P > 0.
double band_average_resolution(const CompiledModel& model, const DetectorSpec& spec,
                               int points_per_spacing = 20);

nlohmann::json to_json(const OptimizationResult& result);

}  // namespace coopdet
