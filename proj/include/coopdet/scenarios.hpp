// scenarios.hpp: endcap comparison, sequential baseline and realization arithmetic

#pragma once

#include <span>
#include <vector>

#include "coopdet/model.hpp"
#include "coopdet/steady_state.hpp"

namespace coopdet {

// Independent absorber planes met one after another by the photon.
struct SequentialStack {
    std::vector<CompiledModel> stages;
};

// One stage per bin, in bin order; endcaps are dropped.
SequentialStack split_into_stages(const DetectorSpec& spec);

// Pi_i = Pi_i^solo * prod_{j < i} (1 - P_j^solo); channels are concatenated in stage order.
ChannelResponse sequential_chain(const SequentialStack& stack, double omega0);

struct EndcapComparison {
    double omega0 = 0.0;
    bool out_of_band = false;
    double p_base = 0.0;
    double p_capped = 0.0;
    double dominant_base = 0.0;
    double dominant_capped = 0.0;
    bool capping_reduced = false;   // out of band and p_capped < p_base
};

// Both specs must share band and bin centers. Probes evaluate concurrently.
std::vector<EndcapComparison> compare_endcaps(const DetectorSpec& base, const DetectorSpec& capped,
                                              std::span<const double> probes);

struct RealizationParams {
    double qd_lifetime_ps = 0.0;
    double dots_per_bin = 0.0;
    double band_width = 0.0;   // eV
    int bins = 0;
};

struct RealizationReport {
    double gamma_sq = 0.0;         // eV
    double coupling_budget = 0.0;  // n_i gamma^2 / Omega
    double target = 0.0;
    bool meets_target = false;     // budget >= target
};

// gamma^2 = hbar / tau, budget = dots_per_bin * gamma^2 / Omega.
RealizationReport realization_estimate(const RealizationParams& params, double target = 0.0);

}  // namespace coopdet
