#include "coopdet/scenarios.hpp"

#include <cmath>
#include <stdexcept>

#include "coopdet/error.hpp"
#include "coopdet/format.hpp"
#include "coopdet/parallel.hpp"

namespace coopdet {

SequentialStack split_into_stages(const DetectorSpec& spec) {
    SequentialStack stack;
    for (const auto& bin : spec.bins) {
        DetectorSpec solo = spec;
        solo.bins = {bin};
        solo.endcaps.clear();
        stack.stages.push_back(compile_detector(solo));
    }
    return stack;
}

ChannelResponse sequential_chain(const SequentialStack& stack, double omega0) {
    if (stack.stages.empty()) throw std::invalid_argument("sequential_chain: empty stack");
    ChannelResponse out;
    out.omega0 = omega0;
    double survival = 1.0;
    for (const auto& stage : stack.stages) {
        if (stage.num_channels < 1) throw std::invalid_argument("sequential_chain: stage without a channel");
        const ChannelResponse solo = channel_probabilities(stage, omega0, SolveMethod::rank1);
        for (double p : solo.pi) out.pi.push_back(survival * p);
        survival *= 1.0 - solo.total;
    }
    for (double p : out.pi) out.total += p;
    return out;
}

std::vector<EndcapComparison> compare_endcaps(const DetectorSpec& base, const DetectorSpec& capped,
                                              std::span<const double> probes) {
    std::vector<std::string> problems;
    if (base.band_lo != capped.band_lo || base.band_hi != capped.band_hi)
        problems.emplace_back("capped_spec: band differs from base_spec");
    if (base.bin_centers() != capped.bin_centers())
        problems.emplace_back("capped_spec: bin centers differ from base_spec");
    if (!problems.empty()) throw SpecError(problems);

    const CompiledModel mb = compile_detector(base);
    const CompiledModel mc = compile_detector(capped);
    return parallel_map(probes.size(), [&](std::size_t k) {
        const double w = probes[k];
        const auto rb = channel_probabilities(mb, w);
        const auto rc = channel_probabilities(mc, w);
        EndcapComparison c;
        c.omega0 = w;
        c.out_of_band = w < base.band_lo || w > base.band_hi;
        c.p_base = rb.total;
        c.p_capped = rc.total;
        c.dominant_base = rb.dominant_probability();
        c.dominant_capped = rc.dominant_probability();
        c.capping_reduced = c.out_of_band && c.p_capped < c.p_base;
        return c;
    });
}

RealizationReport realization_estimate(const RealizationParams& params, double target) {
    std::vector<std::string> problems;
    if (!(params.qd_lifetime_ps > 0.0)) problems.emplace_back("qd_lifetime: must be positive");
    if (!(params.dots_per_bin >= 0.0)) problems.emplace_back("dots_per_bin: must be non-negative");
    if (!(params.band_width > 0.0)) problems.emplace_back("band_width: must be positive");
    if (params.bins < 1) problems.emplace_back("bins: must be positive");
    if (!problems.empty()) throw SpecError(problems);

    RealizationReport r;
    r.gamma_sq = kHbarEvFs / (params.qd_lifetime_ps * 1000.0);
    r.coupling_budget = params.dots_per_bin * r.gamma_sq / params.band_width;
    r.target = target;
    r.meets_target = r.coupling_budget >= target;
    return r;
}

}  // namespace coopdet
