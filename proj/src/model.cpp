#include "coopdet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "coopdet/error.hpp"

namespace coopdet {

namespace {

std::string join(const std::vector<std::string>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) os << "; ";
        os << items[i];
    }
    return os.str();
}

}  // namespace

SpecError::SpecError(std::vector<std::string> violations)
    : Error("invalid detector spec: " + join(violations)),
      violations_(std::move(violations)) {}

SpecError::SpecError(std::string key, const std::string& message)
    : Error(key + ": " + message), violations_{key + ": " + message}, key_(std::move(key)) {}

std::vector<double> DetectorSpec::bin_centers() const {
    std::vector<double> out;
    out.reserve(bins.size());
    for (const auto& b : bins) out.push_back(b.center);
    return out;
}

double DetectorSpec::min_decay() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : bins)
        if (b.gamma_cap_sq > 0.0) m = std::min(m, b.gamma_cap_sq);
    return std::isfinite(m) ? m : 0.0;
}

double CompiledModel::total_weight() const noexcept {
    double s = 0.0;
    for (const auto& e : elements) s += e.weight;
    return s;
}

double CompiledModel::min_decay() const noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : elements)
        if (e.decay_sq > 0.0) m = std::min(m, e.decay_sq);
    return std::isfinite(m) ? m : 0.0;
}

std::vector<std::string> validate_spec(const DetectorSpec& spec) {
    std::vector<std::string> v;
    auto bad = [](double x) { return !std::isfinite(x); };

    if (bad(spec.band_lo) || bad(spec.band_hi))
        v.emplace_back("band: non-finite endpoint");
    else if (!(spec.band_lo < spec.band_hi))
        v.emplace_back("band: band_lo must be below band_hi");
    if (bad(spec.gamma_sq) || spec.gamma_sq < 0.0)
        v.emplace_back("gamma_sq: must be finite and non-negative");
    if (bad(spec.chi) || spec.chi < 0.0)
        v.emplace_back("chi: must be finite and non-negative");
    if (spec.bins.empty())
        v.emplace_back("bins: at least one bin is required");

    for (std::size_t i = 0; i < spec.bins.size(); ++i) {
        const auto& b = spec.bins[i];
        const std::string tag = "bin " + std::to_string(i) + ": ";
        if (bad(b.center))
            v.push_back(tag + "non-finite center");
        else if (b.center < spec.band_lo || b.center > spec.band_hi)
            v.push_back(tag + "center outside band");
        if (i > 0 && !(b.center > spec.bins[i - 1].center))
            v.push_back(tag + "centers not strictly increasing");
        if (bad(b.weight) || b.weight < 0.0) v.push_back(tag + "negative weight");
        if (bad(b.gamma_cap_sq) || b.gamma_cap_sq < 0.0)
            v.push_back(tag + "negative gamma_cap_sq");
        if (bad(b.dispersion) || b.dispersion < 0.0) v.push_back(tag + "negative dispersion");
        if (b.subdivisions && *b.subdivisions < 1)
            v.push_back(tag + "subdivisions must be at least 1");
    }
    for (std::size_t k = 0; k < spec.endcaps.size(); ++k) {
        const auto& c = spec.endcaps[k];
        const std::string tag = "endcap " + std::to_string(k) + ": ";
        if (bad(c.energy))
            v.push_back(tag + "non-finite energy");
        else if (c.energy >= spec.band_lo && c.energy <= spec.band_hi)
            v.push_back(tag + "energy inside band");
        if (bad(c.weight) || c.weight < 0.0) v.push_back(tag + "negative weight");
    }
    return v;
}

int effective_subdivisions(const BinSpec& bin, double min_decay) {
    if (bin.dispersion <= 0.0) return 1;
    if (bin.subdivisions) return *bin.subdivisions;
    if (min_decay <= 0.0) return 1;
    const double spacing = min_decay / 4.0;
    // Guard against the ratio landing a hair above an integer.
    return std::max(1, static_cast<int>(std::ceil(bin.dispersion / spacing - 1e-9)));
}

CompiledModel compile_detector(const DetectorSpec& spec) {
    if (auto violations = validate_spec(spec); !violations.empty())
        throw SpecError(std::move(violations));

    CompiledModel m;
    m.gamma_sq = spec.gamma_sq;
    m.chi = spec.chi;
    m.num_channels = static_cast<int>(spec.bins.size());
    m.num_groups = static_cast<int>(spec.bins.size() + spec.endcaps.size());
    m.channel_centers = spec.bin_centers();

    const double min_decay = spec.min_decay();
    for (std::size_t i = 0; i < spec.bins.size(); ++i) {
        const auto& b = spec.bins[i];
        const int k = effective_subdivisions(b, min_decay);
        const double width = b.dispersion;
        double assigned = 0.0;
        for (int s = 0; s < k; ++s) {
            Element e;
            // midpoints of K equal subintervals of (center - width/2, center + width/2)
            e.energy = k == 1 ? b.center : b.center - 0.5 * width + (s + 0.5) * width / k;
            // last sub-element takes the remainder so the bin sum is exactly b.weight
            e.weight = s + 1 < k ? b.weight / k : b.weight - assigned;
            assigned += e.weight;
            e.decay_sq = b.gamma_cap_sq;
            e.channel = static_cast<int>(i);
            e.group = static_cast<int>(i);
            e.group_fraction = 1.0 / k;
            m.elements.push_back(e);
        }
    }
    for (std::size_t c = 0; c < spec.endcaps.size(); ++c) {
        Element e;
        e.energy = spec.endcaps[c].energy;
        e.weight = spec.endcaps[c].weight;
        e.decay_sq = 0.0;
        e.channel = kNoChannel;
        e.group = static_cast<int>(spec.bins.size() + c);
        e.group_fraction = 1.0;
        m.elements.push_back(e);
    }
    return m;
}

}  // namespace coopdet
