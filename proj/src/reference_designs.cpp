#include "coopdet/reference_designs.hpp"

#include <stdexcept>

namespace coopdet {

DetectorSpec uniform_design(int bins, double band_lo, double band_hi, double gamma_cap_sq,
                            double gamma_sq) {
    if (bins < 1) throw std::invalid_argument("uniform_design: need at least one bin");
    DetectorSpec spec;
    spec.band_lo = band_lo;
    spec.band_hi = band_hi;
    spec.gamma_sq = gamma_sq;
    spec.chi = kReferenceChi;
    const double weight = gamma_cap_sq / (gamma_sq * bins);
    for (int i = 0; i < bins; ++i) {
        BinSpec b;
        b.center = bins == 1 ? 0.5 * (band_lo + band_hi)
                             : band_lo + (band_hi - band_lo) * i / (bins - 1);
        b.weight = weight;
        b.gamma_cap_sq = gamma_cap_sq;
        spec.bins.push_back(b);
    }
    return spec;
}

DetectorSpec reference_uncapped() { return uniform_design(12, 1.9, 2.9, 0.085); }

DetectorSpec reference_capped() {
    DetectorSpec spec = uniform_design(12, 1.9, 2.9, 0.082);
    const double weight = spec.bins.front().weight;
    spec.endcaps = {{1.81, weight}, {2.99, weight}};
    return spec;
}

DetectorSpec reference_dispersed(double delta_omega, double gamma_cap_sq) {
    DetectorSpec spec = reference_capped();
    for (auto& b : spec.bins) {
        b.gamma_cap_sq = gamma_cap_sq;
        b.dispersion = delta_omega;
    }
    return spec;
}

}  // namespace coopdet
