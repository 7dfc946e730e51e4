// reference_designs.hpp: the twelve-bin visible-band designs used in examples and tests
//
// Bins are evenly spaced over [1.9, 2.9] eV. Weights start at the matched
// scale Gamma^2 / (gamma^2 N) and are meant to be optimized.

#pragma once

#include "coopdet/model.hpp"

namespace coopdet {

inline constexpr double kReferenceGammaSq = 1e-3;  // eV
inline constexpr double kReferenceChi = 0.01;      // eV

DetectorSpec uniform_design(int bins, double band_lo, double band_hi, double gamma_cap_sq,
                            double gamma_sq = kReferenceGammaSq);

// All bins monitored, Gamma^2 = 0.085 eV.
DetectorSpec reference_uncapped();
// Unmonitored endcaps at 1.81 and 2.99 eV, Gamma^2 = 0.082 eV.
DetectorSpec reference_capped();
// reference_capped with every bin spread flat over delta_omega at the given rate.
DetectorSpec reference_dispersed(double delta_omega, double gamma_cap_sq);

}  // namespace coopdet
