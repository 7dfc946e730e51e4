// steady_state.hpp: long-time channel probabilities for a monochromatic photon
//
// Within the single-excitation sector the resolvent i(w0 - H - H_D) acting on
// the element amplitudes is diag(B_j) plus a rank-one collective term, with
//   B_j = i (w0 - E_j) + Gamma_j^2 / 2.
// Amplitudes are reported per unit weight: a group of weight w behaves as one
// bright state of coupling sqrt(w) * gamma whose amplitude is sqrt(w) * v_j.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coopdet/model.hpp"

namespace coopdet {

enum class SolveMethod { dense, rank1 };

struct ChannelResponse {
    double omega0 = 0.0;
    std::vector<double> pi;  // per-channel probability
    double total = 0.0;

    // Index and value of the largest channel probability.
    int dominant_channel() const;
    double dominant_probability() const;
};

// General dense solve (partial pivoting) of the sqrt(w)-symmetrised system.
// Independent of the rank-one algebra; used as the oracle.
Eigen::VectorXcd amplitudes_dense(const CompiledModel& model, double omega0);

// Sherman-Morrison form, O(M):  v_j = gamma / (B_j (1 + gamma^2 S / 2)),  S = sum_j w_j / B_j.
// Falls back to the dense solve when some B_j is exactly zero.
Eigen::VectorXcd amplitudes_rank1(const CompiledModel& model, double omega0);

ChannelResponse channel_probabilities(const CompiledModel& model, double omega0,
                                      SolveMethod method = SolveMethod::rank1);

// Parallel map over a frequency grid; output order follows the grid.
std::vector<ChannelResponse> channel_probabilities(const CompiledModel& model,
                                                   std::span<const double> omegas,
                                                   SolveMethod method = SolveMethod::rank1);

}  // namespace coopdet
