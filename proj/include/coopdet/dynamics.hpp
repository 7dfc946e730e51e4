// dynamics.hpp: time-domain detection for a single-photon wavepacket
//
// Two integrators of the same physics, both in a frame rotating at the carrier
// frequency w0:
//
//  * evolve_fock_hierarchy: the reduced density matrix rho and its auxiliary
//    partner varrho over the basis {|0>, |1_j>, |C_j>} (dimension 1 + 2M),
//      d rho/dt    = V(rho)    + e(t) [varrho, L^+] + e(t) [L, varrho^+]
//      d varrho/dt = V(varrho) + e(t) [L, rho(t0)]
//    where V = -i[H, .] + sum D[Y_j] + sum D[X_i] + D[L] and D is the Lindblad
//    dissipator. A weight-w entry is one bright state with coupling sqrt(w) gamma.
//
//  * evolve_single_excitation: the equivalent amplitude equations for n = 1,
//      dc_j/dt = (-i (E_j - w0) - Gamma_j^2 / 2) c_j - (gamma^2 / 2) sum_k w_k c_k - gamma e(t),
//    with detection rate Gamma_j^2 w_j |c_j|^2. O(M) per step.
//
// Time is in hbar/eV (energies in eV).

#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coopdet/model.hpp"
#include "coopdet/ode.hpp"

namespace coopdet {

struct PulseSpec {
    enum class Shape { gaussian, flat };

    double omega0 = 0.0;
    Shape shape = Shape::gaussian;
    double width = 1.0;   // gaussian: std of |e(t)|^2; flat: window length
    double origin = 0.0;  // gaussian: center; flat: switch-on time

    // |e|^2 is a normal density with standard deviation sigma0.
    static PulseSpec gaussian(double omega0, double sigma0, double center);
    // Defaults the center to 8 sigma0 so the pulse starts at t = 0.
    static PulseSpec gaussian(double omega0, double sigma0);
    static PulseSpec flat(double omega0, double start, double window);

    // Real envelope, square-normalised over the real line.
    double envelope(double t) const;
    double start_time() const;
    double end_time() const;
    // Times where the envelope is not smooth.
    std::vector<double> breakpoints() const;
    // Standard deviation of |e(t)|^2.
    double temporal_width() const;
};

// Midpoint-rule value of the integral of e(t)^2 over the cells of `grid`.
double square_norm(const PulseSpec& pulse, std::span<const double> grid);

struct TimeTrace {
    std::vector<double> times;
    std::vector<std::vector<double>> rate;  // [channel][time], dPi_i/dt
    std::vector<std::vector<double>> cum;   // [channel][time], Pi_i(t)

    int num_channels() const noexcept { return static_cast<int>(cum.size()); }
    std::vector<double> total_cum() const;
    double final_total() const;
};

// CSV with columns time_fs, rate_ch0..rate_chN-1 (per fs), cum_ch0..cum_chN-1.
void write_csv(const TimeTrace& trace, std::ostream& os);

struct HierarchyState {
    Eigen::MatrixXcd rho;
    Eigen::MatrixXcd varrho;
};

struct DynamicsOptions {
    IntegratorOptions integrator{};
    double trace_tol = 1e-8;
    double positivity_tol = 1e-8;
};

// grid: nondecreasing output times >= 0; integration starts from the ground
// state at t = 0. Throws IntegrationError if rho loses trace, Hermiticity or
// positivity beyond tolerance at an output time.
TimeTrace evolve_fock_hierarchy(const CompiledModel& model, const PulseSpec& pulse,
                                std::span<const double> grid, const DynamicsOptions& opts = {},
                                HierarchyState* final_state = nullptr);

TimeTrace evolve_single_excitation(const CompiledModel& model, const PulseSpec& pulse,
                                   std::span<const double> grid,
                                   const DynamicsOptions& opts = {});

// Uniform grid from 0 to past the pulse plus `decay_times` slowest decay times.
std::vector<double> default_time_grid(const CompiledModel& model, const PulseSpec& pulse,
                                      std::size_t points, double decay_times = 40.0);

// Detection-time distribution of a run integrated until the excitation has
// drained. Times are measured from the pulse origin.
struct DetectionMoments {
    double probability = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    std::vector<double> channel_probability;
    std::vector<double> channel_mean;
    std::vector<double> channel_variance;
};

DetectionMoments detection_time_moments(const CompiledModel& model, const PulseSpec& pulse,
                                        const DynamicsOptions& opts = {});

}  // namespace coopdet
