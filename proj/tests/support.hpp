// support.hpp: random instances and independent reference formulas for tests

#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "coopdet/model.hpp"

namespace coopdet::testing {

using cd = std::complex<double>;

struct RandomModelOptions {
    int min_elements = 1;
    int max_elements = 6;
    int max_channels = 3;
    double endcap_probability = 0.15;
    double zero_weight_probability = 0.05;
    double gamma_sq_lo = 1e-3, gamma_sq_hi = 0.05;
    double decay_lo = 0.01, decay_hi = 0.2;
};

// Elements with random energies in [2.0, 2.8] eV, weights, rates and channel
// tags. Endcap elements get channel kNoChannel and zero decay.
inline CompiledModel random_model(std::mt19937_64& rng, const RandomModelOptions& o = {}) {
    std::uniform_int_distribution<int> count(o.min_elements, o.max_elements);
    std::uniform_int_distribution<int> channels(1, o.max_channels);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double a, double b) { return a + (b - a) * unit(rng); };
    auto log_between = [&](double a, double b) { return a * std::pow(b / a, unit(rng)); };

    CompiledModel m;
    const int n = count(rng);
    m.num_channels = channels(rng);
    for (int c = 0; c < m.num_channels; ++c) m.channel_centers.push_back(2.0 + 0.8 * (c + 0.5) / m.num_channels);
    m.gamma_sq = log_between(o.gamma_sq_lo, o.gamma_sq_hi);
    m.chi = 0.0;
    for (int j = 0; j < n; ++j) {
        Element e;
        e.energy = between(2.0, 2.8);
        e.weight = unit(rng) < o.zero_weight_probability ? 0.0 : between(0.1, 3.0);
        // first element always monitored so every model has a channel in use
        if (j > 0 && unit(rng) < o.endcap_probability) {
            e.channel = kNoChannel;
            e.decay_sq = 0.0;
        } else {
            e.channel = std::uniform_int_distribution<int>(0, m.num_channels - 1)(rng);
            e.decay_sq = log_between(o.decay_lo, o.decay_hi);
        }
        e.group = j;
        m.elements.push_back(e);
    }
    m.num_groups = n;
    return m;
}

inline CompiledModel single_element(double energy, double weight, double gamma_sq, double decay_sq) {
    CompiledModel m;
    m.gamma_sq = gamma_sq;
    m.num_channels = 1;
    m.num_groups = 1;
    m.channel_centers = {energy};
    m.elements.push_back({energy, weight, decay_sq, 0, 0, 1.0});
    return m;
}

// Scalar Lorentzian of one element of weight w: Pi = x G / (d^2 + ((x + G)/2)^2), x = w gamma^2.
inline double scalar_efficiency(double detuning, double weight, double gamma_sq, double decay_sq) {
    const double x = weight * gamma_sq;
    const double half = 0.5 * (x + decay_sq);
    return x * decay_sq / (detuning * detuning + half * half);
}

// Long-pulse limit of the detection-time variance minus the pulse variance,
// from the frequency derivatives of the steady-state amplitudes:
//   sum_j p_j (-Re (ln v_j)'' / 2) + Var_p (Im (ln v_j)'),  p_j ~ Gamma_j^2 w_j |v_j|^2.
inline double limiting_excess_variance(const CompiledModel& m, double omega0) {
    const std::size_t n = m.size();
    std::vector<cd> b(n);
    cd s = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& e = m.elements[j];
        b[j] = cd(0.5 * e.decay_sq, omega0 - e.energy);
        s += e.weight / b[j];
        s1 += -cd(0.0, 1.0) * e.weight / (b[j] * b[j]);
        s2 += -2.0 * e.weight / (b[j] * b[j] * b[j]);
    }
    const double h = 0.5 * m.gamma_sq;
    const cd d = 1.0 + h * s;
    double ptot = 0.0, mean = 0.0, second = 0.0, spread = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& e = m.elements[j];
        if (e.channel == kNoChannel) continue;
        const double p = e.decay_sq * e.weight * std::norm(1.0 / (b[j] * d));
        const cd l1 = -cd(0.0, 1.0) / b[j] - h * s1 / d;
        const cd l2 = -1.0 / (b[j] * b[j]) - h * (s2 / d - h * s1 * s1 / (d * d));
        ptot += p;
        mean += p * l1.imag();
        second += p * l1.imag() * l1.imag();
        spread += p * (-0.5 * l2.real());
    }
    mean /= ptot;
    return spread / ptot + second / ptot - mean * mean;
}

}  // namespace coopdet::testing
