#include "coopdet/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include "coopdet/error.hpp"
#include "coopdet/parallel.hpp"

namespace coopdet {

using cd = std::complex<double>;

namespace {

[[noreturn]] void singular(double omega0, const char* where) {
    std::ostringstream os;
    os.precision(17);
    os << where << ": singular resolvent at omega0 = " << omega0 << " eV";
    throw NumericalError(os.str(), omega0);
}

cd denominator(const Element& e, double omega0) {
    return cd(0.5 * e.decay_sq, omega0 - e.energy);
}

}  // namespace

int ChannelResponse::dominant_channel() const {
    if (pi.empty()) return kNoChannel;
    return static_cast<int>(std::max_element(pi.begin(), pi.end()) - pi.begin());
}

double ChannelResponse::dominant_probability() const {
    return pi.empty() ? 0.0 : *std::max_element(pi.begin(), pi.end());
}

Eigen::VectorXcd amplitudes_dense(const CompiledModel& model, double omega0) {
    const auto n = static_cast<Eigen::Index>(model.size());
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    if (model.gamma_sq == 0.0 || n == 0) return v;

    const double gamma = std::sqrt(model.gamma_sq);
    Eigen::VectorXd root_w(n);
    for (Eigen::Index j = 0; j < n; ++j) root_w[j] = std::sqrt(model.elements[j].weight);

    Eigen::MatrixXcd a = (0.5 * model.gamma_sq) * (root_w * root_w.transpose()).cast<cd>();
    for (Eigen::Index j = 0; j < n; ++j) a(j, j) += denominator(model.elements[j], omega0);
    const Eigen::VectorXcd rhs = (gamma * root_w).cast<cd>();

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    if (!(lu.rcond() > 64 * std::numeric_limits<double>::epsilon()))
        singular(omega0, "amplitudes_dense");
    const Eigen::VectorXcd u = lu.solve(rhs);  // bright-state amplitudes

    // Collective field seen by every element; only needed for zero-weight rows.
    const cd field = gamma - 0.5 * model.gamma_sq * root_w.cast<cd>().dot(u);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (root_w[j] > 0.0)
            v[j] = u[j] / root_w[j];
        else
            v[j] = field / denominator(model.elements[j], omega0);
    }
    return v;
}

Eigen::VectorXcd amplitudes_rank1(const CompiledModel& model, double omega0) {
    const auto n = static_cast<Eigen::Index>(model.size());
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
    if (model.gamma_sq == 0.0 || n == 0) return v;

    const double gamma = std::sqrt(model.gamma_sq);
    cd s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const cd b = denominator(model.elements[j], omega0);
        if (b == 0.0) return amplitudes_dense(model, omega0);  // photon on an undamped element
        v[j] = 1.0 / b;
        s += model.elements[j].weight * v[j];
    }
    const cd d = 1.0 + 0.5 * model.gamma_sq * s;
    if (std::abs(d) < std::numeric_limits<double>::epsilon()) singular(omega0, "amplitudes_rank1");
    v *= gamma / d;
    return v;
}

ChannelResponse channel_probabilities(const CompiledModel& model, double omega0,
                                      SolveMethod method) {
    const Eigen::VectorXcd v = method == SolveMethod::dense ? amplitudes_dense(model, omega0)
                                                            : amplitudes_rank1(model, omega0);
    ChannelResponse r;
    r.omega0 = omega0;
    r.pi.assign(static_cast<std::size_t>(model.num_channels), 0.0);
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& e = model.elements[j];
        if (e.channel == kNoChannel) continue;
        r.pi[static_cast<std::size_t>(e.channel)] += e.weight * e.decay_sq * std::norm(v[static_cast<Eigen::Index>(j)]);
    }
    for (double p : r.pi) r.total += p;
    return r;
}

std::vector<ChannelResponse> channel_probabilities(const CompiledModel& model,
                                                   std::span<const double> omegas,
                                                   SolveMethod method) {
    return parallel_map(omegas.size(), [&](std::size_t k) {
        return channel_probabilities(model, omegas[k], method);
    });
}

}  // namespace coopdet
