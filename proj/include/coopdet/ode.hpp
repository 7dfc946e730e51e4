// ode.hpp: adaptive Dormand-Prince 5(4) integrator for complex state vectors
//
// Embedded error estimate with a PI step-size controller (Hairer, Norsett &
// Wanner, "Solving ODEs I", II.4). The error norm is the RMS over components of
// err_i / (atol + rtol * max(|y_i|, |y_new_i|)).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "coopdet/error.hpp"

namespace coopdet {

struct IntegratorOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_max = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 50'000'000;
};

struct IntegratorStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
};

class DormandPrince5 {
public:
    using Vec = Eigen::VectorXcd;

    explicit DormandPrince5(IntegratorOptions opts = {}) : opts_(opts) {}

    const IntegratorStats& stats() const noexcept { return stats_; }
    void set_max_step(double h_max) noexcept { opts_.h_max = h_max; }

    // Advance y from t to t_end. The step size carries over between calls, so
    // a trajectory may be split at output times or forcing discontinuities.
    // rhs(t, y, dydt) must write dydt without aliasing y.
    template <class Rhs>
    void advance(Rhs&& rhs, double& t, double t_end, Vec& y) {
        if (!(t_end > t)) return;
        resize(y.size());

        rhs(t, y, k1_);
        ++stats_.evaluations;
        if (h_ <= 0.0) h_ = initial_step(rhs, t, t_end, y);

        while (t < t_end) {
            if (steps_++ >= opts_.max_steps)
                throw IntegrationError("ode: step budget exhausted");

            double h = std::min(h_, opts_.h_max);
            bool clamped = false;
            if (t + h >= t_end || t + 1.01 * h >= t_end) {
                h = t_end - t;
                clamped = true;
            }
            if (h < 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
                std::ostringstream os;
                os << "ode: step size underflow at t = " << t;
                throw IntegrationError(os.str());
            }

            stage(rhs, t, h, y);
            const double err = error_norm(y);

            if (err <= 1.0) {
                const double fac = std::clamp(
                    kSafety * std::pow(std::max(err, 1e-10), -kAlpha) * std::pow(err_prev_, kBeta),
                    0.2, reject_last_ ? 1.0 : 10.0);
                err_prev_ = std::max(err, 1e-4);
                t = clamped ? t_end : t + h;
                y.swap(y_new_);
                k1_.swap(k7_);  // first-same-as-last
                ++stats_.accepted;
                reject_last_ = false;
                // A clamped final step says nothing about the natural step size.
                if (!clamped || fac < 1.0) h_ = h * fac;
            } else {
                h_ = h * std::max(0.2, kSafety * std::pow(err, -kAlpha));
                reject_last_ = true;
                ++stats_.rejected;
            }
        }
    }

private:
    static constexpr double kSafety = 0.9;
    static constexpr double kBeta = 0.04;
    static constexpr double kAlpha = 0.2 - 0.75 * kBeta;

    void resize(Eigen::Index n) {
        if (k1_.size() == n) return;
        for (Vec* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &y_tmp_, &y_new_, &err_})
            v->resize(n);
    }

    template <class Rhs>
    void stage(Rhs& rhs, double t, double h, const Vec& y) {
        constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        constexpr double a21 = 1.0 / 5;
        constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                         a54 = -212.0 / 729;
        constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                         a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                         a75 = -2187.0 / 6784, a76 = 11.0 / 84;
        constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                         e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        y_tmp_ = y + (h * a21) * k1_;
        rhs(t + c2 * h, y_tmp_, k2_);
        y_tmp_ = y + h * (a31 * k1_ + a32 * k2_);
        rhs(t + c3 * h, y_tmp_, k3_);
        y_tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
        rhs(t + c4 * h, y_tmp_, k4_);
        y_tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
        rhs(t + c5 * h, y_tmp_, k5_);
        y_tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
        rhs(t + h, y_tmp_, k6_);
        y_new_ = y + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
        rhs(t + h, y_new_, k7_);
        stats_.evaluations += 6;
        err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    }

    double error_norm(const Vec& y) const {
        const Eigen::Index n = y.size();
        if (n == 0) return 0.0;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double scale =
                opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(y_new_[i]));
            const double r = std::abs(err_[i]) / scale;
            acc += r * r;
        }
        return std::sqrt(acc / static_cast<double>(n));
    }

    template <class Rhs>
    double initial_step(Rhs& rhs, double t, double t_end, const Vec& y) {
        auto scaled_norm = [&](const Vec& v) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                const double r = std::abs(v[i]) / (opts_.atol + opts_.rtol * std::abs(y[i]));
                acc += r * r;
            }
            return std::sqrt(acc / std::max<double>(1.0, static_cast<double>(v.size())));
        };
        const double d0 = scaled_norm(y), d1 = scaled_norm(k1_);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min({h0, t_end - t, opts_.h_max});
        y_tmp_ = y + h0 * k1_;
        rhs(t + h0, y_tmp_, k2_);
        ++stats_.evaluations;
        const double d2 = scaled_norm(k2_ - k1_) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                    : std::pow(0.01 / std::max(d1, d2), 0.2);
        return std::min({100 * h0, h1, opts_.h_max});
    }

    IntegratorOptions opts_;
    IntegratorStats stats_;
    double h_ = 0.0;
    double err_prev_ = 1e-4;
    bool reject_last_ = false;
    std::size_t steps_ = 0;
    Vec k1_, k2_, k3_, k4_, k5_, k6_, k7_, y_tmp_, y_new_, err_;
};

}  // namespace coopdet
