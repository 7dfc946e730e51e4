#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "coopdet/lbfgsb.hpp"

using namespace coopdet;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using doctest::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exhaustive active-set solve of min 1/2 x'Ax + b'x on a box (n <= 4).
VectorXd box_qp_oracle(const MatrixXd& a, const VectorXd& b, const VectorXd& lo, const VectorXd& hi) {
    const auto n = a.rows();
    VectorXd best;
    double best_f = kInf;
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 3;
    for (int code = 0; code < combos; ++code) {
        VectorXd x = VectorXd::Zero(n);
        std::vector<Eigen::Index> free;
        int c = code;
        for (Eigen::Index i = 0; i < n; ++i, c /= 3) {
            if (c % 3 == 0) free.push_back(i);
            else x[i] = c % 3 == 1 ? lo[i] : hi[i];
        }
        if (!free.empty()) {
            const auto nf = static_cast<Eigen::Index>(free.size());
            MatrixXd aff(nf, nf);
            VectorXd rhs(nf);
            for (Eigen::Index p = 0; p < nf; ++p) {
                rhs[p] = -b[free[p]];
                for (Eigen::Index i = 0; i < n; ++i)
                    if (std::find(free.begin(), free.end(), i) == free.end()) rhs[p] -= a(free[p], i) * x[i];
                for (Eigen::Index q = 0; q < nf; ++q) aff(p, q) = a(free[p], free[q]);
            }
            const VectorXd xf = aff.ldlt().solve(rhs);
            for (Eigen::Index p = 0; p < nf; ++p) x[free[p]] = xf[p];
        }
        if ((x.array() < lo.array() - 1e-12).any() || (x.array() > hi.array() + 1e-12).any()) continue;
        const double f = 0.5 * x.dot(a * x) + b.dot(x);
        if (f < best_f) best_f = f, best = x;
    }
    return best;
}

}  // namespace

TEST_CASE("unconstrained Rosenbrock") {
    const Objective rosen = [](const VectorXd& x, VectorXd& g) {
        g.resize(2);
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    const VectorXd lo = VectorXd::Constant(2, -kInf), hi = VectorXd::Constant(2, kInf);
    const auto r = minimize_lbfgsb(rosen, VectorXd::Constant(2, -1.2), lo, hi);
    CHECK(r.converged);
    CHECK(r.x[0] == Approx(1.0).epsilon(1e-6));
    CHECK(r.x[1] == Approx(1.0).epsilon(1e-6));
    CHECK(r.history.front() > r.history.back());
}

TEST_CASE("bound-constrained Rosenbrock stops on the active bound") {
    const Objective rosen = [](const VectorXd& x, VectorXd& g) {
        g.resize(2);
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    VectorXd lo(2), hi(2);
    lo << -2.0, -2.0;
    hi << 0.5, 2.0;
    const auto r = minimize_lbfgsb(rosen, VectorXd::Zero(2), lo, hi);
    CHECK(r.x[0] == Approx(0.5).epsilon(1e-10));
    CHECK(r.x[1] == Approx(0.25).epsilon(1e-6));
}

TEST_CASE("property: random box QPs match the active-set oracle") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 3;
        MatrixXd q(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) q(i, j) = n01(rng);
        const MatrixXd a = q * q.transpose() + 0.1 * MatrixXd::Identity(n, n);
        VectorXd b(n), lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            b[i] = 3.0 * n01(rng);
            lo[i] = -std::abs(n01(rng));
            hi[i] = std::abs(n01(rng));
        }
        const Objective fn = [&](const VectorXd& x, VectorXd& g) {
            g = a * x + b;
            return 0.5 * x.dot(a * x) + b.dot(x);
        };
        const auto r = minimize_lbfgsb(fn, VectorXd::Zero(n), lo, hi);
        const VectorXd expected = box_qp_oracle(a, b, lo, hi);
        CHECK((r.x - expected).lpNorm<Eigen::Infinity>() < 1e-6);
        CHECK((r.x.array() >= lo.array()).all());
        CHECK((r.x.array() <= hi.array()).all());
        VectorXd g;
        fn(r.x, g);
        CHECK(projected_gradient_norm(r.x, g, lo, hi) < 1e-6);
    }
}

TEST_CASE("starting point outside the box is projected") {
    const Objective fn = [](const VectorXd& x, VectorXd& g) {
        g = 2.0 * x;
        return x.squaredNorm();
    };
    const VectorXd lo = VectorXd::Constant(3, 1.0), hi = VectorXd::Constant(3, 2.0);
    const auto r = minimize_lbfgsb(fn, VectorXd::Constant(3, 10.0), lo, hi);
    CHECK(r.converged);
    CHECK((r.x - lo).norm() < 1e-12);
    CHECK_THROWS_AS(minimize_lbfgsb(fn, VectorXd::Zero(2), lo, hi), std::invalid_argument);
}
