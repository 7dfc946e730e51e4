#include "coopdet/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace coopdet {

using Eigen::VectorXd;
using Eigen::MatrixXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// B = theta I updated by every stored (s, y) pair, oldest first.
MatrixXd model_hessian(const std::deque<std::pair<VectorXd, VectorXd>>& pairs, double theta,
                       Eigen::Index n) {
    MatrixXd b = theta * MatrixXd::Identity(n, n);
    for (const auto& [s, y] : pairs) {
        const VectorXd bs = b * s;
        b += y * y.transpose() / y.dot(s) - bs * bs.transpose() / s.dot(bs);
    }
    return 0.5 * (b + b.transpose());
}

// Generalized Cauchy point: first local minimizer of the quadratic model along
// the projected path x(t) = P(x - t g).
VectorXd cauchy_point(const VectorXd& x, const VectorXd& g, const MatrixXd& b, const VectorXd& lo,
                      const VectorXd& hi) {
    const Eigen::Index n = x.size();
    VectorXd tbreak(n);
    VectorXd d = -g;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (g[i] < 0.0)
            tbreak[i] = hi[i] < kInf ? (x[i] - hi[i]) / g[i] : kInf;
        else if (g[i] > 0.0)
            tbreak[i] = lo[i] > -kInf ? (x[i] - lo[i]) / g[i] : kInf;
        else
            tbreak[i] = kInf;
        if (tbreak[i] <= 0.0) d[i] = 0.0;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto c) { return tbreak[a] < tbreak[c]; });

    VectorXd z = VectorXd::Zero(n);  // x(t) - x
    double t_prev = 0.0;
    std::size_t next = 0;
    while (next < order.size() && tbreak[order[next]] <= 0.0) ++next;

    for (;;) {
        if (d.isZero(0.0)) break;
        const VectorXd bd = b * d;
        const double f1 = g.dot(d) + z.dot(bd);
        const double f2 = d.dot(bd);
        if (f1 >= 0.0) break;
        const double t_next = next < order.size() ? tbreak[order[next]] : kInf;
        const double dt_min = f2 > 0.0 ? -f1 / f2 : kInf;
        if (dt_min < t_next - t_prev) {
            z += dt_min * d;
            break;
        }
        if (!(t_next < kInf)) break;  // unbounded descent; f2 <= 0 cannot happen for PD B
        z += (t_next - t_prev) * d;
        t_prev = t_next;
        while (next < order.size() && tbreak[order[next]] <= t_next) {
            const auto i = order[next++];
            d[i] = 0.0;
            z[i] = (g[i] < 0.0 ? hi[i] : lo[i]) - x[i];
        }
    }
    return project(x + z, lo, hi);
}

// Minimize the model over the variables free at xc, then truncate into the box.
VectorXd subspace_step(const VectorXd& x, const VectorXd& g, const MatrixXd& b, const VectorXd& xc,
                       const VectorXd& lo, const VectorXd& hi) {
    const Eigen::Index n = x.size();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
        if (xc[i] > lo[i] && xc[i] < hi[i]) free.push_back(i);
    if (free.empty()) return xc;

    const VectorXd r = g + b * (xc - x);
    const auto nf = static_cast<Eigen::Index>(free.size());
    MatrixXd bff(nf, nf);
    VectorXd rf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
        rf[a] = r[free[a]];
        for (Eigen::Index c = 0; c < nf; ++c) bff(a, c) = b(free[a], free[c]);
    }
    Eigen::LDLT<MatrixXd> ldlt(bff);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return xc;
    const VectorXd du = ldlt.solve(-rf);

    double alpha = 1.0;
    for (Eigen::Index a = 0; a < nf; ++a) {
        const auto i = free[a];
        if (du[a] > 0.0 && hi[i] < kInf) alpha = std::min(alpha, (hi[i] - xc[i]) / du[a]);
        if (du[a] < 0.0 && lo[i] > -kInf) alpha = std::min(alpha, (lo[i] - xc[i]) / du[a]);
    }
    VectorXd out = xc;
    for (Eigen::Index a = 0; a < nf; ++a) out[free[a]] += alpha * du[a];
    return project(out, lo, hi);
}

double max_feasible_step(const VectorXd& x, const VectorXd& p, const VectorXd& lo, const VectorXd& hi) {
    double step = kInf;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (p[i] > 0.0 && hi[i] < kInf) step = std::min(step, (hi[i] - x[i]) / p[i]);
        if (p[i] < 0.0 && lo[i] > -kInf) step = std::min(step, (lo[i] - x[i]) / p[i]);
    }
    return std::max(step, 0.0);
}

double cubic_min(double a, double fa, double da, double b, double fb, double db) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (disc < 0.0) return 0.5 * (a + b);
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!std::isfinite(t) || t <= lo + 0.1 * (hi - lo) || t >= hi - 0.1 * (hi - lo)) return 0.5 * (a + b);
    return t;
}

struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    double f = 0.0;
    VectorXd x, g;
};

// Strong-Wolfe search on [0, step_max] (Nocedal & Wright, Alg. 3.5/3.6).
LineSearchResult line_search(const Objective& fn, const VectorXd& x, double f0, const VectorXd& g0,
                             const VectorXd& p, double step0, double step_max,
                             const LbfgsbOptions& opts, int& evaluations) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    const double d0 = g0.dot(p);
    LineSearchResult out;
    if (!(d0 < 0.0)) return out;

    auto eval = [&](double a, double& f, double& d, VectorXd& xa, VectorXd& ga) {
        xa = x + a * p;
        ga.resize(x.size());
        f = fn(xa, ga);
        ++evaluations;
        d = ga.dot(p);
    };
    auto accept = [&](double a, double f, const VectorXd& xa, const VectorXd& ga) {
        out = {true, a, f, xa, ga};
    };

    auto zoom = [&](double lo, double f_lo, double d_lo, double hi, double f_hi, double d_hi, int budget) {
        VectorXd xa, ga;
        for (int k = 0; k < budget; ++k) {
            const double a = cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi);
            double f, d;
            eval(a, f, d, xa, ga);
            if (!std::isfinite(f) || f > f0 + c1 * a * d0 || f >= f_lo) {
                hi = a, f_hi = f, d_hi = d;
            } else {
                if (std::abs(d) <= -c2 * d0) return accept(a, f, xa, ga);
                if (d * (hi - lo) >= 0.0) hi = lo, f_hi = f_lo, d_hi = d_lo;
                lo = a, f_lo = f, d_lo = d;
            }
            if (std::abs(hi - lo) <= kEps * std::max(1.0, std::abs(lo))) break;
        }
        // Keep any sufficient-decrease point rather than failing outright.
        if (lo > 0.0) {
            eval(lo, f_lo, d_lo, xa, ga);
            accept(lo, f_lo, xa, ga);
        }
    };

    double a_prev = 0.0, f_prev = f0, d_prev = d0;
    double a = std::min(step0, step_max);
    VectorXd xa, ga;
    for (int k = 0; k < opts.max_line_search; ++k) {
        double f, d;
        eval(a, f, d, xa, ga);
        if (!std::isfinite(f) || f > f0 + c1 * a * d0 || (k > 0 && f >= f_prev)) {
            zoom(a_prev, f_prev, d_prev, a, f, d, opts.max_line_search - k);
            return out;
        }
        if (std::abs(d) <= -c2 * d0) {
            accept(a, f, xa, ga);
            return out;
        }
        if (d >= 0.0) {
            zoom(a, f, d, a_prev, f_prev, d_prev, opts.max_line_search - k);
            return out;
        }
        if (a >= step_max) {
            accept(a, f, xa, ga);  // still descending at the wall of the box
            return out;
        }
        a_prev = a, f_prev = f, d_prev = d;
        a = std::min(2.0 * a, step_max);
    }
    return out;
}

}  // namespace

double projected_gradient_norm(const VectorXd& x, const VectorXd& g, const VectorXd& lower,
                               const VectorXd& upper) {
    return (project(x - g, lower, upper) - x).lpNorm<Eigen::Infinity>();
}

LbfgsbResult minimize_lbfgsb(const Objective& fn, VectorXd x0, const VectorXd& lower,
                             const VectorXd& upper, const LbfgsbOptions& opts) {
    const Eigen::Index n = x0.size();
    if (lower.size() != n || upper.size() != n)
        throw std::invalid_argument("lbfgsb: bound dimensions do not match x0");
    if ((lower.array() > upper.array()).any()) throw std::invalid_argument("lbfgsb: lower > upper");

    LbfgsbResult res;
    res.x = project(x0, lower, upper);
    VectorXd g(n);
    res.f = fn(res.x, g);
    res.evaluations = 1;
    res.history.push_back(res.f);
    if (!std::isfinite(res.f)) {
        res.message = "objective is not finite at the starting point";
        return res;
    }

    std::deque<std::pair<VectorXd, VectorXd>> pairs;
    double theta = 1.0;

    for (res.iterations = 0; res.iterations < opts.max_iterations;) {
        if (projected_gradient_norm(res.x, g, lower, upper) <= opts.pgtol) {
            res.converged = true;
            res.message = "projected gradient below tolerance";
            return res;
        }

        const MatrixXd b = model_hessian(pairs, theta, n);
        const VectorXd xc = cauchy_point(res.x, g, b, lower, upper);
        const VectorXd xbar = subspace_step(res.x, g, b, xc, lower, upper);
        VectorXd p = xbar - res.x;
        if (!(g.dot(p) < 0.0)) {
            // The model lost descent; fall back to the projected gradient path.
            p = project(res.x - g, lower, upper) - res.x;
            pairs.clear();
            theta = 1.0;
        }
        const double step_max = max_feasible_step(res.x, p, lower, upper);
        const double step0 = (pairs.empty() && res.iterations == 0)
                                 ? std::min(1.0, 1.0 / std::max(p.norm(), kEps))
                                 : 1.0;

        const auto ls = line_search(fn, res.x, res.f, g, p, step0, step_max, opts, res.evaluations);
        if (!ls.ok) {
            if (pairs.empty()) {
                res.message = "line search failed";
                return res;
            }
            pairs.clear();
            theta = 1.0;
            continue;
        }

        const VectorXd s = ls.x - res.x;
        const VectorXd y = ls.g - g;
        const double f_old = res.f;
        res.x = ls.x;
        res.f = ls.f;
        g = ls.g;
        ++res.iterations;
        res.history.push_back(res.f);

        const double sy = s.dot(y);
        if (sy > kEps * y.squaredNorm()) {
            pairs.emplace_back(s, y);
            if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
            theta = y.squaredNorm() / sy;
        }

        if ((f_old - res.f) <= opts.ftol * std::max({std::abs(f_old), std::abs(res.f), 1.0})) {
            res.converged = true;
            res.message = "relative reduction below tolerance";
            return res;
        }
    }
    res.message = "iteration limit reached";
    return res;
}

}  // namespace coopdet
