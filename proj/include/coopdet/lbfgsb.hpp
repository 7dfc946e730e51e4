// lbfgsb.hpp: limited-memory BFGS with simple bounds
//
// Byrd, Lu, Nocedal & Zhu (1995): each iteration finds the generalized Cauchy
// point of the quadratic model along the projected steepest-descent path, then
// minimizes the model over the variables still free there, truncating the step
// to stay inside the box, and finishes with a strong-Wolfe line search. The
// limited-memory matrix is kept as a dense n x n array (n is small here).

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coopdet {

struct LbfgsbOptions {
    int memory = 10;
    int max_iterations = 2000;
    double pgtol = 1e-10;        // stop when the projected gradient inf-norm falls below
    double ftol = 1e-13;         // relative objective decrease that counts as stalled
    int max_line_search = 40;
};

// Returns f(x) and writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsbResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> history;  // f after each iteration, starting with f(x0)
};

// lower/upper may hold -inf/+inf. x0 is projected into the box first.
LbfgsbResult minimize_lbfgsb(const Objective& fn, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LbfgsbOptions& opts = {});

// inf-norm of P(x - g) - x.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

}  // namespace coopdet
