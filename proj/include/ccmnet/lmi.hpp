#ifndef CCMNET_LMI_HPP
#define CCMNET_LMI_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ccmnet {

/// Affine symmetric-matrix constraint G(theta) = base + sum_k theta[var_k] C_k,
/// required to satisfy lambda_max(G(theta)) <= -margin. Coefficient matrices
/// are stored as upper-triangle triplets; a triplet with r != c stands for the
/// symmetric pair (r,c),(c,r).
struct AffineConstraint {
    struct Triplet {
        std::int32_t var;
        std::int16_t r, c;
        double val;
    };
    int dim = 0;
    Eigen::MatrixXd base;
    std::vector<Triplet> triplets;
    double margin = 0.0;

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& theta) const;
    /// lambda_max of G(theta) plus the required margin (<=0 means satisfied).
    double violation(const Eigen::VectorXd& theta, Eigen::VectorXd* eigvec = nullptr) const;
};

enum class LmiStatus { Feasible, Infeasible, Inconclusive };

struct LmiResult {
    LmiStatus status = LmiStatus::Inconclusive;
    Eigen::VectorXd decisions;
    double worst_value = 0.0;  // max violation at the returned point
    int worst_index = -1;
    int sweeps_used = 0;
};

struct LmiOptions {
    int max_sweeps = 600;
    double over_relax = 1.6;
    double slack = 0.0;       // extra depth added to every cut during solving
    int cut_cache = 96;       // recent scalar cuts re-projected each step
    double step_limit = 1e6;  // guard against runaway steps
};

/// Feasibility: find theta with every constraint satisfied, by sequential
/// projection onto eigenvector cuts (Polyak steps) with a cache of recent
/// cuts acting as a cutting-plane refinement. Deterministic. Infeasibility is
/// reported only for structurally contradictory cuts; otherwise exhaustion of
/// the sweep budget yields Inconclusive with the worst violated constraint.
LmiResult lmi_feasibility(const std::vector<AffineConstraint>& constraints, int num_vars,
                          const Eigen::VectorXd& theta0, const LmiOptions& opts = {});

/// Minimizes a scalar by bisection over feasibility subproblems. `build`
/// produces the constraint set for a candidate scalar value; the predicate is
/// assumed monotone (feasible above the optimum). Returns the smallest value
/// in [lo, hi] found feasible within `tol`, with its decision vector.
struct BisectResult {
    bool success = false;
    double value = 0.0;
    Eigen::VectorXd decisions;
};
BisectResult lmi_bisect_min(
    const std::function<std::vector<AffineConstraint>(double)>& build, int num_vars,
    const Eigen::VectorXd& theta0, double lo, double hi, double tol, const LmiOptions& opts = {});

}  // namespace ccmnet

#endif
