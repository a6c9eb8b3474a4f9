#ifndef CCMNET_HINF_HPP
#define CCMNET_HINF_HPP

#include <Eigen/Dense>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ccmnet {

/// Structured state-feedback H-infinity design:
///   xdot = A x + B u + H w,  y = C x + D u
/// minimizes the L2 gain bound alpha subject to Q block-diagonal (blocks sized
/// by node_state_dims) and Z restricted to the given block pattern, via
/// bisection on alpha over the bounded-real feasibility LMI
///   [ AQ + BZ + (.)^T   H      (CQ + DZ)^T ]
///   [ H^T              -aI     0           ]  < 0,  Q > 0.
///   [ CQ + DZ           0     -aI          ]
/// After the smallest feasible alpha is found, alpha is fixed (with a small
/// relative slack) and the smallest eigenvalue of Q is pushed up before
/// recovering K = Z Q^{-1}.
struct HinfResult {
    bool success = false;
    double alpha = 0.0;
    Eigen::MatrixXd K;
    Eigen::MatrixXd Q, Z;
    std::string message;
};

HinfResult hinf_structured(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& H, const Eigen::MatrixXd& C,
                           const Eigen::MatrixXd& D,
                           const std::vector<int>& node_state_dims,
                           const std::vector<int>& node_input_dims,
                           const std::set<std::pair<int, int>>& z_blocks,
                           double alpha_lo = 1e-6, double alpha_hi = 1e9,
                           double log_tol = 5e-3);

}  // namespace ccmnet

#endif
