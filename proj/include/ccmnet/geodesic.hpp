#ifndef CCMNET_GEODESIC_HPP
#define CCMNET_GEODESIC_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace ccmnet {

/// Pointwise metric evaluator for one node block.
using MetricFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Discretized curve for one node: (S+1) x n_i samples at s_j = j/S, with the
/// endpoints pinned to the requested values.
struct NodeCurve {
    Eigen::MatrixXd samples;
    int segments() const { return static_cast<int>(samples.rows()) - 1; }
    Eigen::VectorXd at(int j) const { return samples.row(j); }
};

/// Per-node partition of a joint geodesic; all node curves share S.
struct GeodesicCurve {
    std::vector<NodeCurve> nodes;
    int S = 0;
};

/// Riemannian energy of the discretized curve, midpoint rule:
/// sum_j S * (dg_j)^T M(midpoint_j) (dg_j). Exact for constant M on straight
/// lines.
double curve_energy(const MetricFn& M, const NodeCurve& curve);

/// Minimal geodesic from a to b under metric M with S segments. When
/// `metric_constant` the straight line is returned directly (exact); otherwise
/// the discretized energy is minimized by coordinate descent over interior
/// samples, initialized at the straight line, until the energy decrease per
/// sweep drops below 1e-10 or the sweep budget runs out (the result is still a
/// valid upper bound on the energy).
NodeCurve node_geodesic(const MetricFn& M, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        int S, bool metric_constant, int max_sweeps = 400);

}  // namespace ccmnet

#endif
