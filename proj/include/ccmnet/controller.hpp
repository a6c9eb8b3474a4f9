#ifndef CCMNET_CONTROLLER_HPP
#define CCMNET_CONTROLLER_HPP

#include <string>
#include <vector>

#include "ccmnet/geodesic.hpp"
#include "ccmnet/synthesis.hpp"

namespace ccmnet {

struct AuditResult {
    bool pass = true;
    std::vector<std::string> violations;
};

/// Static dependence check: every gain block K_ij = Y_ij W_j^{-1} must sit on
/// a communication edge, read only the states of node i and its communication
/// in-neighbors, and every W_j must depend on x_j alone.
AuditResult admissibility_audit(const NetworkModel& model, const CCMCertificate& cert);

/// The online control law recovered from a certificate. Per step: each node
/// computes its geodesic from x*_i to x_i under M_i = W_i^{-1}, then
/// integrates u_i = u*_i + sum_j int_0^1 K_ij(gamma(s)) dgamma_j(s) by
/// midpoint quadrature over S panels. Constant metric blocks use the exact
/// straight-line geodesic, and constant gains reduce to
/// u = u* + K (x - x*) exactly at any S.
class DistributedController {
public:
    DistributedController(const NetworkModel& model, const CCMCertificate& cert, int S = 16);

    /// Per-node geodesics for the whole network (independent by separability).
    GeodesicCurve geodesics(const Eigen::VectorXd& x_star, const Eigen::VectorXd& x) const;

    /// Control for node i given the network curves and the node's feedforward.
    /// Throws if a permitted neighbor's curve is missing or has mismatched S.
    Eigen::VectorXd nodeControl(int i, const GeodesicCurve& curves,
                                const Eigen::VectorXd& u_star_i) const;

    /// Stacked control at state x against target (x*, u*).
    Eigen::VectorXd control(const Eigen::VectorXd& x, const Eigen::VectorXd& x_star,
                            const Eigen::VectorXd& u_star) const;

    /// Numeric differential gain K_ij(x) = Y_ij(x) W_j(x_j)^{-1}.
    Eigen::MatrixXd gainBlock(int i, int j, const Eigen::VectorXd& x) const;
    bool hasBlock(int i, int j) const;
    bool metricConstant(int i) const { return const_W_[i - 1]; }
    int segments() const { return S_; }
    const CertificateEvaluator& evaluator() const { return eval_; }

private:
    const NetworkModel& model_;
    CertificateEvaluator eval_;
    int S_;
    std::vector<bool> const_W_;
};

}  // namespace ccmnet

#endif
