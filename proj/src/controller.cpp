#include "ccmnet/controller.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace ccmnet {

AuditResult admissibility_audit(const NetworkModel& model, const CCMCertificate& cert) {
    AuditResult out;
    const DirectedGraph& gc = model.communication();
    auto permitted_for = [&](int i) {
        std::set<int> nodes{i};
        for (int j : gc.inNeighbors(i)) nodes.insert(j);
        return nodes;
    };
    for (const auto& [ij, Yb] : cert.Y_blocks) {
        auto [i, j] = ij;
        if (!gc.hasEdge(i, j)) {
            std::ostringstream os;
            os << "gain block (" << i << "," << j << ") has no communication edge";
            out.violations.push_back(os.str());
        }
        auto permitted = permitted_for(i);
        for (const Variable& v : Yb.variables()) {
            if (v.kind != Variable::Kind::State || !permitted.count(v.node)) {
                std::ostringstream os;
                os << "gain block (" << i << "," << j << ") depends on " << v.str()
                   << " outside node " << i << "'s permitted slice";
                out.violations.push_back(os.str());
            }
        }
    }
    for (size_t k = 0; k < cert.W_blocks.size(); ++k) {
        for (const Variable& v : cert.W_blocks[k].variables()) {
            if (v.kind != Variable::Kind::State || v.node != static_cast<int>(k) + 1) {
                std::ostringstream os;
                os << "metric block " << k + 1 << " depends on " << v.str();
                out.violations.push_back(os.str());
            }
        }
    }
    out.pass = out.violations.empty();
    return out;
}

DistributedController::DistributedController(const NetworkModel& model,
                                             const CCMCertificate& cert, int S)
    : model_(model), eval_(model, cert), S_(S) {
    if (S < 1) throw std::invalid_argument("controller: S must be >= 1");
    auto audit = admissibility_audit(model, cert);
    if (!audit.pass)
        throw std::invalid_argument("controller: certificate fails admissibility: " +
                                    audit.violations.front());
    for (int i = 1; i <= model.numNodes(); ++i)
        const_W_.push_back(cert.W_blocks[i - 1].variables().empty());
}

GeodesicCurve DistributedController::geodesics(const Eigen::VectorXd& x_star,
                                               const Eigen::VectorXd& x) const {
    GeodesicCurve out;
    out.S = S_;
    for (int i = 1; i <= model_.numNodes(); ++i) {
        const int oi = model_.stateOffset(i), ni = model_.node(i).n;
        // metric block M_i = W_i^{-1}; W_i reads only x_i, so embedding the
        // block into a zero global state is sound
        auto M = [this, i, oi, ni](const Eigen::VectorXd& xi) {
            Eigen::VectorXd xg = Eigen::VectorXd::Zero(model_.stateDim());
            xg.segment(oi, ni) = xi;
            Eigen::MatrixXd W = eval_.evalWBlock(i, xg);
            return Eigen::MatrixXd(W.inverse());
        };
        out.nodes.push_back(node_geodesic(M, x_star.segment(oi, ni), x.segment(oi, ni), S_,
                                          const_W_[i - 1]));
    }
    return out;
}

Eigen::MatrixXd DistributedController::gainBlock(int i, int j, const Eigen::VectorXd& x) const {
    Eigen::MatrixXd Wj = eval_.evalWBlock(j, x);
    return eval_.evalYBlock(i, j, x) * Wj.inverse();
}

bool DistributedController::hasBlock(int i, int j) const {
    return eval_.certificate().Y_blocks.count({i, j}) > 0;
}

Eigen::VectorXd DistributedController::nodeControl(int i, const GeodesicCurve& curves,
                                                   const Eigen::VectorXd& u_star_i) const {
    const int mi = model_.node(i).m;
    if (static_cast<int>(curves.nodes.size()) != model_.numNodes())
        throw std::invalid_argument("nodeControl: missing node curves");
    for (const NodeCurve& c : curves.nodes)
        if (c.segments() != curves.S)
            throw std::invalid_argument("nodeControl: curves disagree on segment count");
    Eigen::VectorXd u = u_star_i;
    if (mi == 0) return u;
    const int n = model_.stateDim();
    const int S = curves.S;
    for (int p = 0; p < S; ++p) {
        Eigen::VectorXd xs(n);
        for (int k = 1; k <= model_.numNodes(); ++k)
            xs.segment(model_.stateOffset(k), model_.node(k).n) =
                0.5 * (curves.nodes[k - 1].samples.row(p) +
                       curves.nodes[k - 1].samples.row(p + 1));
        for (const auto& [ij, Yb] : eval_.certificate().Y_blocks) {
            if (ij.first != i) continue;
            const int j = ij.second;
            Eigen::VectorXd dj = curves.nodes[j - 1].samples.row(p + 1) -
                                 curves.nodes[j - 1].samples.row(p);
            u += gainBlock(i, j, xs) * dj;  // ds * S cancels the difference scale
        }
    }
    return u;
}

Eigen::VectorXd DistributedController::control(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& x_star,
                                               const Eigen::VectorXd& u_star) const {
    GeodesicCurve curves = geodesics(x_star, x);
    Eigen::VectorXd u(model_.inputDim());
    for (int i = 1; i <= model_.numNodes(); ++i) {
        const int oi = model_.inputOffset(i), mi = model_.node(i).m;
        if (mi == 0) continue;
        u.segment(oi, mi) = nodeControl(i, curves, u_star.segment(oi, mi));
    }
    return u;
}

}  // namespace ccmnet
