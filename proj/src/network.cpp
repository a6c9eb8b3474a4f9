#include "ccmnet/network.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ccmnet {

double CompiledPoly::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    const int n = static_cast<int>(x.size());
    double sum = 0.0;
    for (const Term& t : terms_) {
        double val = t.coeff;
        for (const auto& [idx, e] : t.powers) {
            double b = idx < n ? x[idx] : u[idx - n];
            double p = b;
            for (int k = 1; k < e; ++k) p *= b;
            val *= p;
        }
        sum += val;
    }
    return sum;
}

NetworkModel::NetworkModel(std::vector<NodeSpec> nodes, DirectedGraph g_p, DirectedGraph g_c)
    : nodes_(std::move(nodes)), g_p_(std::move(g_p)), g_c_(std::move(g_c)) {
    const int N = static_cast<int>(nodes_.size());
    if (N == 0) throw std::invalid_argument("NetworkModel: no nodes");
    if (g_p_.numNodes() != N || g_c_.numNodes() != N)
        throw std::invalid_argument("NetworkModel: graph node count mismatch");
    for (const NodeSpec& nd : nodes_) {
        x_off_.push_back(n_);
        u_off_.push_back(m_);
        n_ += nd.n;
        m_ += nd.m;
        if (nd.n <= 0) throw std::invalid_argument("NetworkModel: node state dimension must be positive");
        if (nd.m < 0) throw std::invalid_argument("NetworkModel: negative input dimension");
        if (nd.f.rows() != nd.n || nd.f.cols() != 1)
            throw std::invalid_argument("NetworkModel: f_i dimension mismatch");
        if (nd.b.rows() != nd.n || nd.b.cols() != nd.m)
            throw std::invalid_argument("NetworkModel: b_i dimension mismatch");
    }
    for (int i = 1; i <= N; ++i) {
        for (int k = 1; k <= node(i).n; ++k)
            state_vars_.push_back({i, Variable::Kind::State, k});
        for (int k = 1; k <= node(i).m; ++k)
            input_vars_.push_back({i, Variable::Kind::Input, k});
    }

    // Stacked f and block-diagonal B.
    f_ = PolyMatrix(n_, 1);
    B_ = PolyMatrix(n_, m_);
    for (int i = 1; i <= N; ++i) {
        const NodeSpec& nd = node(i);
        for (int r = 0; r < nd.n; ++r) {
            f_.at(stateOffset(i) + r, 0) = nd.f.at(r, 0);
            for (int c = 0; c < nd.m; ++c)
                B_.at(stateOffset(i) + r, inputOffset(i) + c) = nd.b.at(r, c);
        }
    }

    // A(x,u) = d/dx [ f + B u ], with u treated symbolically.
    PolyMatrix g(n_, 1);
    for (int r = 0; r < n_; ++r) {
        Polynomial acc = f_.at(r, 0);
        for (int c = 0; c < m_; ++c)
            acc = acc + B_.at(r, c) * Polynomial::variable(input_vars_[c]);
        g.at(r, 0) = acc;
    }
    A_sym_ = jacobian(g, state_vars_);

    for (int r = 0; r < n_; ++r) f_c_.push_back(compile(f_.at(r, 0)));
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < m_; ++c) B_c_.push_back(compile(B_.at(r, c)));
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) A_c_.push_back(compile(A_sym_.at(r, c)));
}

int NetworkModel::variableIndex(const Variable& v) const {
    if (v.node < 1 || v.node > numNodes())
        throw std::invalid_argument("variableIndex: node out of range: " + v.str());
    const NodeSpec& nd = node(v.node);
    if (v.kind == Variable::Kind::State) {
        if (v.component < 1 || v.component > nd.n)
            throw std::invalid_argument("variableIndex: state component out of range: " + v.str());
        return stateOffset(v.node) + v.component - 1;
    }
    if (v.component < 1 || v.component > nd.m)
        throw std::invalid_argument("variableIndex: input component out of range: " + v.str());
    return n_ + inputOffset(v.node) + v.component - 1;
}

Variable NetworkModel::stateVariable(int stacked_index) const {
    return state_vars_.at(stacked_index);
}

CompiledPoly NetworkModel::compile(const Polynomial& p) const {
    CompiledPoly out;
    for (const auto& [m, c] : p.terms()) {
        CompiledPoly::Term t;
        t.coeff = c;
        for (const auto& [v, e] : m) t.powers.push_back({variableIndex(v), e});
        out.terms_.push_back(std::move(t));
    }
    return out;
}

void NetworkModel::differentialMatrices(const StackedPoint& p, Eigen::MatrixXd& A,
                                        Eigen::MatrixXd& Beval) const {
    if (p.x.size() != n_ || p.u.size() != m_)
        throw std::invalid_argument("differentialMatrices: point dimension mismatch");
    A.resize(n_, n_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) A(r, c) = A_c_[r * n_ + c].eval(p.x, p.u);
    Beval = evalB(p.x);
}

Eigen::VectorXd NetworkModel::evalF(const StackedPoint& p) const {
    Eigen::VectorXd out(n_);
    for (int r = 0; r < n_; ++r) out[r] = f_c_[r].eval(p.x, p.u);
    return out;
}

Eigen::MatrixXd NetworkModel::evalB(const Eigen::VectorXd& x) const {
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(m_);
    Eigen::MatrixXd out(n_, m_);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < m_; ++c) out(r, c) = B_c_[r * m_ + c].eval(x, u0);
    return out;
}

ValidationReport NetworkModel::validate() const {
    ValidationReport rep;
    const int N = numNodes();
    for (int i = 1; i <= N; ++i) {
        if (!g_p_.hasEdge(i, i))
            rep.violations.push_back("physical graph missing self-loop at node " +
                                     std::to_string(i));
        if (!g_c_.hasEdge(i, i))
            rep.violations.push_back("communication graph missing self-loop at node " +
                                     std::to_string(i));
        const NodeSpec& nd = node(i);
        auto check_vars = [&](const PolyMatrix& mat, const std::string& what) {
            for (const Variable& v : mat.variables()) {
                if (v.kind == Variable::Kind::Input) {
                    rep.violations.push_back(what + " of node " + std::to_string(i) +
                                             " references input variable " + v.str());
                    continue;
                }
                if (v.node < 1 || v.node > N) {
                    rep.violations.push_back(what + " of node " + std::to_string(i) +
                                             " references out-of-range node in " + v.str());
                    continue;
                }
                if (!g_p_.hasEdge(v.node, i))
                    rep.violations.push_back(what + " of node " + std::to_string(i) +
                                             " depends on " + v.str() + " but (" +
                                             std::to_string(v.node) + "," + std::to_string(i) +
                                             ") is not a physical edge");
                else if (v.component < 1 || v.component > node(v.node).n)
                    rep.violations.push_back(what + " of node " + std::to_string(i) +
                                             " references bad component " + v.str());
            }
        };
        check_vars(nd.f, "f");
        check_vars(nd.b, "b");
    }
    return rep;
}

}  // namespace ccmnet
