#ifndef CCMNET_NETWORK_HPP
#define CCMNET_NETWORK_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ccmnet/graph.hpp"
#include "ccmnet/polynomial.hpp"

namespace ccmnet {

/// Per-node dynamics x_i' = f_i(x_i, x_breve_i) + b_i(x_i, x_breve_i) u_i.
/// f_i is n_i x 1; b_i is n_i x m_i (m_i = 0 means no direct input).
struct NodeSpec {
    int n = 0;
    int m = 0;
    PolyMatrix f;  // n x 1
    PolyMatrix b;  // n x m
};

/// Polynomial compiled against the stacked (x, u) coordinates for fast
/// repeated evaluation.
class CompiledPoly {
public:
    struct Term {
        double coeff;
        std::vector<std::pair<int, int>> powers;  // (stacked index, exponent); inputs offset by n
    };
    double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    bool isZero() const { return terms_.empty(); }

private:
    friend class NetworkModel;
    std::vector<Term> terms_;
};

struct StackedPoint {
    Eigen::VectorXd x;
    Eigen::VectorXd u;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// The networked system (nodes + physical graph + communication graph) with
/// the stacked-coordinate bookkeeping. Immutable after construction.
class NetworkModel {
public:
    NetworkModel(std::vector<NodeSpec> nodes, DirectedGraph g_p, DirectedGraph g_c);

    int numNodes() const { return static_cast<int>(nodes_.size()); }
    int stateDim() const { return n_; }
    int inputDim() const { return m_; }
    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const NodeSpec& node(int i) const { return nodes_.at(i - 1); }  // 1-based
    const DirectedGraph& physical() const { return g_p_; }
    const DirectedGraph& communication() const { return g_c_; }

    int stateOffset(int i) const { return x_off_.at(i - 1); }
    int inputOffset(int i) const { return u_off_.at(i - 1); }

    /// Stacked index of a variable (states in [0,n), inputs offset by n).
    int variableIndex(const Variable& v) const;
    Variable stateVariable(int stacked_index) const;  // inverse for states

    /// Ordered state variables x[1][1], x[1][2], ..., x[N][n_N].
    const std::vector<Variable>& stateVariables() const { return state_vars_; }
    const std::vector<Variable>& inputVariables() const { return input_vars_; }

    /// Stacked f (n x 1) and block-diagonal B (n x m).
    const PolyMatrix& stackedF() const { return f_; }
    const PolyMatrix& stackedB() const { return B_; }

    /// Symbolic Jacobian of f + B u with respect to x (entries polynomial in
    /// both x and u).
    const PolyMatrix& symbolicA() const { return A_sym_; }

    /// A = d(f+Bu)/dx and B evaluated at a point.
    void differentialMatrices(const StackedPoint& p, Eigen::MatrixXd& A,
                              Eigen::MatrixXd& Beval) const;

    /// Dependence/dimension consistency checks; never throws for violations.
    ValidationReport validate() const;

    CompiledPoly compile(const Polynomial& p) const;
    double evalCompiled(const CompiledPoly& c, const StackedPoint& p) const {
        return c.eval(p.x, p.u);
    }
    Eigen::VectorXd evalF(const StackedPoint& p) const;       // f(x)
    Eigen::MatrixXd evalB(const Eigen::VectorXd& x) const;    // B(x)

private:
    std::vector<NodeSpec> nodes_;
    DirectedGraph g_p_;
    DirectedGraph g_c_;
    int n_ = 0, m_ = 0;
    std::vector<int> x_off_, u_off_;
    std::vector<Variable> state_vars_, input_vars_;
    PolyMatrix f_, B_, A_sym_;
    std::vector<CompiledPoly> f_c_, B_c_, A_c_;  // row-major compiled entries
};

}  // namespace ccmnet

#endif
