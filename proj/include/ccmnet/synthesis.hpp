#ifndef CCMNET_SYNTHESIS_HPP
#define CCMNET_SYNTHESIS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ccmnet/graph.hpp"
#include "ccmnet/lmi.hpp"
#include "ccmnet/network.hpp"
#include "ccmnet/polynomial.hpp"

namespace ccmnet {

/// Box region: closed interval per scalar variable, with per-kind defaults.
/// Missing entries are unbounded.
class Region {
public:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    void setStateDefault(double lo, double hi) { state_default_ = {lo, hi}; }
    void setInputDefault(double lo, double hi) { input_default_ = {lo, hi}; }
    void setInterval(const Variable& v, double lo, double hi);

    std::pair<double, double> interval(const Variable& v) const;
    bool isBounded(const Variable& v) const;

    const std::map<Variable, std::pair<double, double>>& overrides() const { return overrides_; }
    std::optional<std::pair<double, double>> stateDefault() const { return state_default_; }
    std::optional<std::pair<double, double>> inputDefault() const { return input_default_; }

private:
    std::optional<std::pair<double, double>> state_default_;
    std::optional<std::pair<double, double>> input_default_;
    std::map<Variable, std::pair<double, double>> overrides_;
};

struct SynthesisConfig {
    double lambda = 0.1;
    double epsilon = -1.0;  // <0: use 1e-3 * lambda * w_low
    double w_low = 1e-2;
    double w_high = 1e2;
    int max_degree_Y = 2;
    int max_degree_W = 0;   // 0 = constant metric blocks
    int grid_density = 3;
    int verify_density = 0;  // 0 = 2 * grid_density
    bool use_chordal = true;
    std::uint64_t seed = 0;
    Region region;
    std::size_t max_samples = 20000;  // lattice cap; seeded subsample beyond
    int solver_max_sweeps = 20000;
    int refine_rounds = 7;  // extra solve rounds after inter-sample violations
    // After a verified solve, retry with the negativity margin doubled this
    // many times, keeping the deepest margin that still verifies. Richer gain
    // patterns can then realize strictly stronger contraction, at extra cost.
    int margin_boost_rounds = 0;
    // After a verified solve, re-run synthesis at higher contraction rates —
    // doubling while it verifies, then bisecting toward the feasibility edge —
    // and keep the fastest verifying solution. A solution contracting at a
    // faster rate also satisfies the requested one, so the final certificate
    // is re-verified and stored at the requested rate; the faster closed loop
    // rejects disturbances more strongly. Each round is one full solve.
    int rate_boost_rounds = 0;

    double effectiveEpsilon() const { return epsilon > 0 ? epsilon : 1e-3 * lambda * w_low; }
    int effectiveVerifyDensity() const {
        return verify_density > 0 ? verify_density : 2 * grid_density;
    }
};

/// Gain sparsity/dependence skeleton derived from the communication graph:
/// block (i,j) present iff (i,j) is a communication edge; entries of row i may
/// depend on the variables of node i and its communication in-neighbors.
struct GainPattern {
    std::set<std::pair<int, int>> blocks;                 // 1-based (i,j)
    std::vector<std::vector<Variable>> allowed_vars;      // per node (0-based), x_i then x_vec_i
};
GainPattern xi_pattern(const DirectedGraph& g_c, const std::vector<NodeSpec>& nodes);

struct VerificationReport {
    bool pass = false;
    double worst_eigenvalue = 0.0;
    Eigen::VectorXd worst_x, worst_u;
    int density = 0;
    bool per_clique = false;     // true when checked clique-wise at scale
    std::size_t samples = 0;
};

struct CCMCertificate {
    std::vector<PolyMatrix> W_blocks;                     // per node, n_i x n_i, polys in x_i
    std::map<std::pair<int, int>, PolyMatrix> Y_blocks;   // (i,j) -> m_i x n_j
    double lambda = 0.0;
    double epsilon = 0.0;
    double w_low = 0.0, w_high = 0.0;
    Region region;
    std::string gp_fingerprint, gc_fingerprint;
    bool used_chordal = false;
    std::vector<std::vector<int>> cliques;                // decomposition used (may be empty)
    /// (node, clique index) -> symmetric polynomial shift of that node's
    /// diagonal block inside the clique-local term, in the node's own states.
    /// The shifts for one node sum to zero across its cliques at every point,
    /// so the reassembled matrix is unchanged; they let the solver choose how
    /// a shared diagonal block is split between cliques.
    std::map<std::pair<int, int>, PolyMatrix> clique_slacks;
    std::set<std::pair<int, int>> fill_edges;
    double margin_achieved = 0.0;                         // worst eigenvalue on verify grid
    VerificationReport verification;
};

/// Fast evaluation of a resolved certificate: W(x), Y(x), Wdot and the
/// synthesis matrix T at numeric points.
class CertificateEvaluator {
public:
    CertificateEvaluator(const NetworkModel& model, const CCMCertificate& cert);

    Eigen::MatrixXd evalWBlock(int i, const Eigen::VectorXd& x) const;  // 1-based node
    Eigen::MatrixXd evalYBlock(int i, int j, const Eigen::VectorXd& x) const;
    /// Directional derivative of W_i along the node-i dynamics rows g_i.
    Eigen::MatrixXd evalWdotBlock(int i, const StackedPoint& p, const Eigen::VectorXd& g_i) const;
    Eigen::MatrixXd evalW(const Eigen::VectorXd& x) const;
    /// T = -Wdot + A W + W A^T + B Y + (B Y)^T + 2 lambda W at the point,
    /// with Wdot the directional derivative along f + B u.
    Eigen::MatrixXd assembleT(const StackedPoint& p) const;
    Eigen::MatrixXd assembleT(const StackedPoint& p, double lambda_override) const;

    const NetworkModel& model() const { return model_; }
    const CCMCertificate& certificate() const { return cert_; }

private:
    const NetworkModel& model_;
    CCMCertificate cert_;
    std::vector<std::vector<CompiledPoly>> W_c_;          // per node, row-major
    std::map<std::pair<int, int>, std::vector<CompiledPoly>> Y_c_;
    std::vector<std::vector<CompiledPoly>> Wdot_dirs_;    // per node: dW/dx_k row-major stacked
};

/// Allocation of the patterned matrix T onto clique-local terms F_k so that
/// sum_k E_k^T F_k E_k reproduces T exactly. Diagonal blocks shared by q
/// cliques get weight 1/q each; off-diagonal blocks go to the lowest-index
/// clique containing both endpoints.
struct CliqueAllocation {
    std::vector<int> members;                             // node ids, ascending
    std::map<std::pair<int, int>, double> weights;        // (i,j) i<=j -> weight
};
std::vector<CliqueAllocation> chordal_split(int num_nodes,
                                            const std::set<std::pair<int, int>>& block_pattern,
                                            const CliqueTree& tree);

enum class SynthesisStatus { Verified, SynthesisFailed, VerifyFailed };

struct SynthesisResult {
    SynthesisStatus status = SynthesisStatus::SynthesisFailed;
    CCMCertificate certificate;
    std::string message;
    double worst_sample_value = 0.0;
    double synthesis_seconds = 0.0;
    std::size_t samples_used = 0;
};

/// Offline synthesis: grid-enforces the pointwise synthesis LMI (whole-matrix
/// or per-clique), solves for the metric/gain coefficients, then verifies on
/// the finer grid.
SynthesisResult solve_ccm(const NetworkModel& model, const SynthesisConfig& config);

/// Re-checks a resolved certificate on a grid of the given density.
VerificationReport verify_certificate(const NetworkModel& model, const CCMCertificate& cert,
                                      int density, std::uint64_t seed = 0,
                                      std::size_t max_samples = 200000,
                                      double lambda_override = -1.0);

/// Max over a sample grid of the Frobenius norm of
/// dW along b_col - (db_col/dx) W - W (db_col/dx)^T, per input column.
std::vector<double> killing_residual(const NetworkModel& model, const CCMCertificate& cert,
                                     int density = 3);

/// Decentralized shortcut: solves the inequality with R = diag(rho_i I_{m_i})
/// and converts via Y = -R B^T / 2. Requires a structurally zero Killing
/// residual (constant B suffices).
SynthesisResult corollary_R_synthesis(const NetworkModel& model, const SynthesisConfig& config,
                                      int rho_degree);

/// Searches for diagonal P > 0 and gain K making the linearization at an
/// equilibrium both Metzler and stable (positivity diagnostic for scalar-node
/// networks).
struct PositiveDiagnostic {
    bool exists = false;
    Eigen::VectorXd P_diag;
    Eigen::MatrixXd K;
};
PositiveDiagnostic local_positive_diagnostic(const NetworkModel& model, const Eigen::VectorXd& x_e,
                                             const Eigen::VectorXd& u_e, double tol = 1e-6);

}  // namespace ccmnet

#endif
