#include "ccmnet/hinf.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ccmnet/lmi.hpp"

namespace ccmnet {

namespace {

struct Layout {
    std::vector<int> x_off, u_off;  // per node
    int n = 0, m = 0;
    // decision vector: Q entries (per node, upper triangle), then Z entries
    std::vector<int> q_var;  // flat index by (node, r, c) lookup below
    int num_q = 0, num_vars = 0;
    std::vector<std::tuple<int, int, int>> q_entries;  // (node, r, c) global coords
    std::vector<std::pair<int, int>> z_entries;        // (global input row, global state col)
};

Layout make_layout(const std::vector<int>& ns, const std::vector<int>& ms,
                   const std::set<std::pair<int, int>>& z_blocks) {
    Layout L;
    const int N = static_cast<int>(ns.size());
    for (int i = 0; i < N; ++i) {
        L.x_off.push_back(L.n);
        L.u_off.push_back(L.m);
        L.n += ns[i];
        L.m += ms[i];
    }
    for (int i = 0; i < N; ++i)
        for (int r = 0; r < ns[i]; ++r)
            for (int c = r; c < ns[i]; ++c)
                L.q_entries.push_back({i, L.x_off[i] + r, L.x_off[i] + c});
    L.num_q = static_cast<int>(L.q_entries.size());
    for (const auto& [i, j] : z_blocks) {
        if (i < 1 || i > N || j < 1 || j > N)
            throw std::invalid_argument("hinf_structured: block index out of range");
        for (int r = 0; r < ms[i - 1]; ++r)
            for (int c = 0; c < ns[j - 1]; ++c)
                L.z_entries.push_back({L.u_off[i - 1] + r, L.x_off[j - 1] + c});
    }
    L.num_vars = L.num_q + static_cast<int>(L.z_entries.size());
    return L;
}

void add_sym(AffineConstraint& con, int var, int r, int c, double v) {
    if (v == 0.0) return;
    if (r > c) std::swap(r, c);
    con.triplets.push_back({var, static_cast<std::int16_t>(r), static_cast<std::int16_t>(c), v});
}

// Adds the symmetrized placement G += M + M^T where M has a single entry v at
// global position (row0 + r, col0 + c).
void add_block(AffineConstraint& con, int var, int row0, int col0, int r, int c, double v) {
    if (v == 0.0) return;
    int gr = row0 + r, gc = col0 + c;
    if (gr == gc) {
        con.triplets.push_back(
            {var, static_cast<std::int16_t>(gr), static_cast<std::int16_t>(gc), 2.0 * v});
    } else {
        if (gr > gc) std::swap(gr, gc);
        con.triplets.push_back(
            {var, static_cast<std::int16_t>(gr), static_cast<std::int16_t>(gc), v});
    }
}

}  // namespace

HinfResult hinf_structured(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& H, const Eigen::MatrixXd& C,
                           const Eigen::MatrixXd& D,
                           const std::vector<int>& node_state_dims,
                           const std::vector<int>& node_input_dims,
                           const std::set<std::pair<int, int>>& z_blocks, double alpha_lo,
                           double alpha_hi, double log_tol) {
    Layout L = make_layout(node_state_dims, node_input_dims, z_blocks);
    if (A.rows() != L.n || A.cols() != L.n || B.rows() != L.n || B.cols() != L.m ||
        H.rows() != L.n || C.cols() != L.n || D.rows() != C.rows() || D.cols() != L.m)
        throw std::invalid_argument("hinf_structured: dimension mismatch");
    const int n = L.n, nw = static_cast<int>(H.cols()), ny = static_cast<int>(C.rows());
    const int dim = n + nw + ny;

    // The bounded-real LMI at a given alpha, plus Q >= q_floor I.
    auto build = [&](double alpha, double q_floor) {
        std::vector<AffineConstraint> cons;
        AffineConstraint big;
        big.dim = dim;
        big.base = Eigen::MatrixXd::Zero(dim, dim);
        big.base.block(0, n, n, nw) = H;
        big.base.block(n, 0, nw, n) = H.transpose();
        big.base.block(n, n, nw, nw) = -alpha * Eigen::MatrixXd::Identity(nw, nw);
        big.base.block(n + nw, n + nw, ny, ny) = -alpha * Eigen::MatrixXd::Identity(ny, ny);
        big.margin = 1e-9 * std::max(1.0, alpha);
        for (int k = 0; k < L.num_q; ++k) {
            auto [node, gr, gc] = L.q_entries[k];
            // S = e_gr e_gc^T + e_gc e_gr^T (single term when gr == gc)
            // top-left: A S + S A^T
            for (int r = 0; r < n; ++r) {
                add_block(big, k, 0, 0, r, gc, A(r, gr));
                if (gr != gc) add_block(big, k, 0, 0, r, gr, A(r, gc));
            }
            // bottom-left: C S at block (2,0)
            for (int r = 0; r < ny; ++r) {
                add_block(big, k, n + nw, 0, r, gc, C(r, gr));
                if (gr != gc) add_block(big, k, n + nw, 0, r, gr, C(r, gc));
            }
        }
        for (size_t k = 0; k < L.z_entries.size(); ++k) {
            int var = L.num_q + static_cast<int>(k);
            auto [ur, xc] = L.z_entries[k];
            for (int r = 0; r < n; ++r) add_block(big, var, 0, 0, r, xc, B(r, ur));
            for (int r = 0; r < ny; ++r) add_block(big, var, n + nw, 0, r, xc, D(r, ur));
        }
        cons.push_back(std::move(big));

        AffineConstraint qpos;  // q_floor I - Q <= 0
        qpos.dim = n;
        qpos.base = q_floor * Eigen::MatrixXd::Identity(n, n);
        for (int k = 0; k < L.num_q; ++k) {
            auto [node, gr, gc] = L.q_entries[k];
            add_sym(qpos, k, gr, gc, -1.0);
        }
        cons.push_back(std::move(qpos));
        return cons;
    };

    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(L.num_vars);
    for (int k = 0; k < L.num_q; ++k) {
        auto [node, gr, gc] = L.q_entries[k];
        if (gr == gc) theta0[k] = 1.0;
    }

    HinfResult out;
    LmiOptions opts;
    opts.max_sweeps = 800;

    // stage 1: bisection on log(alpha)
    auto bis = lmi_bisect_min(
        [&](double la) { return build(std::exp(la), 1e-6); }, L.num_vars, theta0,
        std::log(alpha_lo), std::log(alpha_hi), log_tol, opts);
    if (!bis.success) {
        out.message = "infeasible up to the alpha upper bound";
        return out;
    }
    double alpha = std::exp(bis.value) * 1.02;  // small slack before conditioning Q

    // stage 2: maximize min-eig(Q) at fixed alpha
    Eigen::VectorXd theta = bis.decisions;
    double lo = 1e-6, hi = 1e-3;
    while (hi < 1e9) {  // grow until infeasible
        auto r = lmi_feasibility(build(alpha, hi), L.num_vars, theta, opts);
        if (r.status != LmiStatus::Feasible) break;
        theta = r.decisions;
        lo = hi;
        hi *= 8.0;
    }
    for (int it = 0; it < 20 && hi - lo > 1e-3 * std::max(1.0, lo); ++it) {
        double t = 0.5 * (lo + hi);
        auto r = lmi_feasibility(build(alpha, t), L.num_vars, theta, opts);
        if (r.status == LmiStatus::Feasible) {
            theta = r.decisions;
            lo = t;
        } else {
            hi = t;
        }
    }

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < L.num_q; ++k) {
        auto [node, gr, gc] = L.q_entries[k];
        Q(gr, gc) = theta[k];
        Q(gc, gr) = theta[k];
    }
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(L.m, n);
    for (size_t k = 0; k < L.z_entries.size(); ++k) {
        auto [ur, xc] = L.z_entries[k];
        Z(ur, xc) = theta[L.num_q + static_cast<int>(k)];
    }
    out.success = true;
    out.alpha = alpha;
    out.Q = Q;
    out.Z = Z;
    out.K = Z * Q.inverse();
    out.message = "ok";
    return out;
}

}  // namespace ccmnet
