#include "ccmnet/synthesis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ccmnet {

// ---------------------------------------------------------------------------
// Region

void Region::setInterval(const Variable& v, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("region: lo > hi for " + v.str());
    overrides_[v] = {lo, hi};
}

std::pair<double, double> Region::interval(const Variable& v) const {
    auto it = overrides_.find(v);
    if (it != overrides_.end()) return it->second;
    const auto& def = v.kind == Variable::Kind::State ? state_default_ : input_default_;
    if (def) return *def;
    return {-kInf, kInf};
}

bool Region::isBounded(const Variable& v) const {
    auto [lo, hi] = interval(v);
    return std::isfinite(lo) && std::isfinite(hi);
}

// ---------------------------------------------------------------------------
// Xi pattern

GainPattern xi_pattern(const DirectedGraph& g_c, const std::vector<NodeSpec>& nodes) {
    const int N = static_cast<int>(nodes.size());
    if (g_c.numNodes() != N) throw std::invalid_argument("xi_pattern: node count mismatch");
    GainPattern pat;
    pat.allowed_vars.resize(N);
    for (int i = 1; i <= N; ++i) {
        if (nodes[i - 1].m == 0) continue;
        for (int j = 1; j <= N; ++j)
            if (g_c.hasEdge(i, j)) pat.blocks.insert({i, j});
    }
    for (int i = 1; i <= N; ++i) {
        std::set<int> permitted{i};
        for (int j : g_c.inNeighbors(i)) permitted.insert(j);
        for (int j : permitted)
            for (int k = 1; k <= nodes[j - 1].n; ++k)
                pat.allowed_vars[i - 1].push_back({j, Variable::Kind::State, k});
    }
    return pat;
}

// ---------------------------------------------------------------------------
// Chordal split

std::vector<CliqueAllocation> chordal_split(int num_nodes,
                                            const std::set<std::pair<int, int>>& block_pattern,
                                            const CliqueTree& tree) {
    std::vector<CliqueAllocation> out(tree.size());
    std::vector<int> share(num_nodes + 1, 0);  // #cliques containing node
    for (int k = 0; k < tree.size(); ++k) {
        out[k].members = tree.cliques[k];
        for (int v : tree.cliques[k]) ++share[v];
    }
    auto clique_has = [&](int k, int v) {
        const auto& c = tree.cliques[k];
        return std::binary_search(c.begin(), c.end(), v);
    };
    for (const auto& [i, j] : block_pattern) {
        if (i > j) continue;  // pattern is symmetric; allocate upper blocks
        if (i == j) {
            if (share[i] == 0) throw std::runtime_error("chordal_split: node " +
                                                        std::to_string(i) + " uncovered");
            for (int k = 0; k < tree.size(); ++k)
                if (clique_has(k, i)) out[k].weights[{i, i}] = 1.0 / share[i];
        } else {
            int home = -1;
            for (int k = 0; k < tree.size() && home < 0; ++k)
                if (clique_has(k, i) && clique_has(k, j)) home = k;
            if (home < 0)
                throw std::runtime_error("chordal_split: block (" + std::to_string(i) + "," +
                                         std::to_string(j) +
                                         ") not covered by any clique (triangulation bug)");
            out[home].weights[{i, j}] = 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Affine scalars/matrices in the decision vector

namespace {

struct Aff {
    double c0 = 0.0;
    std::vector<std::pair<int, double>> lin;  // sorted by var, unique

    void addTerm(int var, double coeff) {
        if (coeff == 0.0) return;
        auto it = std::lower_bound(lin.begin(), lin.end(), std::make_pair(var, -1e300));
        if (it != lin.end() && it->first == var)
            it->second += coeff;
        else
            lin.insert(it, {var, coeff});
    }
    void add(const Aff& o, double scale) {
        c0 += scale * o.c0;
        for (const auto& [v, c] : o.lin) addTerm(v, scale * c);
    }
};

struct AffMat {
    int rows = 0, cols = 0;
    std::vector<Aff> e;
    AffMat() = default;
    AffMat(int r, int c) : rows(r), cols(c), e(static_cast<size_t>(r) * c) {}
    Aff& at(int r, int c) { return e[r * cols + c]; }
    const Aff& at(int r, int c) const { return e[r * cols + c]; }
};

// numeric (r x k) times affine (k x c)
AffMat mulNumAff(const Eigen::MatrixXd& Nm, const AffMat& A) {
    AffMat out(static_cast<int>(Nm.rows()), A.cols);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c)
            for (int k = 0; k < A.rows; ++k)
                if (Nm(r, k) != 0.0) out.at(r, c).add(A.at(k, c), Nm(r, k));
    return out;
}

AffMat transposeAff(const AffMat& A) {
    AffMat out(A.cols, A.rows);
    for (int r = 0; r < A.rows; ++r)
        for (int c = 0; c < A.cols; ++c) out.at(c, r) = A.at(r, c);
    return out;
}

void addInto(AffMat& acc, const AffMat& o, double scale) {
    for (size_t k = 0; k < acc.e.size(); ++k) acc.e[k].add(o.e[k], scale);
}

// One polynomial-with-decision-coefficients entry: value = fixed(x) + sum
// theta[var] * monomial(x).
struct AnsatzEntry {
    std::vector<std::pair<int, Monomial>> terms;
};

// Grid machinery -----------------------------------------------------------

struct GridVar {
    Variable v;
    int idx;  // stacked index (inputs offset by n)
    std::vector<double> pts;
};

std::vector<double> grid_points(double lo, double hi, int density) {
    if (density <= 1 || lo == hi) return {0.5 * (lo + hi)};
    std::vector<double> pts;
    for (int k = 0; k < density; ++k) pts.push_back(lo + (hi - lo) * k / (density - 1));
    return pts;
}

std::vector<GridVar> make_grid_vars(const NetworkModel& model, const Region& region,
                                    const std::set<Variable>& vars, int density) {
    std::vector<GridVar> out;
    for (const Variable& v : vars) {
        auto [lo, hi] = region.interval(v);
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument(
                "synthesis: variable " + v.str() +
                " appears in the constraint matrix but has an unbounded region");
        out.push_back({v, model.variableIndex(v), grid_points(lo, hi, density)});
    }
    return out;
}

StackedPoint base_point(const NetworkModel& model, const Region& region) {
    StackedPoint p{Eigen::VectorXd::Zero(model.stateDim()), Eigen::VectorXd::Zero(model.inputDim())};
    auto mid = [&](const Variable& v) {
        auto [lo, hi] = region.interval(v);
        return (std::isfinite(lo) && std::isfinite(hi)) ? 0.5 * (lo + hi) : 0.0;
    };
    for (const Variable& v : model.stateVariables()) p.x[model.variableIndex(v)] = mid(v);
    for (const Variable& v : model.inputVariables())
        p.u[model.variableIndex(v) - model.stateDim()] = mid(v);
    return p;
}

// Visits either the full lattice or a seeded subsample of it.
template <typename F>
std::size_t for_each_sample(const std::vector<GridVar>& gv, std::size_t cap, std::uint64_t seed,
                            StackedPoint& p, int n, F&& fn) {
    double total_d = 1.0;
    for (const auto& g : gv) total_d *= static_cast<double>(g.pts.size());
    auto set_var = [&](const GridVar& g, double val) {
        if (g.idx < n)
            p.x[g.idx] = val;
        else
            p.u[g.idx - n] = val;
    };
    if (gv.empty()) {
        fn(p);
        return 1;
    }
    if (total_d <= static_cast<double>(cap)) {
        std::vector<size_t> odo(gv.size(), 0);
        std::size_t count = 0;
        for (;;) {
            for (size_t k = 0; k < gv.size(); ++k) set_var(gv[k], gv[k].pts[odo[k]]);
            fn(p);
            ++count;
            size_t k = 0;
            while (k < gv.size() && ++odo[k] == gv[k].pts.size()) odo[k++] = 0;
            if (k == gv.size()) break;
        }
        return count;
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (std::size_t s = 0; s < cap; ++s) {
        for (const auto& g : gv)
            set_var(g, g.pts[rng() % g.pts.size()]);
        fn(p);
    }
    return cap;
}

// Monomial helpers ---------------------------------------------------------

void enumerate_monomials(const std::vector<Variable>& vars, int max_degree, size_t start,
                         Monomial& current, int degree, std::vector<Monomial>& out) {
    out.push_back(current);
    for (size_t k = start; k < vars.size(); ++k) {
        if (degree + 1 > max_degree) break;
        current.push_back({vars[k], 1});
        for (int e = 1; degree + e <= max_degree; ++e) {
            current.back().second = e;
            enumerate_monomials(vars, max_degree, k + 1, current, degree + e, out);
        }
        current.pop_back();
    }
}

std::vector<Monomial> monomials_up_to(const std::vector<Variable>& vars, int max_degree) {
    Monomial cur;
    std::vector<Monomial> all;
    enumerate_monomials(vars, max_degree, 0, cur, 0, all);
    return all;
}

Polynomial monomial_poly(const Monomial& m) { return Polynomial::term(1.0, m); }

// The full decision-variable layout for CCM synthesis.
struct CcmAnsatz {
    const NetworkModel& model;
    int num_vars = 0;
    Eigen::VectorXd theta0;
    std::vector<std::vector<AnsatzEntry>> W;  // node(0-based) -> n_i*n_i row-major
    std::map<std::pair<int, int>, std::vector<AnsatzEntry>> Y;
    // compiled monomials + their directional-derivative companions for Wdot
    struct CompiledTerm {
        int var;
        CompiledPoly mono;
        std::vector<CompiledPoly> dmono;  // d/dx_{i,k} for k = 1..n_i (W entries only)
    };
    std::vector<std::vector<std::vector<CompiledTerm>>> W_ct;  // node -> entry -> terms
    std::map<std::pair<int, int>, std::vector<std::vector<CompiledTerm>>> Y_ct;

    CcmAnsatz(const NetworkModel& m, const SynthesisConfig& cfg, const GainPattern& pattern)
        : model(m) {
        const int N = m.numNodes();
        std::vector<double> init;
        W.resize(N);
        W_ct.resize(N);
        for (int i = 1; i <= N; ++i) {
            const int ni = m.node(i).n;
            // variables of node i that are bounded (state components)
            std::vector<Variable> wvars;
            for (int k = 1; k <= ni; ++k) {
                Variable v{i, Variable::Kind::State, k};
                if (cfg.max_degree_W > 0 && cfg.region.isBounded(v)) wvars.push_back(v);
            }
            auto monos = monomials_up_to(wvars, cfg.max_degree_W);
            W[i - 1].resize(ni * ni);
            for (int r = 0; r < ni; ++r)
                for (int c = r; c < ni; ++c) {
                    AnsatzEntry ent;
                    for (const Monomial& mo : monos) {
                        ent.terms.push_back({num_vars, mo});
                        init.push_back(mo.empty() && r == c ? 1.0 : 0.0);  // W starts at I
                        ++num_vars;
                    }
                    W[i - 1][r * ni + c] = ent;
                    W[i - 1][c * ni + r] = ent;  // shared decision variables
                }
        }
        for (const auto& [i, j] : pattern.blocks) {
            const int mi = m.node(i).m, nj = m.node(j).n;
            if (mi == 0) continue;
            std::vector<Variable> yvars;
            for (const Variable& v : pattern.allowed_vars[i - 1])
                if (cfg.region.isBounded(v)) yvars.push_back(v);
            auto monos = monomials_up_to(yvars, cfg.max_degree_Y);
            std::vector<AnsatzEntry> blk(mi * nj);
            for (int r = 0; r < mi; ++r)
                for (int c = 0; c < nj; ++c) {
                    for (const Monomial& mo : monos) {
                        blk[r * nj + c].terms.push_back({num_vars, mo});
                        init.push_back(0.0);
                        ++num_vars;
                    }
                }
            Y[{i, j}] = std::move(blk);
        }
        theta0 = Eigen::Map<Eigen::VectorXd>(init.data(), static_cast<long>(init.size()));
        compile(cfg);
    }

    void compile(const SynthesisConfig& cfg) {
        const int N = model.numNodes();
        for (int i = 1; i <= N; ++i) {
            const int ni = model.node(i).n;
            W_ct[i - 1].assign(ni * ni, {});
            for (int k = 0; k < ni * ni; ++k)
                for (const auto& [var, mo] : W[i - 1][k].terms) {
                    CompiledTerm ct;
                    ct.var = var;
                    Polynomial p = monomial_poly(mo);
                    ct.mono = model.compile(p);
                    if (cfg.max_degree_W > 0)
                        for (int c = 1; c <= ni; ++c)
                            ct.dmono.push_back(
                                model.compile(p.diff({i, Variable::Kind::State, c})));
                    W_ct[i - 1][k].push_back(std::move(ct));
                }
        }
        for (auto& [ij, blk] : Y) {
            auto& cblk = Y_ct[ij];
            cblk.assign(blk.size(), {});
            for (size_t k = 0; k < blk.size(); ++k)
                for (const auto& [var, mo] : blk[k].terms) {
                    CompiledTerm ct;
                    ct.var = var;
                    ct.mono = model.compile(monomial_poly(mo));
                    cblk[k].push_back(std::move(ct));
                }
        }
    }

    AffMat evalWBlock(int i, const StackedPoint& p) const {
        const int ni = model.node(i).n;
        AffMat out(ni, ni);
        for (int k = 0; k < ni * ni; ++k)
            for (const auto& ct : W_ct[i - 1][k])
                out.e[k].addTerm(ct.var, ct.mono.eval(p.x, p.u));
        return out;
    }

    // directional derivative of W_i along g_i (numeric rows of f + B u)
    AffMat evalWdotBlock(int i, const StackedPoint& p, const Eigen::VectorXd& g_i) const {
        const int ni = model.node(i).n;
        AffMat out(ni, ni);
        for (int k = 0; k < ni * ni; ++k)
            for (const auto& ct : W_ct[i - 1][k]) {
                if (ct.dmono.empty()) continue;
                double val = 0.0;
                for (int c = 0; c < ni; ++c) val += ct.dmono[c].eval(p.x, p.u) * g_i[c];
                out.e[k].addTerm(ct.var, val);
            }
        return out;
    }

    AffMat evalYBlock(int i, int j, const StackedPoint& p) const {
        const int mi = model.node(i).m, nj = model.node(j).n;
        AffMat out(mi, nj);
        auto it = Y_ct.find({i, j});
        if (it == Y_ct.end()) return out;
        for (size_t k = 0; k < it->second.size(); ++k)
            for (const auto& ct : it->second[k])
                out.e[k].addTerm(ct.var, ct.mono.eval(p.x, p.u));
        return out;
    }

    bool hasY(int i, int j) const { return Y.count({i, j}) > 0; }

    // symbolic variable dependence of the monomials
    std::set<Variable> WVars(int i) const {
        std::set<Variable> out;
        for (const auto& ent : W[i - 1])
            for (const auto& [var, mo] : ent.terms)
                for (const auto& [v, e] : mo) out.insert(v);
        return out;
    }
    std::set<Variable> YVars(int i, int j) const {
        std::set<Variable> out;
        auto it = Y.find({i, j});
        if (it == Y.end()) return out;
        for (const auto& ent : it->second)
            for (const auto& [var, mo] : ent.terms)
                for (const auto& [v, e] : mo) out.insert(v);
        return out;
    }

    // Resolve theta into polynomial matrices.
    void resolve(const Eigen::VectorXd& theta, CCMCertificate& cert) const {
        const int N = model.numNodes();
        cert.W_blocks.clear();
        cert.Y_blocks.clear();
        for (int i = 1; i <= N; ++i) {
            const int ni = model.node(i).n;
            PolyMatrix Wb(ni, ni);
            for (int r = 0; r < ni; ++r)
                for (int c = 0; c < ni; ++c) {
                    Polynomial acc;
                    for (const auto& [var, mo] : W[i - 1][r * ni + c].terms)
                        acc = acc + Polynomial::term(theta[var], mo);
                    Wb.at(r, c) = acc;
                }
            cert.W_blocks.push_back(std::move(Wb));
        }
        for (const auto& [ij, blk] : Y) {
            const int mi = model.node(ij.first).m, nj = model.node(ij.second).n;
            PolyMatrix Yb(mi, nj);
            for (int r = 0; r < mi; ++r)
                for (int c = 0; c < nj; ++c) {
                    Polynomial acc;
                    for (const auto& [var, mo] : blk[r * nj + c].terms)
                        acc = acc + Polynomial::term(theta[var], mo);
                    Yb.at(r, c) = acc;
                }
            cert.Y_blocks[ij] = std::move(Yb);
        }
    }
};

// Affine T block (i,j) at a numeric point.
// T_ij = delta_ij (-Wdot_i + 2 lambda W_i) + A_ij W_j + W_i A_ji^T
//        + B_i Y_ij + (B_j Y_ji)^T
AffMat assemble_T_block_affine(const NetworkModel& model, const CcmAnsatz& ans, int i, int j,
                               double lambda, const StackedPoint& p, const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& B, const Eigen::VectorXd& g) {
    const int ni = model.node(i).n, nj = model.node(j).n;
    const int oi = model.stateOffset(i), oj = model.stateOffset(j);
    AffMat T(ni, nj);
    Eigen::MatrixXd A_ij = A.block(oi, oj, ni, nj);
    Eigen::MatrixXd A_ji = A.block(oj, oi, nj, ni);
    AffMat Wj = ans.evalWBlock(j, p);
    addInto(T, mulNumAff(A_ij, Wj), 1.0);
    AffMat Wi = (i == j) ? Wj : ans.evalWBlock(i, p);
    addInto(T, transposeAff(mulNumAff(A_ji, Wi)), 1.0);
    if (model.node(i).m > 0 && ans.hasY(i, j)) {
        Eigen::MatrixXd B_i = B.block(oi, model.inputOffset(i), ni, model.node(i).m);
        addInto(T, mulNumAff(B_i, ans.evalYBlock(i, j, p)), 1.0);
    }
    if (model.node(j).m > 0 && ans.hasY(j, i)) {
        Eigen::MatrixXd B_j = B.block(oj, model.inputOffset(j), nj, model.node(j).m);
        addInto(T, transposeAff(mulNumAff(B_j, ans.evalYBlock(j, i, p))), 1.0);
    }
    if (i == j) {
        addInto(T, Wi, 2.0 * lambda);
        addInto(T, ans.evalWdotBlock(i, p, g.segment(oi, ni)), -1.0);
        // exact symmetry of the diagonal block
        for (int r = 0; r < ni; ++r)
            for (int c = r + 1; c < ni; ++c) {
                Aff s = T.at(r, c);
                s.add(T.at(c, r), 1.0);
                s.c0 *= 0.5;
                for (auto& [v, co] : s.lin) co *= 0.5;
                T.at(r, c) = s;
                T.at(c, r) = s;
            }
    }
    return T;
}

// Converts a symmetric affine matrix into a solver constraint.
AffineConstraint to_constraint(const AffMat& M, double margin) {
    AffineConstraint con;
    con.dim = M.rows;
    con.margin = margin;
    con.base = Eigen::MatrixXd::Zero(M.rows, M.cols);
    for (int r = 0; r < M.rows; ++r)
        for (int c = r; c < M.cols; ++c) {
            con.base(r, c) = M.at(r, c).c0;
            con.base(c, r) = M.at(r, c).c0;
            for (const auto& [var, coeff] : M.at(r, c).lin)
                con.triplets.push_back({var, static_cast<std::int16_t>(r),
                                        static_cast<std::int16_t>(c), coeff});
        }
    return con;
}

// Symbolic variable dependence of T block (i,j).
std::set<Variable> block_vars(const NetworkModel& model, const CcmAnsatz& ans, int i, int j,
                              bool state_dependent_W) {
    std::set<Variable> vars;
    auto absorb = [&vars](const std::set<Variable>& s) { vars.insert(s.begin(), s.end()); };
    const int ni = model.node(i).n, nj = model.node(j).n;
    const int oi = model.stateOffset(i), oj = model.stateOffset(j);
    const PolyMatrix& A = model.symbolicA();
    for (int r = 0; r < ni; ++r)
        for (int c = 0; c < nj; ++c) absorb(A.at(oi + r, oj + c).variables());
    for (int r = 0; r < nj; ++r)
        for (int c = 0; c < ni; ++c) absorb(A.at(oj + r, oi + c).variables());
    absorb(ans.WVars(i));
    absorb(ans.WVars(j));
    absorb(ans.YVars(i, j));
    absorb(ans.YVars(j, i));
    absorb(model.node(i).b.variables());
    absorb(model.node(j).b.variables());
    if (i == j && state_dependent_W) {
        absorb(model.node(i).f.variables());
        for (int k = 1; k <= model.node(i).m; ++k)
            vars.insert({i, Variable::Kind::Input, k});
    }
    return vars;
}

// The block pattern of T: diagonal plus companion edges of G_p union G_c.
std::set<std::pair<int, int>> t_block_pattern(const NetworkModel& model) {
    std::set<std::pair<int, int>> pattern;
    auto comp = undirected_companion(graph_union(model.physical(), model.communication()));
    for (int i = 1; i <= model.numNodes(); ++i) pattern.insert({i, i});
    for (const auto& [i, j] : comp.edges()) {
        pattern.insert({i, j});
        pattern.insert({j, i});
    }
    return pattern;
}

// W bound constraints: w_low I <= W_i(x_i) <= w_high I on a per-node grid.
void append_w_bounds(const NetworkModel& model, const CcmAnsatz& ans, const SynthesisConfig& cfg,
                     std::vector<AffineConstraint>& cons) {
    StackedPoint p = base_point(model, cfg.region);
    for (int i = 1; i <= model.numNodes(); ++i) {
        const int ni = model.node(i).n;
        auto gv = make_grid_vars(model, cfg.region, ans.WVars(i), cfg.grid_density);
        for_each_sample(gv, cfg.max_samples, cfg.seed, p, model.stateDim(), [&](StackedPoint& q) {
            AffMat Wb = ans.evalWBlock(i, q);
            AffMat lowc(ni, ni), highc(ni, ni);
            for (int r = 0; r < ni; ++r)
                for (int c = 0; c < ni; ++c) {
                    lowc.at(r, c).add(Wb.at(r, c), -1.0);
                    highc.at(r, c).add(Wb.at(r, c), 1.0);
                    if (r == c) {
                        lowc.at(r, c).c0 += cfg.w_low;
                        highc.at(r, c).c0 -= cfg.w_high;
                    }
                }
            cons.push_back(to_constraint(lowc, 0.0));
            cons.push_back(to_constraint(highc, 0.0));
        });
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// solve_ccm

SynthesisResult solve_ccm(const NetworkModel& model, const SynthesisConfig& config) {
    auto t_start = std::chrono::steady_clock::now();
    SynthesisResult result;
    const double eps = config.effectiveEpsilon();
    const double lambda = config.lambda;

    GainPattern pattern = xi_pattern(model.communication(), model.nodes());
    CcmAnsatz ansatz(model, config, pattern);

    auto pattern_blocks = t_block_pattern(model);

    // clique decomposition of the union graph's companion
    auto comp = undirected_companion(graph_union(model.physical(), model.communication()));
    auto tri = triangulate(comp);
    CliqueTree tree = clique_tree(tri.graph);

    std::vector<AffineConstraint> cons;
    StackedPoint p = base_point(model, config.region);
    const int n = model.stateDim();
    std::size_t samples = 0;
    const bool sdw = config.max_degree_W > 0;

    auto numeric_at = [&](const StackedPoint& q, Eigen::MatrixXd& A, Eigen::MatrixXd& B,
                          Eigen::VectorXd& g) {
        model.differentialMatrices(q, A, B);
        g = sdw ? Eigen::VectorXd(model.evalF(q) + B * q.u) : Eigen::VectorXd::Zero(n);
    };

    // Allocation slacks: a node shared by q cliques contributes its diagonal
    // T block with weight 1/q to each, but an even split can be infeasible
    // even when the summed matrix is negative definite, and the split a point
    // needs varies across the region when T does. Give the solver a symmetric
    // polynomial shift per (shared node, clique) in the node's own bounded
    // states, constrained by construction to sum to zero over the node's
    // cliques at every point, so it can move diagonal mass to wherever the
    // coupling blocks need it.
    struct SlackTerm {
        int var;
        int mono;  // index into the node's monomial basis
        double sign;
    };
    std::map<int, std::vector<std::pair<Monomial, CompiledPoly>>> slack_basis;  // per node
    // (node, clique) -> per upper-triangle entry, terms var * sign * monomial.
    std::map<std::pair<int, int>, std::vector<std::vector<SlackTerm>>> slack_terms;
    int total_vars = ansatz.num_vars;
    if (config.use_chordal && tree.size() > 1) {
        std::vector<std::vector<int>> node_cliques(model.numNodes() + 1);
        for (int k = 0; k < tree.size(); ++k)
            for (int v : tree.cliques[k]) node_cliques[v].push_back(k);
        for (int i = 1; i <= model.numNodes(); ++i) {
            const auto& ks = node_cliques[i];
            if (ks.size() < 2) continue;
            std::vector<Variable> sv;
            for (int k = 1; k <= model.node(i).n; ++k) {
                Variable v{i, Variable::Kind::State, k};
                if (config.region.isBounded(v)) sv.push_back(v);
            }
            auto& basis = slack_basis[i];
            for (const Monomial& mo : monomials_up_to(sv, 2))
                basis.push_back({mo, model.compile(monomial_poly(mo))});
            const int ni = model.node(i).n;
            const int nt = ni * (ni + 1) / 2;
            std::vector<std::vector<SlackTerm>> tail(nt);
            for (size_t q = 0; q + 1 < ks.size(); ++q) {
                std::vector<std::vector<SlackTerm>> own(nt);
                for (int t = 0; t < nt; ++t)
                    for (int b = 0; b < static_cast<int>(basis.size()); ++b) {
                        own[t].push_back({total_vars, b, 1.0});
                        tail[t].push_back({total_vars, b, -1.0});
                        ++total_vars;
                    }
                slack_terms[{i, ks[q]}] = std::move(own);
            }
            slack_terms[{i, ks.back()}] = std::move(tail);
        }
    }
    auto add_slacks = [&](AffMat& F, int clique, int node, int lr, int ni,
                          const StackedPoint& q) {
        auto it = slack_terms.find({node, clique});
        if (it == slack_terms.end()) return;
        const auto& basis = slack_basis[node];
        int t = 0;
        for (int r = 0; r < ni; ++r)
            for (int c = r; c < ni; ++c, ++t)
                for (const SlackTerm& st : it->second[t]) {
                    double coeff = st.sign * basis[st.mono].second.eval(q.x, q.u);
                    F.at(lr + r, lr + c).addTerm(st.var, coeff);
                    if (r != c) F.at(lr + c, lr + r).addTerm(st.var, coeff);
                }
    };

    if (config.use_chordal && tree.size() > 1) {
        auto alloc = chordal_split(model.numNodes(), pattern_blocks, tree);
        const double margin = eps / tree.size();
        for (int ck = 0; ck < static_cast<int>(alloc.size()); ++ck) {
            const CliqueAllocation& ca = alloc[ck];
            std::set<Variable> vars;
            for (const auto& [blk, w] : ca.weights) {
                auto bv = block_vars(model, ansatz, blk.first, blk.second, sdw);
                vars.insert(bv.begin(), bv.end());
            }
            for (int mnode : ca.members)
                if (slack_terms.count({mnode, ck}))
                    for (const auto& [mo, cp] : slack_basis[mnode])
                        for (const auto& [v, e] : mo) vars.insert(v);
            auto gv = make_grid_vars(model, config.region, vars, config.grid_density);
            std::vector<int> local_off(ca.members.size());
            int dim = 0;
            for (size_t k = 0; k < ca.members.size(); ++k) {
                local_off[k] = dim;
                dim += model.node(ca.members[k]).n;
            }
            auto local_index = [&](int node) {
                for (size_t k = 0; k < ca.members.size(); ++k)
                    if (ca.members[k] == node) return local_off[k];
                throw std::logic_error("chordal assembly: node not in clique");
            };
            samples += for_each_sample(
                gv, config.max_samples, config.seed, p, n, [&](StackedPoint& q) {
                    Eigen::MatrixXd A, B;
                    Eigen::VectorXd g;
                    numeric_at(q, A, B, g);
                    AffMat F(dim, dim);
                    for (const auto& [blk, w] : ca.weights) {
                        auto [i, j] = blk;
                        AffMat Tij = assemble_T_block_affine(model, ansatz, i, j, lambda, q, A, B, g);
                        int lr = local_index(i), lc = local_index(j);
                        for (int r = 0; r < Tij.rows; ++r)
                            for (int c = 0; c < Tij.cols; ++c) {
                                F.at(lr + r, lc + c).add(Tij.at(r, c), w);
                                if (i != j) F.at(lc + c, lr + r).add(Tij.at(r, c), w);
                            }
                    }
                    for (size_t k = 0; k < ca.members.size(); ++k)
                        add_slacks(F, ck, ca.members[k], local_off[k],
                                   model.node(ca.members[k]).n, q);
                    cons.push_back(to_constraint(F, margin));
                });
        }
    } else {
        std::set<Variable> vars;
        for (const auto& [i, j] : pattern_blocks) {
            auto bv = block_vars(model, ansatz, i, j, sdw);
            vars.insert(bv.begin(), bv.end());
        }
        auto gv = make_grid_vars(model, config.region, vars, config.grid_density);
        samples += for_each_sample(gv, config.max_samples, config.seed, p, n, [&](StackedPoint& q) {
            Eigen::MatrixXd A, B;
            Eigen::VectorXd g;
            numeric_at(q, A, B, g);
            AffMat T(n, n);
            for (const auto& [i, j] : pattern_blocks) {
                if (i > j) continue;
                AffMat Tij = assemble_T_block_affine(model, ansatz, i, j, lambda, q, A, B, g);
                int oi = model.stateOffset(i), oj = model.stateOffset(j);
                for (int r = 0; r < Tij.rows; ++r)
                    for (int c = 0; c < Tij.cols; ++c) {
                        T.at(oi + r, oj + c).add(Tij.at(r, c), 1.0);
                        if (i != j) T.at(oj + c, oi + r).add(Tij.at(r, c), 1.0);
                    }
            }
            cons.push_back(to_constraint(T, eps));
        });
    }
    result.samples_used = samples;

    append_w_bounds(model, ansatz, config, cons);

    // full patterned T at one point, for refinement cuts
    auto dense_constraint_at = [&](const StackedPoint& q) {
        Eigen::MatrixXd A, B;
        Eigen::VectorXd g;
        numeric_at(q, A, B, g);
        AffMat T(n, n);
        for (const auto& [i, j] : pattern_blocks) {
            if (i > j) continue;
            AffMat Tij = assemble_T_block_affine(model, ansatz, i, j, lambda, q, A, B, g);
            int oi = model.stateOffset(i), oj = model.stateOffset(j);
            for (int r = 0; r < Tij.rows; ++r)
                for (int c = 0; c < Tij.cols; ++c) {
                    T.at(oi + r, oj + c).add(Tij.at(r, c), 1.0);
                    if (i != j) T.at(oj + c, oi + r).add(Tij.at(r, c), 1.0);
                }
        }
        return to_constraint(T, eps);
    };

    CCMCertificate& cert = result.certificate;
    cert.lambda = lambda;
    cert.epsilon = eps;
    cert.w_low = config.w_low;
    cert.w_high = config.w_high;
    cert.region = config.region;
    cert.gp_fingerprint = model.physical().fingerprint();
    cert.gc_fingerprint = model.communication().fingerprint();
    cert.used_chordal = config.use_chordal && tree.size() > 1;
    cert.cliques = tree.cliques;
    cert.fill_edges = tri.fill_edges;

    LmiOptions opts;
    opts.max_sweeps = config.solver_max_sweeps;
    opts.slack = eps;  // push strictly inside the feasible set

    // Solve, verify on the finer grid, and refine: inter-sample violations
    // become new constraints at the offending points.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(total_vars);
    theta.head(ansatz.num_vars) = ansatz.theta0;
    auto fill_slacks = [&](const Eigen::VectorXd& th) {
        cert.clique_slacks.clear();
        for (const auto& [key, terms] : slack_terms) {
            const int ni = model.node(key.first).n;
            const auto& basis = slack_basis[key.first];
            PolyMatrix S(ni, ni);
            int t = 0;
            for (int r = 0; r < ni; ++r)
                for (int c = r; c < ni; ++c, ++t) {
                    Polynomial acc;
                    for (const SlackTerm& st : terms[t])
                        acc = acc + Polynomial::term(st.sign * th[st.var],
                                                     basis[st.mono].first);
                    S.at(r, c) = acc;
                    S.at(c, r) = acc;
                }
            cert.clique_slacks[key] = std::move(S);
        }
    };
    const int max_rounds = 1 + std::max(0, config.refine_rounds);
    for (int round = 0; round < max_rounds; ++round) {
        LmiResult sol = lmi_feasibility(cons, total_vars, theta, opts);
        if (sol.status != LmiStatus::Feasible) {
            result.status = SynthesisStatus::SynthesisFailed;
            result.worst_sample_value = sol.worst_value;
            std::ostringstream os;
            os << "synthesis "
               << (sol.status == LmiStatus::Infeasible ? "infeasible" : "inconclusive")
               << " after " << sol.sweeps_used << " sweeps; worst constraint value "
               << sol.worst_value;
            result.message = os.str();
            if (sol.decisions.size() >= ansatz.num_vars) {
                ansatz.resolve(sol.decisions, cert);  // best effort, for diagnostics
                if (sol.decisions.size() == total_vars) fill_slacks(sol.decisions);
            }
            break;
        }
        theta = sol.decisions;
        ansatz.resolve(theta, cert);
        fill_slacks(theta);
        cert.verification = verify_certificate(model, cert, config.effectiveVerifyDensity(),
                                               config.seed, 10 * config.max_samples);
        cert.margin_achieved = cert.verification.worst_eigenvalue;
        result.worst_sample_value = cert.verification.worst_eigenvalue;
        if (cert.verification.pass) {
            result.status = SynthesisStatus::Verified;
            result.message = "verified";
            break;
        }
        result.status = SynthesisStatus::VerifyFailed;
        result.message = "finer-grid verification failed";
        if (round + 1 < max_rounds) {
            StackedPoint bad{cert.verification.worst_x, cert.verification.worst_u};
            if (bad.x.size() != model.stateDim()) break;
            cons.push_back(dense_constraint_at(bad));
        }
    }
    if (result.status == SynthesisStatus::Verified && config.margin_boost_rounds > 0) {
        // Deepen the uniform negativity margin while feasibility and the
        // finer-grid check continue to hold; start from the verified point.
        LmiOptions bopts = opts;
        bopts.max_sweeps = std::min(opts.max_sweeps, 4000);
        // Start from the depth the verified point already achieves and double
        // from there; eps alone is far below what is typically attainable.
        double mu = std::max(eps, std::abs(cert.margin_achieved));
        for (int round = 0; round < config.margin_boost_rounds; ++round, mu *= 2.0) {
            const double factor = mu / eps;
            std::vector<AffineConstraint> bcons = cons;
            for (auto& c : bcons)
                if (c.margin > 0.0) c.margin *= factor;
            LmiResult sol = lmi_feasibility(bcons, total_vars, theta, bopts);
            if (sol.status != LmiStatus::Feasible) break;
            CCMCertificate backup = cert;
            ansatz.resolve(sol.decisions, cert);
            fill_slacks(sol.decisions);
            cert.verification = verify_certificate(model, cert, config.effectiveVerifyDensity(),
                                                   config.seed, 10 * config.max_samples);
            if (!cert.verification.pass) {
                cert = backup;
                break;
            }
            theta = sol.decisions;
            cert.margin_achieved = cert.verification.worst_eigenvalue;
            result.worst_sample_value = cert.verification.worst_eigenvalue;
        }
    }
    if (result.status == SynthesisStatus::Verified && config.rate_boost_rounds > 0) {
        // Climb the contraction rate: double while synthesis still verifies,
        // then bisect toward the feasibility edge. A solution valid at a
        // faster rate is valid at the requested one, so the fastest solution
        // found is re-verified and certified at the requested rate.
        SynthesisConfig sub = config;
        sub.rate_boost_rounds = 0;
        sub.margin_boost_rounds = 0;
        CCMCertificate base = cert;
        double good = lambda, bad = 0.0, trial = 2.0 * lambda;
        bool climbed = false;
        int misses = 0;  // pre-success failures: solver stalls, not the edge
        for (int round = 0; round < config.rate_boost_rounds; ++round) {
            if (bad > 0.0) {
                if (bad - good <= 0.05 * good) break;
                sub.lambda = 0.5 * (good + bad);
            } else {
                sub.lambda = trial;
                trial *= 2.0;
            }
            SynthesisResult br = solve_ccm(model, sub);
            result.samples_used += br.samples_used;
            if (br.status == SynthesisStatus::Verified) {
                good = sub.lambda;
                cert = br.certificate;
                climbed = true;
            } else if (climbed) {
                bad = sub.lambda;
            } else if (++misses >= 3) {
                break;
            }
        }
        if (climbed) {
            cert.lambda = lambda;
            cert.verification = verify_certificate(model, cert, config.effectiveVerifyDensity(),
                                                   config.seed, 10 * config.max_samples);
            if (cert.verification.pass) {
                cert.margin_achieved = cert.verification.worst_eigenvalue;
                result.worst_sample_value = cert.verification.worst_eigenvalue;
                std::ostringstream os;
                os << "verified (rate boosted to " << good << ")";
                result.message = os.str();
            } else {
                cert = base;  // rate monotonicity makes this unexpected
            }
        }
    }
    result.synthesis_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

// ---------------------------------------------------------------------------
// CertificateEvaluator

CertificateEvaluator::CertificateEvaluator(const NetworkModel& model, const CCMCertificate& cert)
    : model_(model), cert_(cert) {
    const int N = model.numNodes();
    if (static_cast<int>(cert_.W_blocks.size()) != N)
        throw std::invalid_argument("certificate: W block count mismatch");
    for (int i = 1; i <= N; ++i) {
        const int ni = model.node(i).n;
        std::vector<CompiledPoly> blk, dirs;
        for (int r = 0; r < ni; ++r)
            for (int c = 0; c < ni; ++c) {
                blk.push_back(model.compile(cert_.W_blocks[i - 1].at(r, c)));
                for (int k = 1; k <= ni; ++k)
                    dirs.push_back(model.compile(
                        cert_.W_blocks[i - 1].at(r, c).diff({i, Variable::Kind::State, k})));
            }
        W_c_.push_back(std::move(blk));
        Wdot_dirs_.push_back(std::move(dirs));
    }
    for (const auto& [ij, Yb] : cert_.Y_blocks) {
        std::vector<CompiledPoly> blk;
        for (int r = 0; r < Yb.rows(); ++r)
            for (int c = 0; c < Yb.cols(); ++c) blk.push_back(model.compile(Yb.at(r, c)));
        Y_c_[ij] = std::move(blk);
    }
}

Eigen::MatrixXd CertificateEvaluator::evalWBlock(int i, const Eigen::VectorXd& x) const {
    const int ni = model_.node(i).n;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(model_.inputDim());
    Eigen::MatrixXd out(ni, ni);
    for (int r = 0; r < ni; ++r)
        for (int c = 0; c < ni; ++c) out(r, c) = W_c_[i - 1][r * ni + c].eval(x, u0);
    return out;
}

Eigen::MatrixXd CertificateEvaluator::evalYBlock(int i, int j, const Eigen::VectorXd& x) const {
    auto it = Y_c_.find({i, j});
    const int mi = model_.node(i).m, nj = model_.node(j).n;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mi, nj);
    if (it == Y_c_.end()) return out;
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(model_.inputDim());
    for (int r = 0; r < mi; ++r)
        for (int c = 0; c < nj; ++c) out(r, c) = it->second[r * nj + c].eval(x, u0);
    return out;
}

Eigen::MatrixXd CertificateEvaluator::evalWdotBlock(int i, const StackedPoint& p,
                                                    const Eigen::VectorXd& g_i) const {
    const int ni = model_.node(i).n;
    Eigen::MatrixXd Wd(ni, ni);
    for (int r = 0; r < ni; ++r)
        for (int c = 0; c < ni; ++c) {
            double acc = 0.0;
            for (int k = 0; k < ni; ++k)
                acc += Wdot_dirs_[i - 1][(r * ni + c) * ni + k].eval(p.x, p.u) * g_i[k];
            Wd(r, c) = acc;
        }
    return Wd;
}

Eigen::MatrixXd CertificateEvaluator::evalW(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(model_.stateDim(), model_.stateDim());
    for (int i = 1; i <= model_.numNodes(); ++i) {
        const int oi = model_.stateOffset(i), ni = model_.node(i).n;
        W.block(oi, oi, ni, ni) = evalWBlock(i, x);
    }
    return W;
}

Eigen::MatrixXd CertificateEvaluator::assembleT(const StackedPoint& p) const {
    return assembleT(p, cert_.lambda);
}

Eigen::MatrixXd CertificateEvaluator::assembleT(const StackedPoint& p,
                                                double lambda_override) const {
    const int n = model_.stateDim();
    Eigen::MatrixXd A, B;
    model_.differentialMatrices(p, A, B);
    Eigen::VectorXd g = model_.evalF(p) + B * p.u;
    Eigen::MatrixXd W = evalW(p.x);
    Eigen::MatrixXd T = A * W + W * A.transpose() + 2.0 * lambda_override * W;
    // BY + (BY)^T
    for (const auto& [ij, blk] : Y_c_) {
        auto [i, j] = ij;
        const int mi = model_.node(i).m;
        Eigen::MatrixXd BY = B.block(model_.stateOffset(i), model_.inputOffset(i),
                                     model_.node(i).n, mi) *
                             evalYBlock(i, j, p.x);
        T.block(model_.stateOffset(i), model_.stateOffset(j), model_.node(i).n,
                model_.node(j).n) += BY;
        T.block(model_.stateOffset(j), model_.stateOffset(i), model_.node(j).n,
                model_.node(i).n) += BY.transpose();
    }
    // -Wdot
    for (int i = 1; i <= model_.numNodes(); ++i) {
        const int ni = model_.node(i).n, oi = model_.stateOffset(i);
        T.block(oi, oi, ni, ni) -= evalWdotBlock(i, p, g.segment(oi, ni));
    }
    return 0.5 * (T + T.transpose());
}

// ---------------------------------------------------------------------------
// verify_certificate

VerificationReport verify_certificate(const NetworkModel& model, const CCMCertificate& cert,
                                      int density, std::uint64_t seed, std::size_t max_samples,
                                      double lambda_override) {
    VerificationReport rep;
    rep.density = density;
    const double lambda = lambda_override > 0 ? lambda_override : cert.lambda;
    CertificateEvaluator ev(model, cert);

    // symbolic dependence of the whole T
    std::set<Variable> vars;
    auto absorb = [&vars](const std::set<Variable>& s) { vars.insert(s.begin(), s.end()); };
    absorb(model.symbolicA().variables());
    for (const auto& Wb : cert.W_blocks) absorb(Wb.variables());
    for (const auto& [ij, Yb] : cert.Y_blocks) absorb(Yb.variables());
    bool sdw = false;
    for (const auto& Wb : cert.W_blocks) sdw = sdw || !Wb.variables().empty();
    if (sdw) {
        absorb(model.stackedF().variables());
        for (const Variable& v : model.inputVariables()) vars.insert(v);
    }
    for (const auto& nd : model.nodes()) absorb(nd.b.variables());

    StackedPoint p = base_point(model, cert.region);
    rep.worst_eigenvalue = -std::numeric_limits<double>::infinity();

    const bool per_clique = cert.used_chordal && vars.size() > 14;
    if (per_clique) {
        rep.per_clique = true;
        CliqueTree tree;
        tree.cliques = cert.cliques;
        auto alloc = chordal_split(model.numNodes(), t_block_pattern(model), tree);
        for (int ck = 0; ck < static_cast<int>(alloc.size()); ++ck) {
            const CliqueAllocation& ca = alloc[ck];
            std::set<Variable> cvars;
            const PolyMatrix& As = model.symbolicA();
            for (const auto& [blk, w] : ca.weights) {
                auto [i, j] = blk;
                for (int r = 0; r < model.node(i).n; ++r)
                    for (int c = 0; c < model.node(j).n; ++c) {
                        auto s1 = As.at(model.stateOffset(i) + r, model.stateOffset(j) + c)
                                      .variables();
                        cvars.insert(s1.begin(), s1.end());
                        auto s2 = As.at(model.stateOffset(j) + c, model.stateOffset(i) + r)
                                      .variables();
                        cvars.insert(s2.begin(), s2.end());
                    }
                auto wv = cert.W_blocks[blk.first - 1].variables();
                cvars.insert(wv.begin(), wv.end());
                wv = cert.W_blocks[blk.second - 1].variables();
                cvars.insert(wv.begin(), wv.end());
                for (auto key : {std::make_pair(blk.first, blk.second),
                                 std::make_pair(blk.second, blk.first)}) {
                    auto it = cert.Y_blocks.find(key);
                    if (it != cert.Y_blocks.end()) {
                        auto yv = it->second.variables();
                        cvars.insert(yv.begin(), yv.end());
                    }
                }
            }
            std::map<int, std::vector<CompiledPoly>> slack_c;  // node -> row-major entries
            for (int mnode : ca.members) {
                auto sit = cert.clique_slacks.find({mnode, ck});
                if (sit == cert.clique_slacks.end()) continue;
                auto svs = sit->second.variables();
                cvars.insert(svs.begin(), svs.end());
                std::vector<CompiledPoly> blk;
                for (int r = 0; r < sit->second.rows(); ++r)
                    for (int c = 0; c < sit->second.cols(); ++c)
                        blk.push_back(model.compile(sit->second.at(r, c)));
                slack_c[mnode] = std::move(blk);
            }
            auto gv = make_grid_vars(model, cert.region, cvars, density);
            int dim = 0;
            std::vector<int> loff;
            for (int mnode : ca.members) {
                loff.push_back(dim);
                dim += model.node(mnode).n;
            }
            auto lidx = [&](int node) {
                for (size_t k = 0; k < ca.members.size(); ++k)
                    if (ca.members[k] == node) return loff[k];
                throw std::logic_error("verify: node not in clique");
            };
            rep.samples += for_each_sample(
                gv, max_samples / std::max<std::size_t>(1, cert.cliques.size()), seed, p,
                model.stateDim(), [&](StackedPoint& q) {
                    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(dim, dim);
                    Eigen::MatrixXd A, B;
                    model.differentialMatrices(q, A, B);
                    for (const auto& [blk, w] : ca.weights) {
                        auto [i, j] = blk;
                        // numeric block of T
                        Eigen::MatrixXd Tb = Eigen::MatrixXd::Zero(model.node(i).n,
                                                                   model.node(j).n);
                        const int oi = model.stateOffset(i), oj = model.stateOffset(j);
                        Eigen::MatrixXd Wi = ev.evalWBlock(i, q.x), Wj = ev.evalWBlock(j, q.x);
                        Tb += A.block(oi, oj, model.node(i).n, model.node(j).n) * Wj;
                        Tb += (A.block(oj, oi, model.node(j).n, model.node(i).n) * Wi).transpose();
                        if (model.node(i).m > 0)
                            Tb += B.block(oi, model.inputOffset(i), model.node(i).n,
                                          model.node(i).m) *
                                  ev.evalYBlock(i, j, q.x);
                        if (model.node(j).m > 0)
                            Tb += (B.block(oj, model.inputOffset(j), model.node(j).n,
                                           model.node(j).m) *
                                   ev.evalYBlock(j, i, q.x))
                                      .transpose();
                        if (i == j) {
                            Tb += 2.0 * lambda * Wi;
                            if (sdw) {
                                Eigen::VectorXd g = model.evalF(q) + B * q.u;
                                Tb -= ev.evalWdotBlock(i, q, g.segment(oi, model.node(i).n));
                            }
                        }
                        int lr = lidx(i), lc = lidx(j);
                        F.block(lr, lc, Tb.rows(), Tb.cols()) += w * Tb;
                        if (i != j) F.block(lc, lr, Tb.cols(), Tb.rows()) += w * Tb.transpose();
                    }
                    for (const auto& [node, blk] : slack_c) {
                        const int ni = model.node(node).n, lo = lidx(node);
                        for (int r = 0; r < ni; ++r)
                            for (int c = 0; c < ni; ++c)
                                F(lo + r, lo + c) += blk[r * ni + c].eval(q.x, q.u);
                    }
                    F = 0.5 * (F + F.transpose());
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F, Eigen::EigenvaluesOnly);
                    double top = es.eigenvalues()[dim - 1];
                    if (top > rep.worst_eigenvalue) {
                        rep.worst_eigenvalue = top;
                        rep.worst_x = q.x;
                        rep.worst_u = q.u;
                    }
                });
        }
    } else {
        auto gv = make_grid_vars(model, cert.region, vars, density);
        rep.samples = for_each_sample(gv, max_samples, seed, p, model.stateDim(),
                                      [&](StackedPoint& q) {
            Eigen::MatrixXd T = ev.assembleT(q, lambda);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
            double top = es.eigenvalues()[T.rows() - 1];
            if (top > rep.worst_eigenvalue) {
                rep.worst_eigenvalue = top;
                rep.worst_x = q.x;
                rep.worst_u = q.u;
            }
        });
    }
    rep.pass = rep.worst_eigenvalue < 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Killing residual

std::vector<double> killing_residual(const NetworkModel& model, const CCMCertificate& cert,
                                     int density) {
    const int n = model.stateDim(), m = model.inputDim();
    // block-diagonal symbolic W
    PolyMatrix Wfull(n, n);
    for (int i = 1; i <= model.numNodes(); ++i) {
        const int oi = model.stateOffset(i), ni = model.node(i).n;
        for (int r = 0; r < ni; ++r)
            for (int c = 0; c < ni; ++c)
                Wfull.at(oi + r, oi + c) = cert.W_blocks[i - 1].at(r, c);
    }
    std::vector<double> out;
    for (int col = 0; col < m; ++col) {
        PolyMatrix bcol(n, 1);
        for (int r = 0; r < n; ++r) bcol.at(r, 0) = model.stackedB().at(r, col);
        PolyMatrix db = jacobian(bcol, model.stateVariables());
        PolyMatrix dirW = directional_matrix_derivative(Wfull, bcol, model.stateVariables());
        // residual = dirW - db W - W db^T, entrywise symbolic
        PolyMatrix R(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                Polynomial acc = dirW.at(r, c);
                for (int k = 0; k < n; ++k) {
                    acc = acc - db.at(r, k) * Wfull.at(k, c);
                    acc = acc - Wfull.at(r, k) * db.at(c, k);
                }
                R.at(r, c) = acc;
            }
        auto vars = R.variables();
        std::vector<CompiledPoly> Rc;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) Rc.push_back(model.compile(R.at(r, c)));
        StackedPoint p = base_point(model, cert.region);
        double worst = 0.0;
        auto gv = make_grid_vars(model, cert.region, vars, density);
        for_each_sample(gv, 100000, 0, p, n, [&](StackedPoint& q) {
            double fro2 = 0.0;
            for (const auto& cp : Rc) {
                double v = cp.eval(q.x, q.u);
                fro2 += v * v;
            }
            worst = std::max(worst, std::sqrt(fro2));
        });
        out.push_back(worst);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corollary-R synthesis (decentralized shortcut, B constant)

SynthesisResult corollary_R_synthesis(const NetworkModel& model, const SynthesisConfig& config,
                                      int rho_degree) {
    SynthesisResult result;
    for (const auto& nd : model.nodes())
        for (int r = 0; r < nd.b.rows(); ++r)
            for (int c = 0; c < nd.b.cols(); ++c)
                if (!nd.b.at(r, c).isConstant())
                    throw std::invalid_argument(
                        "corollary_R_synthesis: B must be constant (Killing residual "
                        "is structurally nonzero)");

    const double eps = config.effectiveEpsilon();
    const int N = model.numNodes();

    // Decision layout piggybacks on solve_ccm's ansatz machinery by using a
    // decentralized gain pattern whose blocks we overwrite with -rho/2 B^T.
    // Here we solve directly: vars = W coefficients + rho coefficients.
    SynthesisConfig wcfg = config;
    GainPattern no_gain;  // no Y blocks: R enters through its own terms
    no_gain.allowed_vars.resize(N);
    CcmAnsatz ansatz(model, wcfg, no_gain);

    // rho_i monomials
    struct RhoTerm {
        int var;
        Monomial mono;
        CompiledPoly c;
    };
    std::vector<std::vector<RhoTerm>> rho(N);
    int num_vars = ansatz.num_vars;
    std::vector<double> extra_init;
    for (int i = 1; i <= N; ++i) {
        std::vector<Variable> rv;
        for (int k = 1; k <= model.node(i).n; ++k) {
            Variable v{i, Variable::Kind::State, k};
            if (rho_degree > 0 && config.region.isBounded(v)) rv.push_back(v);
        }
        for (const Monomial& mo : monomials_up_to(rv, rho_degree)) {
            RhoTerm t;
            t.var = num_vars++;
            t.mono = mo;
            t.c = model.compile(monomial_poly(mo));
            rho[i - 1].push_back(std::move(t));
            extra_init.push_back(0.0);
        }
    }
    Eigen::VectorXd theta0(num_vars);
    theta0.head(ansatz.num_vars) = ansatz.theta0;
    for (size_t k = 0; k < extra_init.size(); ++k) theta0[ansatz.num_vars + k] = extra_init[k];

    const bool sdw = config.max_degree_W > 0;
    std::set<Variable> vars;
    auto pattern_blocks = t_block_pattern(model);
    for (const auto& [i, j] : pattern_blocks) {
        auto bv = block_vars(model, ansatz, i, j, sdw);
        vars.insert(bv.begin(), bv.end());
    }
    for (int i = 0; i < N; ++i)
        for (const auto& t : rho[i])
            for (const auto& [v, e] : t.mono) vars.insert(v);

    const int n = model.stateDim();
    auto constraint_at = [&](const StackedPoint& q) {
        Eigen::MatrixXd A, B;
        model.differentialMatrices(q, A, B);  // B constant by precondition
        Eigen::VectorXd g = sdw ? Eigen::VectorXd(model.evalF(q)) : Eigen::VectorXd::Zero(n);
        AffMat T(n, n);
        for (const auto& [i, j] : pattern_blocks) {
            if (i > j) continue;
            AffMat Tij = assemble_T_block_affine(model, ansatz, i, j, config.lambda, q, A, B, g);
            int oi = model.stateOffset(i), oj = model.stateOffset(j);
            for (int r = 0; r < Tij.rows; ++r)
                for (int c = 0; c < Tij.cols; ++c) {
                    T.at(oi + r, oj + c).add(Tij.at(r, c), 1.0);
                    if (i != j) T.at(oj + c, oi + r).add(Tij.at(r, c), 1.0);
                }
        }
        // -B R B^T contribution: per node, -(B_i B_i^T) rho_i(x_i)
        for (int i = 1; i <= N; ++i) {
            if (model.node(i).m == 0) continue;
            const int oi = model.stateOffset(i), ni = model.node(i).n;
            Eigen::MatrixXd Bi = B.block(oi, model.inputOffset(i), ni, model.node(i).m);
            Eigen::MatrixXd BBt = Bi * Bi.transpose();
            for (const auto& t : rho[i - 1]) {
                double mval = t.c.eval(q.x, q.u);
                for (int r = 0; r < ni; ++r)
                    for (int c = 0; c < ni; ++c)
                        T.at(oi + r, oi + c).addTerm(t.var, -BBt(r, c) * mval);
            }
        }
        return to_constraint(T, eps);
    };
    auto gv = make_grid_vars(model, config.region, vars, config.grid_density);
    StackedPoint p = base_point(model, config.region);
    std::vector<AffineConstraint> cons;
    result.samples_used = for_each_sample(
        gv, config.max_samples, config.seed, p, n,
        [&](StackedPoint& q) { cons.push_back(constraint_at(q)); });
    append_w_bounds(model, ansatz, config, cons);

    LmiOptions opts;
    opts.max_sweeps = config.solver_max_sweeps;
    opts.slack = eps;

    CCMCertificate& cert = result.certificate;
    cert.lambda = config.lambda;
    cert.epsilon = eps;
    cert.w_low = config.w_low;
    cert.w_high = config.w_high;
    cert.region = config.region;
    cert.gp_fingerprint = model.physical().fingerprint();
    cert.gc_fingerprint = model.communication().fingerprint();

    Eigen::VectorXd theta = theta0;
    const int max_rounds = 1 + std::max(0, config.refine_rounds);
    for (int round = 0; round < max_rounds; ++round) {
        LmiResult sol = lmi_feasibility(cons, num_vars, theta, opts);
        if (sol.status != LmiStatus::Feasible) {
            result.status = SynthesisStatus::SynthesisFailed;
            result.worst_sample_value = sol.worst_value;
            result.message = "corollary synthesis failed; worst constraint value " +
                             std::to_string(sol.worst_value);
            break;
        }
        theta = sol.decisions;
        ansatz.resolve(theta, cert);
        // Y_ii = -rho_i B_i^T / 2
        for (int i = 1; i <= N; ++i) {
            const int mi = model.node(i).m, ni = model.node(i).n;
            if (mi == 0) continue;
            Polynomial rho_poly;
            for (const auto& t : rho[i - 1])
                rho_poly = rho_poly + Polynomial::term(theta[t.var], t.mono);
            PolyMatrix Yb(mi, ni);
            for (int r = 0; r < mi; ++r)
                for (int c = 0; c < ni; ++c)
                    Yb.at(r, c) = rho_poly * Polynomial(-0.5) * model.node(i).b.at(c, r);
            cert.Y_blocks[{i, i}] = std::move(Yb);
        }
        cert.verification = verify_certificate(model, cert, config.effectiveVerifyDensity(),
                                               config.seed, 10 * config.max_samples);
        cert.margin_achieved = cert.verification.worst_eigenvalue;
        result.worst_sample_value = cert.verification.worst_eigenvalue;
        if (cert.verification.pass) {
            result.status = SynthesisStatus::Verified;
            result.message = "verified";
            break;
        }
        result.status = SynthesisStatus::VerifyFailed;
        result.message = "finer-grid verification failed";
        if (round + 1 < max_rounds && cert.verification.worst_x.size() == model.stateDim())
            cons.push_back(constraint_at(
                StackedPoint{cert.verification.worst_x, cert.verification.worst_u}));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Local positivity diagnostic

PositiveDiagnostic local_positive_diagnostic(const NetworkModel& model,
                                             const Eigen::VectorXd& x_e,
                                             const Eigen::VectorXd& u_e, double tol) {
    for (const auto& nd : model.nodes())
        if (nd.n != 1)
            throw std::invalid_argument("local_positive_diagnostic: requires n_i = 1");
    StackedPoint pe{x_e, u_e};
    Eigen::MatrixXd A, B;
    model.differentialMatrices(pe, A, B);
    Eigen::VectorXd resid = model.evalF(pe) + B * u_e;
    if (resid.norm() > tol)
        throw std::invalid_argument("local_positive_diagnostic: (x_e, u_e) is not an equilibrium");

    const int n = model.stateDim(), m = model.inputDim();
    // dual variables: Q = diag(q_1..q_n), Z in R^{m x n}; K = Z Q^{-1}
    const int nv = n + m * n;
    auto zvar = [&](int r, int c) { return n + r * n + c; };
    std::vector<AffineConstraint> cons;
    for (int i = 0; i < n; ++i) {  // Q >= 0.05 I
        AffineConstraint c;
        c.dim = 1;
        c.base = Eigen::MatrixXd::Constant(1, 1, 0.05);
        c.triplets.push_back({i, 0, 0, -1.0});
        cons.push_back(c);
    }
    {  // AQ + BZ + (.)^T <= -1e-3 I
        AffineConstraint c;
        c.dim = n;
        c.base = Eigen::MatrixXd::Zero(n, n);
        c.margin = 1e-3;
        for (int j = 0; j < n; ++j) {
            // coefficient of q_j: A e_j e_j^T + e_j e_j^T A^T
            for (int r = 0; r < n; ++r) {
                double v = A(r, j);
                if (v == 0.0) continue;
                int rr = std::min(r, j), cc = std::max(r, j);
                double coeff = (r == j) ? 2.0 * v : v;
                c.triplets.push_back({j, static_cast<std::int16_t>(rr),
                                      static_cast<std::int16_t>(cc), coeff});
            }
        }
        for (int r = 0; r < m; ++r)
            for (int col = 0; col < n; ++col) {
                // coefficient of z_{r,col}: B.col(r) placed in column col, symmetrized
                for (int i = 0; i < n; ++i) {
                    double v = B(i, r);
                    if (v == 0.0) continue;
                    int rr = std::min(i, col), cc = std::max(i, col);
                    double coeff = (i == col) ? 2.0 * v : v;
                    c.triplets.push_back({zvar(r, col), static_cast<std::int16_t>(rr),
                                          static_cast<std::int16_t>(cc), coeff});
                }
            }
        cons.push_back(c);
    }
    for (int i = 0; i < n; ++i)  // Metzler: (AQ + BZ)_{ij} >= 0, i != j
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            AffineConstraint c;
            c.dim = 1;
            c.base = Eigen::MatrixXd::Zero(1, 1);
            if (A(i, j) != 0.0) c.triplets.push_back({j, 0, 0, -A(i, j)});
            for (int r = 0; r < m; ++r)
                if (B(i, r) != 0.0) c.triplets.push_back({zvar(r, j), 0, 0, -B(i, r)});
            cons.push_back(c);
        }

    Eigen::VectorXd t0 = Eigen::VectorXd::Zero(nv);
    t0.head(n).setOnes();
    LmiOptions opts;
    opts.max_sweeps = 400;
    LmiResult sol = lmi_feasibility(cons, nv, t0, opts);

    PositiveDiagnostic out;
    if (sol.status != LmiStatus::Feasible) return out;
    out.exists = true;
    Eigen::VectorXd q = sol.decisions.head(n);
    out.P_diag = q.cwiseInverse();
    Eigen::MatrixXd Z(m, n);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) Z(r, c) = sol.decisions[zvar(r, c)];
    out.K = Z * q.cwiseInverse().asDiagonal();
    return out;
}

}  // namespace ccmnet
