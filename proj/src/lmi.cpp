#include "ccmnet/lmi.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace ccmnet {

Eigen::MatrixXd AffineConstraint::evaluate(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd G = base;
    for (const Triplet& t : triplets) {
        const double v = t.val * theta[t.var];
        G(t.r, t.c) += v;
        if (t.r != t.c) G(t.c, t.r) += v;
    }
    return G;
}

double AffineConstraint::violation(const Eigen::VectorXd& theta, Eigen::VectorXd* eigvec) const {
    Eigen::MatrixXd G = evaluate(theta);
    if (dim == 1) {
        if (eigvec) *eigvec = Eigen::VectorXd::Ones(1);
        return G(0, 0) + margin;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, eigvec ? Eigen::ComputeEigenvectors
                                                                : Eigen::EigenvaluesOnly);
    if (eigvec) *eigvec = es.eigenvectors().col(dim - 1);
    return es.eigenvalues()[dim - 1] + margin;
}

namespace {

// Scalar cut a.theta <= rhs obtained from an eigenvector of one constraint.
struct Cut {
    std::vector<std::pair<int, double>> a;
    double rhs;
    double norm2;
};

Cut make_cut(const AffineConstraint& con, const Eigen::VectorXd& v, double slack) {
    Cut cut;
    double b = v.dot(con.base * v);
    std::vector<std::pair<int, double>> grad;
    for (const AffineConstraint::Triplet& t : con.triplets) {
        double g = v[t.r] * v[t.c] * t.val;
        if (t.r != t.c) g *= 2.0;
        grad.push_back({t.var, g});
    }
    std::sort(grad.begin(), grad.end());
    for (const auto& [var, g] : grad) {
        if (!cut.a.empty() && cut.a.back().first == var)
            cut.a.back().second += g;
        else
            cut.a.push_back({var, g});
    }
    cut.rhs = -(con.margin + slack) - b;
    cut.norm2 = 0.0;
    for (const auto& [var, g] : cut.a) cut.norm2 += g * g;
    return cut;
}

// Projects theta onto the halfspace of the cut (Polyak step with relaxation).
// Returns the amount of violation before the step.
double project(Eigen::VectorXd& theta, const Cut& cut, double relax, double step_limit) {
    double lhs = 0.0;
    for (const auto& [var, g] : cut.a) lhs += g * theta[var];
    double viol = lhs - cut.rhs;
    if (viol <= 0.0 || cut.norm2 <= 0.0) return viol;
    double step = relax * viol / cut.norm2;
    if (step * std::sqrt(cut.norm2) > step_limit) step = step_limit / std::sqrt(cut.norm2);
    for (const auto& [var, g] : cut.a) theta[var] -= step * g;
    return viol;
}

bool contradicts(const Cut& a, const Cut& b) {
    if (a.norm2 <= 0.0 || b.norm2 <= 0.0 || a.a.size() != b.a.size()) return false;
    double dot = 0.0;
    size_t i = 0, j = 0;
    while (i < a.a.size() && j < b.a.size()) {
        if (a.a[i].first < b.a[j].first) return false;
        if (b.a[j].first < a.a[i].first) return false;
        dot += a.a[i].second * b.a[j].second;
        ++i, ++j;
    }
    double cosang = dot / std::sqrt(a.norm2 * b.norm2);
    if (cosang > -0.9999) return false;
    // a.theta <= r1 and (approx) -a.theta <= r2 with r1/|a| + r2/|b| < 0.
    // Two halfspaces with normals that are not exactly opposite always
    // intersect, just possibly far away; only flag infeasibility when the
    // nearest common point (deficit / angle gap) is beyond any magnitude the
    // bounded decision variables could reach.
    double deficit = -(a.rhs / std::sqrt(a.norm2) + b.rhs / std::sqrt(b.norm2));
    if (deficit <= 1e-12) return false;
    double gap = std::max(0.0, 1.0 + cosang);
    return deficit * deficit > 2.0 * gap * 1e16;  // distance > 1e8
}

}  // namespace

LmiResult lmi_feasibility(const std::vector<AffineConstraint>& constraints, int num_vars,
                          const Eigen::VectorXd& theta0, const LmiOptions& opts) {
    LmiResult res;
    Eigen::VectorXd theta = theta0.size() == num_vars ? theta0 : Eigen::VectorXd::Zero(num_vars);
    std::deque<Cut> cache;

    // Structural screen: constraints with no decision dependence.
    for (size_t i = 0; i < constraints.size(); ++i) {
        if (constraints[i].triplets.empty() &&
            constraints[i].violation(theta) > 0.0) {
            res.status = LmiStatus::Infeasible;
            res.decisions = theta;
            res.worst_index = static_cast<int>(i);
            res.worst_value = constraints[i].violation(theta);
            return res;
        }
    }

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        bool clean = true;
        Eigen::VectorXd v;
        for (size_t i = 0; i < constraints.size(); ++i) {
            double viol = constraints[i].violation(theta, &v);
            if (viol <= 0.0) continue;
            clean = false;
            Cut cut = make_cut(constraints[i], v, opts.slack);
            for (const Cut& old : cache) {
                if (contradicts(cut, old)) {
                    res.status = LmiStatus::Infeasible;
                    res.decisions = theta;
                    res.worst_index = static_cast<int>(i);
                    res.worst_value = viol;
                    res.sweeps_used = sweep + 1;
                    return res;
                }
            }
            project(theta, cut, opts.over_relax, opts.step_limit);
            // cutting-plane refinement: replay the cached cuts
            for (const Cut& old : cache) project(theta, old, 1.0, opts.step_limit);
            cache.push_back(std::move(cut));
            if (static_cast<int>(cache.size()) > opts.cut_cache) cache.pop_front();
        }
        if (clean) {
            res.status = LmiStatus::Feasible;
            res.decisions = theta;
            res.sweeps_used = sweep + 1;
            res.worst_value = -std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < constraints.size(); ++i) {
                double viol = constraints[i].violation(theta);
                if (viol > res.worst_value) {
                    res.worst_value = viol;
                    res.worst_index = static_cast<int>(i);
                }
            }
            return res;
        }
        res.sweeps_used = sweep + 1;
    }

    res.status = LmiStatus::Inconclusive;
    res.decisions = theta;
    res.worst_value = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < constraints.size(); ++i) {
        double viol = constraints[i].violation(theta);
        if (viol > res.worst_value) {
            res.worst_value = viol;
            res.worst_index = static_cast<int>(i);
        }
    }
    return res;
}

BisectResult lmi_bisect_min(
    const std::function<std::vector<AffineConstraint>(double)>& build, int num_vars,
    const Eigen::VectorXd& theta0, double lo, double hi, double tol, const LmiOptions& opts) {
    BisectResult out;
    auto at = [&](double s, Eigen::VectorXd warm) {
        return lmi_feasibility(build(s), num_vars, warm, opts);
    };
    LmiResult top = at(hi, theta0);
    if (top.status != LmiStatus::Feasible) return out;
    out.success = true;
    out.value = hi;
    out.decisions = top.decisions;
    LmiResult bottom = at(lo, out.decisions);
    if (bottom.status == LmiStatus::Feasible) {
        out.value = lo;
        out.decisions = bottom.decisions;
        return out;
    }
    double bad = lo, good = hi;
    while (good - bad > tol) {
        double mid = 0.5 * (bad + good);
        LmiResult r = at(mid, out.decisions);
        if (r.status == LmiStatus::Feasible) {
            good = mid;
            out.value = mid;
            out.decisions = r.decisions;
        } else {
            bad = mid;
        }
    }
    return out;
}

}  // namespace ccmnet
