#include "ccmnet/geodesic.hpp"

#include <stdexcept>

namespace ccmnet {

double curve_energy(const MetricFn& M, const NodeCurve& curve) {
    const int S = curve.segments();
    double e = 0.0;
    for (int j = 0; j < S; ++j) {
        Eigen::VectorXd d = curve.samples.row(j + 1) - curve.samples.row(j);
        Eigen::VectorXd mid = 0.5 * (curve.samples.row(j + 1) + curve.samples.row(j));
        e += S * d.dot(M(mid) * d);
    }
    return e;
}

NodeCurve node_geodesic(const MetricFn& M, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        int S, bool metric_constant, int max_sweeps) {
    if (S < 1) throw std::invalid_argument("node_geodesic: S must be >= 1");
    const int n = static_cast<int>(a.size());
    NodeCurve curve;
    curve.samples.resize(S + 1, n);
    for (int j = 0; j <= S; ++j)
        curve.samples.row(j) = a + (static_cast<double>(j) / S) * (b - a);
    if (metric_constant || S == 1) return curve;

    // coarse-to-fine: relaxation info travels one sample per sweep, so seed
    // fine grids from the converged half-resolution curve
    if (S > 8 && S % 2 == 0) {
        NodeCurve coarse = node_geodesic(M, a, b, S / 2, false, max_sweeps);
        for (int j = 0; j <= S; ++j) {
            if (j % 2 == 0)
                curve.samples.row(j) = coarse.samples.row(j / 2);
            else
                curve.samples.row(j) =
                    0.5 * (coarse.samples.row(j / 2) + coarse.samples.row(j / 2 + 1));
        }
    }

    // Cyclic coordinate descent on interior samples. Each interior point only
    // couples to its two neighbors through the local two-panel energy; per
    // visit we take a damped Newton step (finite-difference gradient of the
    // exact local energy, frozen-metric curvature) with backtracking, until
    // the sweep-level energy decrease stalls.
    double energy = curve_energy(M, curve);
    const double scale = 1.0 + (b - a).norm();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int j = 1; j < S; ++j) {
            Eigen::VectorXd prev = curve.samples.row(j - 1);
            Eigen::VectorXd next = curve.samples.row(j + 1);
            Eigen::VectorXd old = curve.samples.row(j);
            auto local = [&](const Eigen::VectorXd& x) {
                Eigen::VectorXd dl = x - prev, dr = next - x;
                Eigen::VectorXd ml = 0.5 * (prev + x), mr = 0.5 * (x + next);
                return dl.dot(M(ml) * dl) + dr.dot(M(mr) * dr);
            };
            Eigen::VectorXd grad(n);
            const double h = 1e-6 * scale;
            for (int k = 0; k < n; ++k) {
                Eigen::VectorXd xp = old, xm = old;
                xp[k] += h;
                xm[k] -= h;
                grad[k] = (local(xp) - local(xm)) / (2 * h);
            }
            Eigen::MatrixXd Ml = M(0.5 * (prev + old)), Mr = M(0.5 * (old + next));
            Eigen::VectorXd step = (Ml + Mr).ldlt().solve(grad) * 0.5;
            double f_old = local(old);
            for (double t = 1.0; t > 1e-6; t *= 0.5) {
                Eigen::VectorXd cand = old - t * step;
                if (local(cand) < f_old) {
                    curve.samples.row(j) = cand;
                    break;
                }
            }
        }
        double next_energy = curve_energy(M, curve);
        if (energy - next_energy < 1e-10) break;
        energy = next_energy;
    }
    curve.samples.row(0) = a;
    curve.samples.row(S) = b;
    return curve;
}

}  // namespace ccmnet
