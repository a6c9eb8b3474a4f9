#ifndef CCMNET_SIMULATOR_HPP
#define CCMNET_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccmnet/network.hpp"

namespace ccmnet {

/// Reference pair (x*(t), u*(t)); must itself solve the open-loop dynamics
/// (piecewise, for stepped references), checked by target_residual.
struct TargetTrajectory {
    std::function<Eigen::VectorXd(double)> x_star;
    std::function<Eigen::VectorXd(double)> u_star;
};

/// Additive disturbance entering the stacked state equations.
using DisturbanceFn = std::function<Eigen::VectorXd(double)>;

/// Feedback law evaluated at every integrator stage.
using ControlLaw = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

struct SimulationTrace {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x, u, x_star;
    std::vector<double> err;  // ||x*(t) - x(t)||
    double dt = 0.0;
    std::string scenario;
    std::uint64_t seed = 0;
    std::string cert_fingerprint;
    bool diverged = false;  // state norm exceeded 1e9; trace is partial
};

/// Fixed-step classical RK4 with the control law re-evaluated at every stage.
/// Deterministic given its inputs. On divergence the partial trace is
/// returned with `diverged` set.
SimulationTrace integrate_closed_loop(const NetworkModel& model, const ControlLaw& control,
                                      const Eigen::VectorXd& x0, const TargetTrajectory& target,
                                      double T_end, double dt,
                                      const DisturbanceFn& disturbance = {});

/// Max open-loop residual ||xdot* - f(x*) - B(x*) u*|| over sampled times
/// (central differences for xdot*). Sample times should avoid reference
/// discontinuities.
double target_residual(const NetworkModel& model, const TargetTrajectory& target,
                       const std::vector<double>& times);

/// Exponential-decay verdict: least-squares fit of log e(t) over the window
/// where e(t) > 1e-8; passes iff the fitted rate is at least 0.9*lambda and
/// e(t) <= C_fit * e(0) * exp(-0.9 lambda t) pointwise. e(0) = 0 returns a
/// pass with C_fit = 0 by convention.
struct DecayReport {
    double C_fit = 0.0;
    double rate_fit = 0.0;
    bool pass = false;
};
DecayReport decay_check(const SimulationTrace& trace, double lambda);

/// CSV with header `t, x_1..x_n, u_1..u_m, xstar_1..xstar_n, err_norm` plus a
/// JSON metadata sidecar at path + ".meta.json". Writes are atomic
/// (temp-then-rename) and byte-deterministic.
void write_trace_csv(const SimulationTrace& trace, const std::string& path);

}  // namespace ccmnet

#endif
