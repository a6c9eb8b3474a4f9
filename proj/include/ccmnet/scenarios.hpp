#ifndef CCMNET_SCENARIOS_HPP
#define CCMNET_SCENARIOS_HPP

#include <cstdint>
#include <vector>

#include "ccmnet/network.hpp"
#include "ccmnet/simulator.hpp"
#include "ccmnet/synthesis.hpp"

namespace ccmnet {

/// Chain of 2-state nodes: x_i' = -x_i - x_i^3 + y_i^2 + 0.01 (x_{i-1}^3 -
/// 2 x_i^3 + x_{i+1}^3), y_i' = u_i, with the boundary mirrored (x_0 := x_1,
/// x_{N+1} := x_N). Physical graph is the bidirectional string; the
/// communication graph is a free choice.
NetworkModel build_cubic_network(int N, const DirectedGraph& g_c);

/// Vehicle drivetrain and drag parameters, drawn per vehicle.
struct VehicleParams {
    double m;      // mass in tonnes
    double k_d;    // aerodynamic drag, kg/m
    double alpha;  // gear ratio
    double beta;   // torque curve shape
};

constexpr double kPlatoonOmegaMax = 420.0;
constexpr double kPlatoonTorqueMax = 190.0;

/// Engine force at velocity v: alpha T_m (1 - beta (alpha v / omega_m - 1)^2),
/// a concave quadratic in v.
double drivetrain_force(const VehicleParams& p, double v);

/// Heterogeneous platoon in relative coordinates
/// (s_1, v_1, s_1 - s_2, v_2, ..., s_{N-1} - s_N, v_N):
///   node 1:   s_1' = v_1,              v_1' = F_1(v_1) u_1 / m_1 - k_d v_1^2 / (2 m_1)
///   node i>1: (s_{i-1}-s_i)' = v_{i-1} - v_i,  v_i' likewise
/// The input matrix depends on v_i, so gains must too. Parameters are uniform
/// draws from m in [1.8,2], k_d in [1.3,1.6], alpha in [13,16],
/// beta in [0.28,0.35], seeded for reproducibility.
struct PlatoonModel {
    NetworkModel model;
    std::vector<VehicleParams> params;
    std::uint64_t seed = 0;
    int horizon = 1;           // communication band width; model.communication() = banded(N, h)
    double v_star = 25.0;
    double d_star = 20.0;      // nominal inter-vehicle gap, metres
    Eigen::VectorXd u_star;    // per-vehicle throttle holding v_star

    /// Throttle holding velocity v for vehicle i (1-based).
    double throttleFor(int i, double v) const;
    /// Target (x*(t), u*(t)) cruising at piecewise-constant v_ref.
    TargetTrajectory cruiseTarget(double v0, double v1, double t_step) const;
};

PlatoonModel build_platoon(int N, std::uint64_t seed, int horizon = 1);

/// Lead-vehicle force disturbance: 20 sin(2 pi (t-95)/10) for 95 <= t <= 100,
/// 10 for t >= 180, 0 otherwise.
double platoon_disturbance(double t);

struct ScenarioOptions {
    double T_end = 220.0;
    double dt = 0.01;
    bool with_step = true;         // reference velocity 10 -> 5 at t = 5
    bool with_disturbance = true;  // platoon_disturbance on the lead vehicle
    int S = 16;                    // geodesic panels
};

struct ScenarioResult {
    SimulationTrace trace;
    std::vector<double> peak_spacing_per_link;  // |s_{i-1}-s_i-d*|, links 2..N
    double peak_spacing_error = 0.0;            // over the whole run
    double peak_spacing_disturbance = 0.0;      // over t >= 90
    double err_after_step = 0.0;                // first sample past the step
    double err_pre_disturbance = 0.0;           // at t = 90
    bool converged = false;                     // step transient decayed before t = 90
};

/// Closed-loop reference-step plus disturbance run starting on the target.
ScenarioResult scenario_platoon_tracking(const PlatoonModel& platoon, const CCMCertificate& cert,
                                         const ScenarioOptions& opts = {});

/// Performance-channel data for the structured disturbance-attenuation design
/// at the cruising equilibrium: A, B, disturbance input H = e_{v_1}, and
/// weighted outputs
///   (q_v1 v_1, q_s1 s_1, q_u1 u_1, q_s (s_{i-1}-s_i), q_u u_i for i = 2..N)
/// with weights (1e-2, 1, 3e5, 1e3, 5e4).
struct PlatoonChannels {
    Eigen::MatrixXd A, B, H, C, D;
    std::vector<int> state_dims, input_dims;
};
PlatoonChannels platoon_performance_channels(const PlatoonModel& platoon);

}  // namespace ccmnet

#endif
