#include "ccmnet/scenarios.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "ccmnet/controller.hpp"

namespace ccmnet {

namespace {

Variable X(int node, int comp) { return {node, Variable::Kind::State, comp}; }

}  // namespace

NetworkModel build_cubic_network(int N, const DirectedGraph& g_c) {
    if (N < 1) throw std::invalid_argument("build_cubic_network: N must be >= 1");
    std::vector<NodeSpec> nodes(N);
    for (int i = 1; i <= N; ++i) {
        const int left = (i == 1) ? 1 : i - 1;      // mirrored boundary
        const int right = (i == N) ? N : i + 1;
        NodeSpec& nd = nodes[i - 1];
        nd.n = 2;
        nd.m = 1;
        nd.f = PolyMatrix(2, 1);
        Polynomial xi = Polynomial::variable(X(i, 1));
        Polynomial f0 = -xi - xi.pow(3) + Polynomial::variable(X(i, 2)).pow(2);
        f0 = f0 + 0.01 * (Polynomial::variable(X(left, 1)).pow(3) - 2.0 * xi.pow(3) +
                          Polynomial::variable(X(right, 1)).pow(3));
        nd.f.at(0, 0) = f0;
        nd.b = PolyMatrix(2, 1);
        nd.b.at(1, 0) = Polynomial(1.0);
    }
    return NetworkModel(std::move(nodes), make_path_graph(N), g_c);
}

double drivetrain_force(const VehicleParams& p, double v) {
    const double r = p.alpha * v / kPlatoonOmegaMax - 1.0;
    return p.alpha * kPlatoonTorqueMax * (1.0 - p.beta * r * r);
}

double PlatoonModel::throttleFor(int i, double v) const {
    const VehicleParams& p = params.at(i - 1);
    return p.k_d * v * v / (2.0 * drivetrain_force(p, v));
}

TargetTrajectory PlatoonModel::cruiseTarget(double v0, double v1, double t_step) const {
    const int N = static_cast<int>(params.size());
    const double d = d_star;
    const std::vector<VehicleParams> prm = params;  // closures stand alone
    TargetTrajectory target;
    target.x_star = [v0, v1, t_step, N, d](double t) {
        const double v = (t < t_step) ? v0 : v1;
        const double s1 = (t < t_step) ? v0 * t : v0 * t_step + v1 * (t - t_step);
        Eigen::VectorXd x(2 * N);
        x(0) = s1;
        x(1) = v;
        for (int i = 2; i <= N; ++i) {
            x(2 * (i - 1)) = d;
            x(2 * (i - 1) + 1) = v;
        }
        return x;
    };
    target.u_star = [prm, v0, v1, t_step, N](double t) {
        const double v = (t < t_step) ? v0 : v1;
        Eigen::VectorXd u(N);
        for (int i = 1; i <= N; ++i)
            u(i - 1) = prm[i - 1].k_d * v * v / (2.0 * drivetrain_force(prm[i - 1], v));
        return u;
    };
    return target;
}

PlatoonModel build_platoon(int N, std::uint64_t seed, int horizon) {
    if (N < 2) throw std::invalid_argument("build_platoon: N must be >= 2");
    if (horizon < 0) throw std::invalid_argument("build_platoon: horizon must be >= 0");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> m_d(1.8, 2.0), kd_d(1.3, 1.6), a_d(13.0, 16.0),
        b_d(0.28, 0.35);
    std::vector<VehicleParams> params(N);
    for (int i = 0; i < N; ++i) {
        params[i].m = m_d(rng);
        params[i].k_d = kd_d(rng);
        params[i].alpha = a_d(rng);
        params[i].beta = b_d(rng);
    }

    std::vector<NodeSpec> nodes(N);
    for (int i = 1; i <= N; ++i) {
        const VehicleParams& p = params[i - 1];
        NodeSpec& nd = nodes[i - 1];
        nd.n = 2;
        nd.m = 1;
        nd.f = PolyMatrix(2, 1);
        if (i == 1) {
            nd.f.at(0, 0) = Polynomial::variable(X(1, 2));
        } else {
            nd.f.at(0, 0) =
                Polynomial::variable(X(i - 1, 2)) - Polynomial::variable(X(i, 2));
        }
        // Mass is tabulated in tonnes; the force balance needs kilograms.
        const double m_kg = 1000.0 * p.m;
        nd.f.at(1, 0) = Polynomial::term(-p.k_d / (2.0 * m_kg), {{X(i, 2), 2}});
        // F(v)/m expanded in v: the quadratic drivetrain curve scaled by mass.
        const double aT = p.alpha * kPlatoonTorqueMax;
        const double c = p.alpha / kPlatoonOmegaMax;
        nd.b = PolyMatrix(2, 1);
        nd.b.at(1, 0) = Polynomial(aT * (1.0 - p.beta) / m_kg) +
                        Polynomial::term(2.0 * aT * p.beta * c / m_kg, {{X(i, 2), 1}}) +
                        Polynomial::term(-aT * p.beta * c * c / m_kg, {{X(i, 2), 2}});
    }
    NetworkModel model(std::move(nodes), make_path_graph(N),
                       horizon == 0 ? make_empty_graph(N) : make_banded_graph(N, horizon));

    PlatoonModel out{std::move(model), std::move(params), seed, horizon};
    out.u_star = Eigen::VectorXd(N);
    for (int i = 1; i <= N; ++i) out.u_star(i - 1) = out.throttleFor(i, out.v_star);
    return out;
}

double platoon_disturbance(double t) {
    if (t >= 95.0 && t <= 100.0) return 20.0 * std::sin(2.0 * M_PI * (t - 95.0) / 10.0);
    if (t >= 180.0) return 10.0;
    return 0.0;
}

ScenarioResult scenario_platoon_tracking(const PlatoonModel& platoon, const CCMCertificate& cert,
                                         const ScenarioOptions& opts) {
    const NetworkModel& model = platoon.model;
    const int N = model.numNodes();
    const double t_step = 5.0;
    TargetTrajectory target = opts.with_step ? platoon.cruiseTarget(10.0, 5.0, t_step)
                                             : platoon.cruiseTarget(10.0, 10.0, t_step);

    DistributedController ctrl(model, cert, opts.S);
    ControlLaw law = [&](double t, const Eigen::VectorXd& x) {
        return ctrl.control(x, target.x_star(t), target.u_star(t));
    };
    DisturbanceFn dist;
    if (opts.with_disturbance) {
        const int n = model.stateDim();
        dist = [n](double t) {
            Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
            w(1) = platoon_disturbance(t);  // lead-vehicle velocity row
            return w;
        };
    }

    ScenarioResult res;
    res.trace = integrate_closed_loop(model, law, target.x_star(0.0), target, opts.T_end, opts.dt,
                                      dist);
    res.trace.scenario = "platoon_tracking";
    res.trace.seed = platoon.seed;
    res.trace.cert_fingerprint = cert.gp_fingerprint + ":" + cert.gc_fingerprint;

    res.peak_spacing_per_link.assign(std::max(0, N - 1), 0.0);
    for (std::size_t k = 0; k < res.trace.t.size(); ++k) {
        const double t = res.trace.t[k];
        for (int i = 2; i <= N; ++i) {
            const double gap = res.trace.x[k](model.stateOffset(i));
            const double dev = std::abs(gap - platoon.d_star);
            res.peak_spacing_per_link[i - 2] = std::max(res.peak_spacing_per_link[i - 2], dev);
            res.peak_spacing_error = std::max(res.peak_spacing_error, dev);
            if (t >= 90.0) res.peak_spacing_disturbance = std::max(res.peak_spacing_disturbance, dev);
        }
    }

    auto err_at = [&](double t) {
        if (res.trace.t.empty()) return 0.0;
        std::size_t k = static_cast<std::size_t>(std::llround(t / opts.dt));
        k = std::min(k, res.trace.err.size() - 1);
        return res.trace.err[k];
    };
    res.err_after_step = err_at(t_step + opts.dt);
    res.err_pre_disturbance = err_at(90.0);
    res.converged = res.err_pre_disturbance <= std::max(0.25 * res.err_after_step, 1e-3);
    return res;
}

PlatoonChannels platoon_performance_channels(const PlatoonModel& platoon) {
    const NetworkModel& model = platoon.model;
    const int N = model.numNodes();
    const int n = model.stateDim();
    const int m = model.inputDim();

    StackedPoint p;
    p.x = Eigen::VectorXd::Zero(n);
    p.x(1) = platoon.v_star;
    for (int i = 2; i <= N; ++i) {
        p.x(model.stateOffset(i)) = platoon.d_star;
        p.x(model.stateOffset(i) + 1) = platoon.v_star;
    }
    p.u = platoon.u_star;

    PlatoonChannels ch;
    model.differentialMatrices(p, ch.A, ch.B);
    ch.H = Eigen::MatrixXd::Zero(n, 1);
    ch.H(1, 0) = 1.0;

    const double q_v1 = 1e-2, q_s1 = 1.0, q_u1 = 3e5, q_s = 1e3, q_u = 5e4;
    const int rows = 3 + 2 * (N - 1);
    ch.C = Eigen::MatrixXd::Zero(rows, n);
    ch.D = Eigen::MatrixXd::Zero(rows, m);
    ch.C(0, 1) = q_v1;
    ch.C(1, 0) = q_s1;
    ch.D(2, 0) = q_u1;
    int r = 3;
    for (int i = 2; i <= N; ++i) {
        ch.C(r++, model.stateOffset(i)) = q_s;
        ch.D(r++, model.inputOffset(i)) = q_u;
    }
    ch.state_dims.assign(N, 2);
    ch.input_dims.assign(N, 1);
    return ch;
}

}  // namespace ccmnet
