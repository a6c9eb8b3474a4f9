#include "ccmnet/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ccmnet {

namespace {

Eigen::VectorXd dynamics(const NetworkModel& model, const ControlLaw& control,
                         const DisturbanceFn& dist, double t, const Eigen::VectorXd& x) {
    StackedPoint p;
    p.x = x;
    p.u = control(t, x);
    Eigen::VectorXd dx = model.evalF(p);
    if (model.inputDim() > 0) dx += model.evalB(x) * p.u;
    if (dist) dx += dist(t);
    return dx;
}

}  // namespace

SimulationTrace integrate_closed_loop(const NetworkModel& model, const ControlLaw& control,
                                      const Eigen::VectorXd& x0, const TargetTrajectory& target,
                                      double T_end, double dt, const DisturbanceFn& disturbance) {
    if (dt <= 0.0 || T_end < 0.0) throw std::invalid_argument("integrate_closed_loop: bad time grid");
    if (x0.size() != model.stateDim())
        throw std::invalid_argument("integrate_closed_loop: x0 dimension mismatch");

    const int steps = static_cast<int>(std::llround(T_end / dt));
    SimulationTrace trace;
    trace.dt = dt;
    trace.t.reserve(steps + 1);
    trace.x.reserve(steps + 1);
    trace.u.reserve(steps + 1);
    trace.x_star.reserve(steps + 1);
    trace.err.reserve(steps + 1);

    Eigen::VectorXd x = x0;
    for (int k = 0; k <= steps; ++k) {
        const double t = k * dt;
        if (!x.allFinite() || x.norm() > 1e9) {
            trace.diverged = true;
            break;
        }
        trace.t.push_back(t);
        trace.x.push_back(x);
        trace.u.push_back(control(t, x));
        Eigen::VectorXd xs = target.x_star ? target.x_star(t) : Eigen::VectorXd::Zero(x.size());
        trace.x_star.push_back(xs);
        trace.err.push_back((xs - x).norm());
        if (k == steps) break;

        const Eigen::VectorXd k1 = dynamics(model, control, disturbance, t, x);
        const Eigen::VectorXd k2 = dynamics(model, control, disturbance, t + 0.5 * dt, x + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = dynamics(model, control, disturbance, t + 0.5 * dt, x + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = dynamics(model, control, disturbance, t + dt, x + dt * k3);
        x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return trace;
}

double target_residual(const NetworkModel& model, const TargetTrajectory& target,
                       const std::vector<double>& times) {
    const double h = 1e-6;
    double worst = 0.0;
    for (double t : times) {
        StackedPoint p;
        p.x = target.x_star(t);
        p.u = target.u_star ? target.u_star(t) : Eigen::VectorXd::Zero(model.inputDim());
        Eigen::VectorXd xdot = (target.x_star(t + h) - target.x_star(t - h)) / (2.0 * h);
        Eigen::VectorXd rhs = model.evalF(p);
        if (model.inputDim() > 0) rhs += model.evalB(p.x) * p.u;
        worst = std::max(worst, (xdot - rhs).norm());
    }
    return worst;
}

DecayReport decay_check(const SimulationTrace& trace, double lambda) {
    DecayReport rep;
    if (trace.err.empty() || trace.diverged) return rep;
    const double e0 = trace.err.front();
    if (e0 == 0.0) {
        // Already on the target; trivially contracting.
        rep.pass = true;
        return rep;
    }

    // Least-squares line through (t, log e) restricted to e > 1e-8.
    double st = 0, se = 0, stt = 0, ste = 0;
    int count = 0;
    for (std::size_t k = 0; k < trace.err.size(); ++k) {
        if (trace.err[k] <= 1e-8) continue;
        const double t = trace.t[k], le = std::log(trace.err[k]);
        st += t;
        se += le;
        stt += t * t;
        ste += t * le;
        ++count;
    }
    if (count < 2) {
        // The error left the resolvable window almost immediately.
        rep.pass = true;
        rep.C_fit = 1.0;
        rep.rate_fit = lambda;
        return rep;
    }
    const double denom = count * stt - st * st;
    if (denom <= 0.0) return rep;
    const double slope = (count * ste - st * se) / denom;
    const double intercept = (se - slope * st) / count;
    rep.rate_fit = -slope;
    // the envelope must admit the initial condition itself, so C_fit >= 1
    rep.C_fit = std::max(std::exp(intercept) / e0, 1.0);

    if (rep.rate_fit < 0.9 * lambda) return rep;
    const double rate = 0.9 * lambda;
    for (std::size_t k = 0; k < trace.err.size(); ++k) {
        const double bound = rep.C_fit * e0 * std::exp(-rate * trace.t[k]);
        if (trace.err[k] > bound * (1.0 + 1e-9) + 1e-12) return rep;
    }
    rep.pass = true;
    return rep;
}

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void atomic_write(const std::string& path, const std::string& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!os) throw std::runtime_error("write to " + tmp + " failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename to " + path + " failed");
}

}  // namespace

void write_trace_csv(const SimulationTrace& trace, const std::string& path) {
    if (trace.t.empty()) throw std::invalid_argument("write_trace_csv: empty trace");
    const int n = static_cast<int>(trace.x.front().size());
    const int m = static_cast<int>(trace.u.front().size());

    std::string body = "t";
    for (int i = 1; i <= n; ++i) body += ", x_" + std::to_string(i);
    for (int i = 1; i <= m; ++i) body += ", u_" + std::to_string(i);
    for (int i = 1; i <= n; ++i) body += ", xstar_" + std::to_string(i);
    body += ", err_norm\n";
    for (std::size_t k = 0; k < trace.t.size(); ++k) {
        append_number(body, trace.t[k]);
        for (int i = 0; i < n; ++i) {
            body += ", ";
            append_number(body, trace.x[k](i));
        }
        for (int i = 0; i < m; ++i) {
            body += ", ";
            append_number(body, trace.u[k](i));
        }
        for (int i = 0; i < n; ++i) {
            body += ", ";
            append_number(body, trace.x_star[k](i));
        }
        body += ", ";
        append_number(body, trace.err[k]);
        body += "\n";
    }
    atomic_write(path, body);

    nlohmann::json meta;
    meta["dt"] = trace.dt;
    meta["steps"] = trace.t.size();
    meta["scenario"] = trace.scenario;
    meta["seed"] = trace.seed;
    meta["certificate_fingerprint"] = trace.cert_fingerprint;
    meta["diverged"] = trace.diverged;
    atomic_write(path + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace ccmnet
