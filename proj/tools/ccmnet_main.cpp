#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccmnet/certificate.hpp"
#include "ccmnet/config.hpp"
#include "ccmnet/controller.hpp"
#include "ccmnet/scenarios.hpp"
#include "ccmnet/simulator.hpp"
#include "ccmnet/synthesis.hpp"

namespace fs = std::filesystem;
using namespace ccmnet;

namespace {

// exit codes shared with the test suite
constexpr int kOk = 0;
constexpr int kBadConfig = 1;
constexpr int kSynthesisFailed = 2;
constexpr int kVerifyFailed = 3;
constexpr int kDecayFailed = 4;
constexpr int kFingerprintMismatch = 5;

void atomic_write(const std::string& path, const std::string& body) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os.write(body.data(), static_cast<std::streamsize>(body.size()));
        if (!os) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

std::string structure_label(const RunConfig& cfg) {
    if (cfg.builtin == "platoon") return "banded(" + std::to_string(cfg.horizon) + ")";
    if (!cfg.g_c_literal.empty()) return cfg.g_c_literal;
    return "custom";
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return s;
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("CCMNET_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

struct CommonArgs {
    std::string config_path, cert_path, out_dir;
    bool open_loop = false;
    std::int64_t seed = -1;
    int threads = 0;
};

RunConfig load_config_or_die(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed >= 0) {
        cfg.synthesis.seed = static_cast<std::uint64_t>(args.seed);
        cfg.scenario.seed = static_cast<std::uint64_t>(args.seed);
    }
    return cfg;
}

int cmd_synth(const CommonArgs& args) {
    RunConfig cfg = load_config_or_die(args);
    LoadedModel lm = build_model(cfg);
    fs::create_directories(cfg.out_dir);

    SynthesisResult res = solve_ccm(lm.model(), cfg.synthesis);
    const std::string label = structure_label(cfg);
    std::printf("synth: N=%d structure=%s chordal=%d seconds=%.3f status=%s\n", cfg.N,
                label.c_str(), cfg.synthesis.use_chordal ? 1 : 0, res.synthesis_seconds,
                res.status == SynthesisStatus::Verified         ? "verified"
                : res.status == SynthesisStatus::SynthesisFailed ? "synthesis-failed"
                                                                 : "verify-failed");
    if (!res.message.empty()) std::printf("  %s\n", res.message.c_str());

    nlohmann::json timing;
    timing["N"] = cfg.N;
    timing["structure"] = label;
    timing["use_chordal"] = cfg.synthesis.use_chordal;
    timing["seconds"] = res.synthesis_seconds;
    timing["status"] = res.status == SynthesisStatus::Verified ? "verified" : "failed";
    atomic_write(cfg.out_dir + "/timing-" + sanitize(label) + "-N" + std::to_string(cfg.N) +
                     ".json",
                 timing.dump(2) + "\n");

    if (res.status == SynthesisStatus::SynthesisFailed) return kSynthesisFailed;
    save_certificate(res.certificate, cfg.out_dir + "/certificate.json");
    std::printf("certificate: %s/certificate.json (worst verify eigenvalue %.3e)\n",
                cfg.out_dir.c_str(), res.certificate.margin_achieved);
    return res.status == SynthesisStatus::Verified ? kOk : kVerifyFailed;
}

int cmd_decompose(const CommonArgs& args) {
    RunConfig cfg = load_config_or_die(args);
    LoadedModel lm = build_model(cfg);
    const NetworkModel& model = lm.model();

    auto companion =
        undirected_companion(graph_union(model.physical(), model.communication()));
    auto tri = triangulate(companion);
    auto tree = clique_tree(tri.graph);

    std::printf("cliques: %d\n", tree.size());
    std::printf("fill_edges: %zu\n", tri.fill_edges.size());
    for (const auto& [a, b] : tri.fill_edges) std::printf("  fill (%d, %d)\n", a, b);
    for (int k = 0; k < tree.size(); ++k) {
        std::string line = "clique " + std::to_string(k + 1) + " (size " +
                           std::to_string(tree.cliques[k].size()) + "): nodes";
        for (int node : tree.cliques[k]) line += " " + std::to_string(node);
        line += " | vars";
        for (int node : tree.cliques[k])
            for (int c = 1; c <= model.node(node).n; ++c)
                line += " x[" + std::to_string(node) + "][" + std::to_string(c) + "]";
        std::printf("%s\n", line.c_str());
    }
    return kOk;
}

Eigen::VectorXd pick_x0(const NetworkModel& model, const RunConfig& cfg) {
    const int n = model.stateDim();
    if (cfg.scenario.x0_policy == "target") return Eigen::VectorXd::Zero(n);
    if (cfg.scenario.x0_policy == "explicit") {
        if (static_cast<int>(cfg.scenario.x0_values.size()) != n)
            throw ConfigError("scenario.x0_values has wrong length");
        return Eigen::Map<const Eigen::VectorXd>(cfg.scenario.x0_values.data(), n);
    }
    std::mt19937_64 rng(cfg.scenario.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x0(n);
    for (int k = 0; k < n; ++k) {
        Variable v = model.stateVariable(k);
        auto [lo, hi] = cfg.synthesis.region.interval(v);
        if (!std::isfinite(lo) || !std::isfinite(hi)) {
            lo = -1.0;
            hi = 1.0;
        }
        x0(k) = lo + (hi - lo) * unit(rng);
    }
    return x0;
}

int cmd_simulate(const CommonArgs& args) {
    RunConfig cfg = load_config_or_die(args);
    LoadedModel lm = build_model(cfg);
    const NetworkModel& model = lm.model();
    fs::create_directories(cfg.out_dir);

    CCMCertificate cert = load_certificate(args.cert_path);
    if (cert.gp_fingerprint != model.physical().fingerprint() ||
        cert.gc_fingerprint != model.communication().fingerprint()) {
        std::fprintf(stderr, "certificate fingerprint does not match the configured model\n");
        return kFingerprintMismatch;
    }

    bool pass = false;
    nlohmann::json verdict;
    SimulationTrace trace;
    if (cfg.scenario.name == "platoon_tracking") {
        if (!lm.platoon) throw ConfigError("platoon_tracking scenario needs the platoon model");
        ScenarioOptions opts;
        opts.T_end = cfg.scenario.T_end;
        opts.dt = cfg.scenario.dt;
        opts.with_step = cfg.scenario.with_step;
        opts.with_disturbance = cfg.scenario.with_disturbance;
        opts.S = cfg.scenario.geodesic_segments;
        if (args.open_loop) {
            // feedforward only: replace the certificate gains with zeros
            CCMCertificate zeroed = cert;
            for (auto& [ij, blk] : zeroed.Y_blocks) blk = PolyMatrix(blk.rows(), blk.cols());
            cert = zeroed;
        }
        ScenarioResult res = scenario_platoon_tracking(*lm.platoon, cert, opts);
        trace = res.trace;
        pass = res.converged && !res.trace.diverged;
        verdict["converged"] = res.converged;
        verdict["peak_spacing_error"] = res.peak_spacing_error;
        verdict["peak_spacing_disturbance"] = res.peak_spacing_disturbance;
        verdict["err_pre_disturbance"] = res.err_pre_disturbance;
        std::printf("platoon: converged=%d peak_spacing=%.4f disturbance_peak=%.4f\n",
                    res.converged ? 1 : 0, res.peak_spacing_error, res.peak_spacing_disturbance);
    } else {
        TargetTrajectory target;
        const int n = model.stateDim(), m = model.inputDim();
        target.x_star = [n](double) { return Eigen::VectorXd::Zero(n); };
        target.u_star = [m](double) { return Eigen::VectorXd::Zero(m); };

        ControlLaw law;
        if (args.open_loop) {
            law = [m](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(m); };
        } else {
            auto ctrl = std::make_shared<DistributedController>(model, cert,
                                                                cfg.scenario.geodesic_segments);
            law = [ctrl, n, m](double, const Eigen::VectorXd& x) {
                return ctrl->control(x, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m));
            };
        }
        trace = integrate_closed_loop(model, law, pick_x0(model, cfg), target, cfg.scenario.T_end,
                                      cfg.scenario.dt);
        DecayReport rep = decay_check(trace, cert.lambda);
        pass = rep.pass && !trace.diverged;
        verdict["C_fit"] = rep.C_fit;
        verdict["rate_fit"] = rep.rate_fit;
        verdict["lambda"] = cert.lambda;
        std::printf("decay: pass=%d rate_fit=%.4f C_fit=%.4f lambda=%.4f\n", rep.pass ? 1 : 0,
                    rep.rate_fit, rep.C_fit, cert.lambda);
    }

    trace.scenario = cfg.scenario.name + (args.open_loop ? "-open-loop" : "");
    trace.seed = cfg.scenario.seed;
    trace.cert_fingerprint = cert.gp_fingerprint + ":" + cert.gc_fingerprint;
    write_trace_csv(trace, cfg.out_dir + "/trace.csv");
    verdict["pass"] = pass;
    verdict["diverged"] = trace.diverged;
    verdict["scenario"] = trace.scenario;
    atomic_write(cfg.out_dir + "/decay.json", verdict.dump(2) + "\n");
    return pass ? kOk : kDecayFailed;
}

int cmd_report(const std::string& run_dir) {
    if (!fs::is_directory(run_dir)) {
        std::fprintf(stderr, "report: not a directory: %s\n", run_dir.c_str());
        return kBadConfig;
    }
    struct Row {
        int N;
        std::string structure, status;
        double seconds;
    };
    std::vector<Row> rows;
    std::vector<std::string> decay_lines;
    std::vector<fs::path> entries;
    for (const auto& e : fs::recursive_directory_iterator(run_dir))
        if (e.is_regular_file()) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());

    for (const auto& p : entries) {
        const std::string name = p.filename().string();
        std::ifstream is(p);
        if (name.rfind("timing-", 0) == 0 && p.extension() == ".json") {
            try {
                auto j = nlohmann::json::parse(is);
                rows.push_back({j.at("N").get<int>(), j.at("structure").get<std::string>(),
                                j.at("status").get<std::string>(), j.at("seconds").get<double>()});
            } catch (const std::exception& e) {
                std::fprintf(stderr, "warning: skipping unreadable record %s (%s)\n",
                             p.c_str(), e.what());
            }
        } else if (name == "decay.json") {
            try {
                auto j = nlohmann::json::parse(is);
                std::ostringstream line;
                line << p.parent_path().filename().string() << ": pass="
                     << (j.at("pass").get<bool>() ? 1 : 0);
                if (j.contains("rate_fit")) line << " rate_fit=" << j["rate_fit"].get<double>();
                decay_lines.push_back(line.str());
            } catch (const std::exception& e) {
                std::fprintf(stderr, "warning: skipping unreadable record %s (%s)\n",
                             p.c_str(), e.what());
            }
        }
    }
    if (rows.empty() && decay_lines.empty()) {
        std::fprintf(stderr, "report: no timing or decay records under %s\n", run_dir.c_str());
        return kBadConfig;
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.N != b.N ? a.N < b.N : a.structure < b.structure;
    });

    std::string csv = "N,structure,seconds,status\n";
    std::printf("%-6s %-18s %-10s %s\n", "N", "structure", "seconds", "status");
    for (const Row& r : rows) {
        std::printf("%-6d %-18s %-10.3f %s\n", r.N, r.structure.c_str(), r.seconds,
                    r.status.c_str());
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%s\n", r.N, r.structure.c_str(), r.seconds,
                      r.status.c_str());
        csv += buf;
    }
    for (const auto& line : decay_lines) std::printf("decay %s\n", line.c_str());
    atomic_write((fs::path(run_dir) / "report.csv").string(), csv);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed contraction-based controller synthesis"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string run_dir;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", args.config_path, "run config JSON")->required();
        sub->add_option("--out-dir", args.out_dir, "output directory (overrides config)");
        sub->add_option("--seed", args.seed, "override synthesis and scenario seeds");
        sub->add_option("--threads", args.threads, "worker threads (env CCMNET_THREADS)");
    };

    CLI::App* synth = app.add_subcommand("synth", "synthesize and verify a certificate");
    add_common(synth, true);
    CLI::App* dec = app.add_subcommand("decompose", "print the clique decomposition");
    add_common(dec, true);
    CLI::App* sim = app.add_subcommand("simulate", "closed-loop simulation and decay verdict");
    add_common(sim, true);
    sim->add_option("--cert", args.cert_path, "certificate JSON")->required();
    sim->add_flag("--open-loop", args.open_loop, "disable feedback");
    CLI::App* rep = app.add_subcommand("report", "aggregate timing and decay records");
    rep->add_option("--out-dir", run_dir, "run directory")->required();
    rep->add_option("--threads", args.threads, "worker threads");

    CLI11_PARSE(app, argc, argv);
    Eigen::setNbThreads(resolve_threads(args.threads));

    try {
        if (synth->parsed()) return cmd_synth(args);
        if (dec->parsed()) return cmd_decompose(args);
        if (sim->parsed()) return cmd_simulate(args);
        return cmd_report(run_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kBadConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadConfig;
    }
}
