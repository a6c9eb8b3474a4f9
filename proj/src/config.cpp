#include "ccmnet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ccmnet {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
    }
}

double bound_value(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf") return Region::kInf;
        if (s == "-inf") return -Region::kInf;
    }
    throw ConfigError(where + ": bound must be a number or \"inf\"/\"-inf\"");
}

Variable single_variable(const std::string& text, const std::string& where) {
    Polynomial p;
    try {
        p = parse_polynomial(text);
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (p.terms().size() != 1) throw ConfigError(where + ": '" + text + "' is not a variable");
    const auto& [mono, coeff] = *p.terms().begin();
    if (coeff != 1.0 || mono.size() != 1 || mono[0].second != 1)
        throw ConfigError(where + ": '" + text + "' is not a variable");
    return mono[0].first;
}

Region parse_region(const json& j) {
    check_keys(j, "synthesis.region", {"state_default", "input_default", "overrides"});
    Region region;
    if (j.contains("state_default")) {
        const auto& b = j["state_default"];
        if (!b.is_array() || b.size() != 2)
            throw ConfigError("synthesis.region.state_default must be [lo, hi]");
        region.setStateDefault(bound_value(b[0], "state_default"), bound_value(b[1], "state_default"));
    }
    if (j.contains("input_default")) {
        const auto& b = j["input_default"];
        if (!b.is_array() || b.size() != 2)
            throw ConfigError("synthesis.region.input_default must be [lo, hi]");
        region.setInputDefault(bound_value(b[0], "input_default"), bound_value(b[1], "input_default"));
    }
    if (j.contains("overrides")) {
        if (!j["overrides"].is_array()) throw ConfigError("synthesis.region.overrides must be an array");
        for (const auto& ov : j["overrides"]) {
            check_keys(ov, "synthesis.region.overrides[]", {"var", "lo", "hi"});
            if (!ov.contains("var") || !ov.contains("lo") || !ov.contains("hi"))
                throw ConfigError("region override needs var, lo, hi");
            region.setInterval(single_variable(ov["var"].get<std::string>(), "region override"),
                               bound_value(ov["lo"], "region override"),
                               bound_value(ov["hi"], "region override"));
        }
    }
    return region;
}

Polynomial parse_poly_field(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": polynomial must be a string");
    try {
        return parse_polynomial(v.get<std::string>());
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::vector<NodeSpec> parse_nodes(const json& arr) {
    if (!arr.is_array() || arr.empty()) throw ConfigError("model.nodes must be a non-empty array");
    std::vector<NodeSpec> nodes;
    int idx = 1;
    for (const auto& nj : arr) {
        const std::string where = "model.nodes[" + std::to_string(idx) + "]";
        check_keys(nj, where, {"n", "m", "f", "b"});
        NodeSpec nd;
        if (!nj.contains("n") || !nj["n"].is_number_integer())
            throw ConfigError(where + ": integer 'n' required");
        nd.n = nj["n"].get<int>();
        nd.m = nj.value("m", 0);
        if (nd.n <= 0 || nd.m < 0) throw ConfigError(where + ": bad dimensions");
        if (!nj.contains("f") || !nj["f"].is_array() || static_cast<int>(nj["f"].size()) != nd.n)
            throw ConfigError(where + ": 'f' must list n polynomials");
        nd.f = PolyMatrix(nd.n, 1);
        for (int r = 0; r < nd.n; ++r) nd.f.at(r, 0) = parse_poly_field(nj["f"][r], where + ".f");
        nd.b = PolyMatrix(nd.n, nd.m);
        if (nd.m > 0) {
            if (!nj.contains("b") || !nj["b"].is_array() || static_cast<int>(nj["b"].size()) != nd.n)
                throw ConfigError(where + ": 'b' must have n rows");
            for (int r = 0; r < nd.n; ++r) {
                const auto& row = nj["b"][r];
                if (!row.is_array() || static_cast<int>(row.size()) != nd.m)
                    throw ConfigError(where + ": 'b' rows must have m entries");
                for (int c = 0; c < nd.m; ++c)
                    nd.b.at(r, c) = parse_poly_field(row[c], where + ".b");
            }
        }
        nodes.push_back(std::move(nd));
        ++idx;
    }
    return nodes;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    check_keys(root, "(top level)", {"model", "synthesis", "scenario", "output"});
    if (!root.contains("model")) throw ConfigError("missing required section 'model'");

    RunConfig cfg;
    const json& mj = root["model"];
    check_keys(mj, "model", {"builtin", "N", "seed", "horizon", "nodes", "g_p", "g_c"});
    cfg.builtin = mj.value("builtin", std::string());
    if (cfg.builtin.empty()) {
        if (!mj.contains("nodes")) throw ConfigError("model: either 'builtin' or 'nodes' required");
        cfg.nodes = parse_nodes(mj["nodes"]);
        cfg.N = static_cast<int>(cfg.nodes.size());
        if (!mj.contains("g_p") || !mj.contains("g_c"))
            throw ConfigError("model: explicit models need 'g_p' and 'g_c' graph literals");
    } else if (cfg.builtin != "cubic_network" && cfg.builtin != "platoon") {
        throw ConfigError("model.builtin: unknown builtin '" + cfg.builtin + "'");
    } else {
        if (!mj.contains("N") || !mj["N"].is_number_integer())
            throw ConfigError("model: builtin models need integer 'N'");
        cfg.N = mj["N"].get<int>();
        if (cfg.N < 1) throw ConfigError("model.N must be positive");
    }
    cfg.model_seed = mj.value("seed", 0ull);
    cfg.horizon = mj.value("horizon", 1);
    if (mj.contains("g_p")) cfg.g_p_literal = mj["g_p"].get<std::string>();
    if (mj.contains("g_c")) cfg.g_c_literal = mj["g_c"].get<std::string>();
    if (cfg.builtin == "cubic_network" && cfg.g_c_literal.empty())
        throw ConfigError("model: cubic_network needs a 'g_c' literal");

    if (root.contains("synthesis")) {
        const json& sj = root["synthesis"];
        check_keys(sj, "synthesis",
                   {"lambda", "epsilon", "w_low", "w_high", "max_degree_Y", "max_degree_W",
                    "grid_density", "verify_density", "use_chordal", "seed", "max_samples",
                    "solver_max_sweeps", "refine_rounds", "margin_boost_rounds",
                    "rate_boost_rounds", "region"});
        SynthesisConfig& s = cfg.synthesis;
        s.lambda = sj.value("lambda", s.lambda);
        s.epsilon = sj.value("epsilon", s.epsilon);
        s.w_low = sj.value("w_low", s.w_low);
        s.w_high = sj.value("w_high", s.w_high);
        s.max_degree_Y = sj.value("max_degree_Y", s.max_degree_Y);
        s.max_degree_W = sj.value("max_degree_W", s.max_degree_W);
        s.grid_density = sj.value("grid_density", s.grid_density);
        s.verify_density = sj.value("verify_density", s.verify_density);
        s.use_chordal = sj.value("use_chordal", s.use_chordal);
        s.seed = sj.value("seed", s.seed);
        s.max_samples = sj.value("max_samples", s.max_samples);
        s.solver_max_sweeps = sj.value("solver_max_sweeps", s.solver_max_sweeps);
        s.margin_boost_rounds = sj.value("margin_boost_rounds", s.margin_boost_rounds);
        s.rate_boost_rounds = sj.value("rate_boost_rounds", s.rate_boost_rounds);
        s.refine_rounds = sj.value("refine_rounds", s.refine_rounds);
        if (s.lambda <= 0) throw ConfigError("synthesis.lambda must be positive");
        if (sj.contains("region")) s.region = parse_region(sj["region"]);
    }

    if (root.contains("scenario")) {
        const json& cj = root["scenario"];
        check_keys(cj, "scenario",
                   {"name", "T_end", "dt", "x0", "x0_values", "seed", "with_step",
                    "with_disturbance", "geodesic_segments"});
        ScenarioConfig& c = cfg.scenario;
        c.name = cj.value("name", c.name);
        if (c.name != "decay" && c.name != "platoon_tracking")
            throw ConfigError("scenario.name: unknown scenario '" + c.name + "'");
        c.T_end = cj.value("T_end", c.T_end);
        c.dt = cj.value("dt", c.dt);
        if (c.dt <= 0 || c.T_end <= 0) throw ConfigError("scenario: T_end and dt must be positive");
        c.x0_policy = cj.value("x0", c.x0_policy);
        if (c.x0_policy != "random" && c.x0_policy != "target" && c.x0_policy != "explicit")
            throw ConfigError("scenario.x0: must be random, target or explicit");
        if (cj.contains("x0_values")) c.x0_values = cj["x0_values"].get<std::vector<double>>();
        if (c.x0_policy == "explicit" && c.x0_values.empty())
            throw ConfigError("scenario: x0 'explicit' needs x0_values");
        c.seed = cj.value("seed", c.seed);
        c.with_step = cj.value("with_step", c.with_step);
        c.with_disturbance = cj.value("with_disturbance", c.with_disturbance);
        c.geodesic_segments = cj.value("geodesic_segments", c.geodesic_segments);
    }

    if (root.contains("output")) {
        const json& oj = root["output"];
        check_keys(oj, "output", {"dir"});
        cfg.out_dir = oj.value("dir", cfg.out_dir);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_run_config(ss.str());
}

LoadedModel build_model(const RunConfig& cfg) {
    LoadedModel out;
    try {
        if (cfg.builtin == "platoon") {
            out.platoon = build_platoon(cfg.N, cfg.model_seed, cfg.horizon);
        } else if (cfg.builtin == "cubic_network") {
            out.generic = build_cubic_network(cfg.N, parse_graph_literal(cfg.g_c_literal));
        } else {
            out.generic = NetworkModel(cfg.nodes, parse_graph_literal(cfg.g_p_literal),
                                       parse_graph_literal(cfg.g_c_literal));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("model construction failed: ") + e.what());
    }
    auto report = out.model().validate();
    if (!report.ok()) {
        std::string msg = "model validation failed:";
        for (const auto& v : report.violations) msg += "\n  " + v;
        throw ConfigError(msg);
    }
    return out;
}

}  // namespace ccmnet
