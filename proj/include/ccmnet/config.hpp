#ifndef CCMNET_CONFIG_HPP
#define CCMNET_CONFIG_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccmnet/scenarios.hpp"
#include "ccmnet/synthesis.hpp"

namespace ccmnet {

/// Raised for malformed or schema-violating run configs; the message names
/// the offending section and key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScenarioConfig {
    std::string name = "decay";  // "decay" | "platoon_tracking"
    double T_end = 20.0;
    double dt = 0.01;
    std::string x0_policy = "random";  // "random" | "target" | "explicit"
    std::vector<double> x0_values;
    std::uint64_t seed = 1;
    bool with_step = true;
    bool with_disturbance = true;
    int geodesic_segments = 16;
};

/// Parsed run description: either a named builtin model or explicit node
/// dynamics, plus synthesis, scenario and output settings.
struct RunConfig {
    // model section
    std::string builtin;  // "" (explicit nodes) | "cubic_network" | "platoon"
    int N = 0;
    std::uint64_t model_seed = 0;  // platoon parameter draw
    int horizon = 1;               // platoon communication band
    std::vector<NodeSpec> nodes;   // explicit models
    std::string g_p_literal, g_c_literal;

    SynthesisConfig synthesis;
    ScenarioConfig scenario;
    std::string out_dir = ".";
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// The network realized from a config; platoon runs keep the drawn
/// parameters alongside (the scenario needs them).
struct LoadedModel {
    std::optional<PlatoonModel> platoon;
    std::optional<NetworkModel> generic;
    const NetworkModel& model() const { return platoon ? platoon->model : *generic; }
};
LoadedModel build_model(const RunConfig& cfg);

}  // namespace ccmnet

#endif
