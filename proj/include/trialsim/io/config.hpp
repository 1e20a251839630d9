#pragma once

#include "trialsim/io/scenarios.hpp"
#include "trialsim/trial_spec.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trialsim::io {

/// Schema or validation problem in a config file; what() carries "source:line: message" lines.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioDef {
    std::string label;  // empty = generated label
    std::vector<ArmTruth> truth;
};

struct ScenarioGridDef {
    std::vector<double> effects;
    std::vector<std::string> fixed_arms;
};

struct DesignConfig {
    std::string name;
    ValidatedSpec spec;
    std::vector<ScenarioDef> scenarios;
    std::optional<ScenarioGridDef> grid;
};

/// Listed scenarios followed by the grid expansion; the base design alone when neither is given.
std::vector<Scenario> design_scenarios(const DesignConfig& design);

/// One design per YAML document. Unknown keys, wrong types and failed validation are reported
/// with line numbers.
std::vector<DesignConfig> parse_config(const std::filesystem::path& path);
std::vector<DesignConfig> parse_config_string(const std::string& text, const std::string& source = "<config>");

}  // namespace trialsim::io
