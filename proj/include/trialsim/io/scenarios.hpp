#pragma once

#include "trialsim/trial_spec.hpp"

#include <string>
#include <vector>

namespace trialsim::io {

struct Scenario {
    std::string label;
    ValidatedSpec spec;
};

/// "A 25.0 - B 27.5 - C 25.0": arm names without a leading "Arm ", truths with one decimal
/// (event probabilities as percentages).
std::string scenario_label(const ValidatedSpec& spec);

/// Adds every combination of `effects` to the truth of the free arms (those not listed in
/// `fixed_arms`); the first free arm varies fastest. Without a control arm, scenarios that
/// only permute truths among free arms are emitted once.
std::vector<Scenario> scenario_grid(const ValidatedSpec& base, const std::vector<double>& effects,
                                    const std::vector<std::string>& fixed_arms);

}  // namespace trialsim::io
