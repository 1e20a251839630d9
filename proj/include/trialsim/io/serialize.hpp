#pragma once

#include "trialsim/decision_engine.hpp"
#include "trialsim/trial_spec.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace trialsim::io {

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from(std::string_view text);
std::string_view to_string(ControlProbRule rule);
ControlProbRule control_rule_from(std::string_view text);

/// Canonical JSON form of a normalised spec (every field, arms in canonical order).
nlohmann::json spec_to_json(const ValidatedSpec& spec);

/// SHA-256 hex digest of the canonical JSON.
std::string fingerprint(const ValidatedSpec& spec);
/// Same, ignoring the scenario truth: designs that differ only in true parameters share it.
std::string design_fingerprint(const ValidatedSpec& spec);

std::string sha256_hex(std::string_view data);

/// Fixed-layout binary record (little-endian) of one result; the trace is not stored.
void write_result(std::ostream& out, const TrialResult& result);
TrialResult read_result(std::istream& in);

}  // namespace trialsim::io
