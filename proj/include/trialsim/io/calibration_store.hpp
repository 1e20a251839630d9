#pragma once

#include "trialsim/calibration.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace trialsim::io {

/// Evaluations saved by an earlier calibration with the same design, settings, n_rep and seed;
/// empty if the file does not exist. A file written for anything else raises ManifestMismatch.
std::vector<Evaluation> load_calibration_evaluations(const std::filesystem::path& path, const ValidatedSpec& spec,
                                                     const CalibrationSettings& settings, int n_rep,
                                                     std::uint64_t base_seed);

void save_calibration(const std::filesystem::path& path, const ValidatedSpec& spec, const TrialCalibration& result);

/// Plain-text report of a calibration run.
std::string calibration_report(const TrialCalibration& result, double seconds);

}  // namespace trialsim::io
