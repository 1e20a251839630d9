#pragma once

#include "trialsim/metrics.hpp"
#include "trialsim/trial_spec.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace trialsim::io {

/// Shortest representation that reads back to the same double; "NA" for absent or non-finite.
std::string format_number(std::optional<double> value);
/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& text);

/// One row per metric: metric,est,err_sd,err_mad,lo,hi (uncertainty blank when not bootstrapped).
void write_metrics_csv(std::ostream& out, const PerformanceSummary& summary);

struct ScenarioSummary {
    std::string label;
    std::vector<std::string> arms;
    std::vector<double> true_ys;
    PerformanceSummary summary;
};

/// Long format: scenario,metric,est,err_sd,err_mad,lo,hi for every scenario. Header only when empty.
void write_scenario_metrics_csv(std::ostream& out, const std::vector<ScenarioSummary>& scenarios);

/// Key results, one row per scenario: label, truth per arm, then size_mean, prob_conclusive,
/// prob_superior, prob_equivalence, prob_futility, prob_max, selection probabilities, rmse, mae, idp.
void write_key_results_csv(std::ostream& out, const std::vector<ScenarioSummary>& scenarios);

void write_combos_csv(std::ostream& out, const std::vector<ArmCombo>& combos, const std::vector<std::string>& arms);

/// Writes through `write` into `path` (parent directories created).
template <class F>
void write_file(const std::filesystem::path& path, F&& write);

}  // namespace trialsim::io

#include <fstream>
#include <stdexcept>

template <class F>
void trialsim::io::write_file(const std::filesystem::path& path, F&& write) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write(out);
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}
