#pragma once

#include "trialsim/decision_engine.hpp"
#include "trialsim/trial_spec.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trialsim::io {

/// Identity of a stored batch. The wall-clock time of a run goes to the session log rather than
/// here, so that identical runs write identical files.
struct RunManifest {
    std::string fingerprint;
    std::uint64_t n_rep = 0;
    std::uint64_t base_seed = 0;
    std::string engine_version;
    std::string label;
    std::vector<std::string> arms;
    std::vector<double> true_ys;

    bool operator==(const RunManifest&) const = default;
};

class ManifestMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kStoreFormatVersion = 1;

struct StoredBatch {
    RunManifest manifest;
    std::vector<TrialResult> results;
};

void save_batch(const std::filesystem::path& path, const RunManifest& manifest,
                const std::vector<TrialResult>& results);
StoredBatch load_batch(const std::filesystem::path& path);

struct BatchStats {
    std::size_t loaded = 0;
    std::size_t simulated = 0;
};

/// Runs sims 0..n_rep-1 (stream id = sim index). With a store path, a matching stored batch is
/// loaded instead of recomputed and a shorter one is extended; any other stored batch raises
/// ManifestMismatch.
std::vector<TrialResult> run_batch(const ValidatedSpec& spec, std::uint64_t n_rep, std::uint64_t base_seed,
                                   int workers, const std::optional<std::filesystem::path>& store = std::nullopt,
                                   const std::string& label = {}, BatchStats* stats = nullptr);

}  // namespace trialsim::io
