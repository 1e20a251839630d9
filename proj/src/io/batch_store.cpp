#include "trialsim/io/batch_store.hpp"

#include "trialsim/io/serialize.hpp"
#include "trialsim/version.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace trialsim::io {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'I', 'M', 'B', 'A', 'T', '\0'};

nlohmann::json manifest_json(const RunManifest& m) {
    return {{"fingerprint", m.fingerprint}, {"n_rep", m.n_rep},       {"base_seed", m.base_seed},
            {"engine_version", m.engine_version}, {"label", m.label}, {"arms", m.arms},
            {"true_ys", m.true_ys}};
}

RunManifest manifest_from(const nlohmann::json& j) {
    RunManifest m;
    m.fingerprint = j.at("fingerprint").get<std::string>();
    m.n_rep = j.at("n_rep").get<std::uint64_t>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.engine_version = j.at("engine_version").get<std::string>();
    m.label = j.at("label").get<std::string>();
    m.arms = j.at("arms").get<std::vector<std::string>>();
    m.true_ys = j.at("true_ys").get<std::vector<double>>();
    return m;
}

template <class T>
void put(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw std::runtime_error("batch store " + path.string() + " is truncated");
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void save_batch(const std::filesystem::path& path, const RunManifest& manifest,
                const std::vector<TrialResult>& results) {
    if (manifest.n_rep != results.size()) throw std::invalid_argument("save_batch: manifest n_rep differs from batch size");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write to a temporary sibling and rename, so an interrupted run never leaves a torn store.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write batch store " + tmp.string());
        out.write(kMagic.data(), kMagic.size());
        put<std::uint32_t>(out, kStoreFormatVersion);
        const std::string header = manifest_json(manifest).dump();
        put<std::uint64_t>(out, header.size());
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        put<std::uint64_t>(out, results.size());
        for (const TrialResult& r : results) write_result(out, r);
        if (!out.flush()) throw std::runtime_error("failed writing batch store " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

StoredBatch load_batch(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open batch store " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw std::runtime_error(path.string() + " is not a trialsim batch store");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version > kStoreFormatVersion) {
        throw std::runtime_error("batch store " + path.string() + " uses format version " + std::to_string(version) +
                                 ", newer than this build supports (" + std::to_string(kStoreFormatVersion) + ")");
    }
    const auto header_size = get<std::uint64_t>(in, path);
    if (header_size > (std::uint64_t{1} << 30)) throw std::runtime_error("batch store header is implausibly large");
    std::string header(header_size, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(header_size))) {
        throw std::runtime_error("batch store " + path.string() + " is truncated");
    }
    StoredBatch batch;
    batch.manifest = manifest_from(nlohmann::json::parse(header));
    const auto count = get<std::uint64_t>(in, path);
    if (count != batch.manifest.n_rep) throw std::runtime_error("batch store " + path.string() + " is inconsistent");
    batch.results.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) batch.results.push_back(read_result(in));
    return batch;
}

std::vector<TrialResult> run_batch(const ValidatedSpec& spec, std::uint64_t n_rep, std::uint64_t base_seed,
                                   int workers, const std::optional<std::filesystem::path>& store,
                                   const std::string& label, BatchStats* stats) {
    if (n_rep < 1) throw std::invalid_argument("n_rep must be positive");
    RunManifest manifest;
    manifest.fingerprint = fingerprint(spec);
    manifest.n_rep = n_rep;
    manifest.base_seed = base_seed;
    manifest.engine_version = kEngineVersion;
    manifest.label = label;
    manifest.arms = spec.spec().arms;
    manifest.true_ys = spec.true_ys();

    std::vector<TrialResult> results;
    if (store && std::filesystem::exists(*store)) {
        StoredBatch stored = load_batch(*store);
        const RunManifest& m = stored.manifest;
        auto mismatch = [&](const std::string& what) {
            throw ManifestMismatch("stored batch " + store->string() + " was made with a different " + what +
                                   "; remove it or choose another output path");
        };
        if (m.fingerprint != manifest.fingerprint) mismatch("design (fingerprint " + m.fingerprint.substr(0, 12) + ")");
        if (m.base_seed != base_seed) mismatch("base seed (" + std::to_string(m.base_seed) + ")");
        if (m.engine_version != manifest.engine_version) mismatch("engine version (" + m.engine_version + ")");
        results = std::move(stored.results);
    }
    const std::size_t have = std::min<std::size_t>(results.size(), n_rep);
    if (stats) {
        stats->loaded = have;
        stats->simulated = n_rep - have;
    }
    if (results.size() >= n_rep) {
        results.resize(n_rep);
        return results;
    }
    const std::size_t old_n = results.size();
    results.resize(n_rep);
    run_trials(spec, base_seed, old_n, std::span<TrialResult>(results).subspan(old_n), workers);
    if (store) save_batch(*store, manifest, results);
    return results;
}

}  // namespace trialsim::io
