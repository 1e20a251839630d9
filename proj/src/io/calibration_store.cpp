#include "trialsim/io/calibration_store.hpp"

#include "trialsim/io/batch_store.hpp"
#include "trialsim/io/serialize.hpp"
#include "trialsim/version.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace trialsim::io {

namespace {

nlohmann::json settings_json(const CalibrationSettings& s) {
    return {{"target", s.target},
            {"range", {s.range_lo, s.range_hi}},
            {"tol", s.tol},
            {"dir", s.dir},
            {"iter_max", s.iter_max},
            {"gp",
             {{"resolution", s.gp.resolution},
              {"kappa", s.gp.kappa},
              {"pow", s.gp.pow},
              {"lengthscale", s.gp.lengthscale},
              {"x_scaled", s.gp.x_scaled},
              {"narrowing", s.gp.narrowing}}}};
}

// The search settings that make earlier evaluations reusable: the evaluated function depends only
// on the design, n_rep and seed, so target/tolerance changes keep old points valid.
nlohmann::json identity_json(const ValidatedSpec& spec, int n_rep, std::uint64_t base_seed) {
    return {{"design_fingerprint", design_fingerprint(spec)},
            {"fingerprint", fingerprint(spec)},
            {"n_rep", n_rep},
            {"base_seed", base_seed},
            {"engine_version", kEngineVersion}};
}

std::string fmt(double v, const char* format = "%.7g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

}  // namespace

std::vector<Evaluation> load_calibration_evaluations(const std::filesystem::path& path, const ValidatedSpec& spec,
                                                     const CalibrationSettings&, int n_rep,
                                                     std::uint64_t base_seed) {
    if (!std::filesystem::exists(path)) return {};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open calibration file " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (j.at("identity") != identity_json(spec, n_rep, base_seed)) {
        throw ManifestMismatch("calibration file " + path.string() +
                               " belongs to a different design, n_rep, seed or engine version");
    }
    std::vector<Evaluation> out;
    for (const auto& e : j.at("evaluations")) out.push_back({e.at("x").get<double>(), e.at("y").get<double>()});
    return out;
}

void save_calibration(const std::filesystem::path& path, const ValidatedSpec& spec, const TrialCalibration& r) {
    nlohmann::json j;
    j["identity"] = identity_json(spec, r.n_rep, r.base_seed);
    j["settings"] = settings_json(r.settings);
    j["evaluations"] = nlohmann::json::array();
    for (const auto& e : r.outcome.evaluations) j["evaluations"].push_back({{"x", e.x}, {"y", e.y}});
    j["best_x"] = r.outcome.best_x;
    j["best_y"] = r.outcome.best_y;
    j["success"] = r.outcome.success;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write calibration file " + path.string());
    out << j.dump(2) << '\n';
}

std::string calibration_report(const TrialCalibration& r, double seconds) {
    const auto& s = r.settings;
    const auto& o = r.outcome;
    std::ostringstream out;
    out << "Trial calibration:\n"
        << "* Result: " << (o.success ? "calibration successful" : "calibration unsuccessful") << '\n'
        << "* Best x: " << fmt(o.best_x) << '\n'
        << "* Best y: " << fmt(o.best_y) << "\n\n"
        << "Central settings:\n"
        << "* Target: " << fmt(s.target) << '\n'
        << "* Tolerance: " << fmt(s.tol) << " (" << (s.dir < 0 ? "at or below target" : s.dir > 0 ? "at or above target" : "at or around target")
        << ", range: " << fmt(s.dir > 0 ? s.target : s.target - s.tol) << " to "
        << fmt(s.dir < 0 ? s.target : s.target + s.tol) << ")\n"
        << "* Search range: " << fmt(s.range_lo) << " to " << fmt(s.range_hi) << '\n'
        << "* Gaussian process controls:\n"
        << "  - resolution: " << s.gp.resolution << '\n'
        << "  - kappa: " << fmt(s.gp.kappa) << '\n'
        << "  - pow: " << fmt(s.gp.pow) << '\n'
        << "  - lengthscale: " << fmt(s.gp.lengthscale) << " (constant)\n"
        << "  - scaled x: " << (s.gp.x_scaled ? "yes" : "no") << '\n'
        << "* Noisy: no\n"
        << "* Narrowing: " << (s.gp.narrowing ? "yes" : "no") << "\n\n"
        << "Calibration/simulation details:\n"
        << "* Total evaluations: " << o.evaluations.size() << " (" << o.n_previous << " previous + "
        << o.evaluations.size() - o.n_previous << " new)\n"
        << "* Repetitions: " << r.n_rep << '\n'
        << "* Calibration time: " << fmt(seconds, "%.1f") << " secs\n"
        << "* Base random seed: " << r.base_seed << "\n\n"
        << "Evaluations (x, y):\n";
    for (std::size_t i = 0; i < o.evaluations.size(); ++i) {
        out << "  " << i + 1 << ": " << fmt(o.evaluations[i].x, "%.9g") << ", " << fmt(o.evaluations[i].y, "%.6g")
            << (i < o.n_previous ? "  (previous)" : "") << '\n';
    }
    return out.str();
}

}  // namespace trialsim::io
