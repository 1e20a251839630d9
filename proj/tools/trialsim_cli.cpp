// trialsim: batch front end for simulating, calibrating and summarising adaptive trial designs.

#include "trialsim/calibration.hpp"
#include "trialsim/io/batch_store.hpp"
#include "trialsim/io/calibration_store.hpp"
#include "trialsim/io/config.hpp"
#include "trialsim/io/export.hpp"
#include "trialsim/io/serialize.hpp"
#include "trialsim/io/session_log.hpp"
#include "trialsim/metrics.hpp"
#include "trialsim/version.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace trialsim;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> designs;
    std::uint64_t n_rep = 1000;
    std::uint64_t seed = 4131;
    int workers = 0;
    std::string out = "trialsim_out";
    std::string select = "none";
    int boot = 0;
    double ci_width = 0.95;
    std::optional<double> superiority;
};

void add_config(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "design config (YAML)")->required()->check(CLI::ExistingFile);
    app->add_option("--design", c.designs, "design name(s) to use (default: all)");
}

void add_run(CLI::App* app, Common& c) {
    app->add_option("--n-rep", c.n_rep, "number of simulated trials")->check(CLI::PositiveNumber);
    app->add_option("--seed", c.seed, "base random seed");
    app->add_option("--workers", c.workers, "worker threads (0 = all cores)");
    app->add_option("--out", c.out, "output directory");
}

void add_summary(CLI::App* app, Common& c) {
    app->add_option("--select-strategy", c.select, "arm selection: none, best, control or list:ARM,...");
    app->add_option("--boot", c.boot, "bootstrap resamples for metric uncertainty (0 = none)")->check(CLI::NonNegativeNumber);
    app->add_option("--ci-width", c.ci_width, "bootstrap interval width")->check(CLI::Range(0.0, 1.0));
}

void add_threshold(CLI::App* app, Common& c) {
    app->add_option("--superiority", c.superiority,
                    "use this superiority threshold and 1 - it for inferiority at every look")
        ->check(CLI::Range(0.5, 1.0));
}

std::vector<io::DesignConfig> selected_designs(const Common& c) {
    auto all = io::parse_config(c.config);
    if (c.designs.empty()) return all;
    std::vector<io::DesignConfig> out;
    for (const auto& name : c.designs) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const auto& d) { return d.name == name; });
        if (it == all.end()) throw std::invalid_argument("no design named '" + name + "' in " + c.config);
        out.push_back(*it);
    }
    return out;
}

ValidatedSpec effective_spec(const ValidatedSpec& spec, const Common& c) {
    return c.superiority ? with_symmetric_thresholds(spec, *c.superiority) : spec;
}

SummaryOptions summary_options(const Common& c) {
    SummaryOptions o;
    o.select = SelectionStrategy::parse(c.select);
    o.n_boot = c.boot;
    o.ci_width = c.ci_width;
    o.boot_seed = c.seed;
    return o;
}

std::string num(double v, const char* format = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

void print_key_metrics(const std::string& label, const PerformanceSummary& s) {
    std::cout << label << ": size_mean " << num(s["size_mean"], "%.1f") << ", prob_superior "
              << num(s["prob_superior"]) << ", prob_equivalence " << num(s["prob_equivalence"]) << ", prob_futility "
              << num(s["prob_futility"]) << ", prob_max " << num(s["prob_max"]);
    if (s.bootstrapped) {
        const auto& sup = s.at("prob_superior");
        std::cout << " (prob_superior " << num(s.ci_width * 100, "%.0f") << "% CI " << num(*sup.lo) << " to "
                  << num(*sup.hi) << ")";
    }
    std::cout << '\n';
}

void log_common(io::SessionLog& log, const Common& c) {
    log.set("config", c.config);
    log.set("n_rep", std::to_string(c.n_rep));
    log.set("base_seed", std::to_string(c.seed));
    log.set("workers", std::to_string(c.workers));
    log.set("select_strategy", c.select);
    log.set("boot", std::to_string(c.boot));
    if (c.superiority) log.set("superiority", io::format_number(*c.superiority));
}

// ---------------------------------------------------------------------------------------------

int cmd_validate(const Common& c) {
    for (const auto& d : io::parse_config(c.config)) {
        const auto& s = d.spec.spec();
        std::cout << d.name << ": ok (" << d.spec.n_arms() << " arms, " << d.spec.n_looks() << " looks, max "
                  << s.data_looks.back() << " participants, " << io::design_scenarios(d).size()
                  << " scenario(s), fingerprint " << io::fingerprint(d.spec).substr(0, 12) << ")\n";
    }
    return 0;
}

int cmd_simulate(const Common& c, io::SessionLog& log) {
    const SummaryOptions options = summary_options(c);
    for (const auto& d : selected_designs(c)) {
        const ValidatedSpec spec = effective_spec(d.spec, c);
        io::BatchStats stats;
        const fs::path store = fs::path(c.out) / (d.name + ".batch");
        const auto results = io::run_batch(spec, c.n_rep, c.seed, c.workers, store, d.name, &stats);
        log.mark("simulate " + d.name);
        const auto summary = summarize_batch(results, spec, options);
        log.mark("summarise " + d.name);
        const fs::path csv = fs::path(c.out) / (d.name + "_metrics.csv");
        io::write_file(csv, [&](std::ostream& out) { io::write_metrics_csv(out, summary); });
        std::cout << d.name << ": " << stats.simulated << " simulated, " << stats.loaded << " loaded from "
                  << store.string() << '\n';
        print_key_metrics(d.name, summary);
        std::cout << "metrics written to " << csv.string() << '\n';
    }
    return 0;
}

int cmd_calibrate(const Common& c, const CalibrationSettings& settings, io::SessionLog& log) {
    log.set("target", io::format_number(settings.target));
    log.set("tol", io::format_number(settings.tol));
    log.set("dir", std::to_string(settings.dir));
    log.set("range", io::format_number(settings.range_lo) + " " + io::format_number(settings.range_hi));
    log.set("iter_max", std::to_string(settings.iter_max));
    for (const auto& d : selected_designs(c)) {
        const fs::path state = fs::path(c.out) / (d.name + "_calibration.json");
        const auto previous =
            io::load_calibration_evaluations(state, d.spec, settings, static_cast<int>(c.n_rep), c.seed);
        const auto start = std::chrono::steady_clock::now();
        const TrialCalibration result =
            calibrate_trial(d.spec, settings, static_cast<int>(c.n_rep), c.seed, c.workers, previous);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.mark("calibrate " + d.name);
        io::save_calibration(state, d.spec, result);

        const std::string report = io::calibration_report(result, seconds);
        io::write_file(fs::path(c.out) / (d.name + "_calibration.txt"), [&](std::ostream& out) { out << report; });
        std::cout << d.name << '\n' << report;

        // The best batch doubles as a regular stored batch at the calibrated threshold.
        io::RunManifest manifest{io::fingerprint(*result.best_spec), c.n_rep, c.seed, kEngineVersion,
                                 d.name + " calibrated", result.best_spec->spec().arms, result.best_spec->true_ys()};
        io::save_batch(fs::path(c.out) / (d.name + "_calibrated.batch"), manifest, result.best_batch);
        const auto summary = summarize_batch(result.best_batch, *result.best_spec, summary_options(c));
        io::write_file(fs::path(c.out) / (d.name + "_calibrated_metrics.csv"),
                       [&](std::ostream& out) { io::write_metrics_csv(out, summary); });
        print_key_metrics(d.name + " at best x", summary);
        if (!result.outcome.success) {
            std::cerr << "calibration did not reach the tolerance band within " << settings.iter_max
                      << " evaluations; consider a wider range, more repetitions or more iterations\n";
            return 3;
        }
    }
    return 0;
}

int cmd_scenarios(const Common& c, const std::vector<double>& effects, const std::vector<std::string>& fixed_arms,
                  io::SessionLog& log) {
    const SummaryOptions options = summary_options(c);
    for (const auto& d : selected_designs(c)) {
        std::vector<io::Scenario> scenarios;
        if (!effects.empty()) {
            scenarios = io::scenario_grid(d.spec, effects, fixed_arms);
        } else {
            scenarios = io::design_scenarios(d);
        }
        std::vector<io::ScenarioSummary> summaries;
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            const ValidatedSpec spec = effective_spec(scenarios[i].spec, c);
            // Scenario i (1-based) uses base seed + i.
            const std::uint64_t seed = c.seed + i + 1;
            const fs::path store = fs::path(c.out) / (d.name + "_scenarios") / ("scenario_" + std::to_string(i + 1) + ".batch");
            io::BatchStats stats;
            const auto results = io::run_batch(spec, c.n_rep, seed, c.workers, store, scenarios[i].label, &stats);
            SummaryOptions o = options;
            o.boot_seed = seed;
            auto summary = summarize_batch(results, spec, o);
            print_key_metrics(scenarios[i].label, summary);
            summaries.push_back({scenarios[i].label, spec.spec().arms, spec.true_ys(), std::move(summary)});
            log.mark("scenario " + std::to_string(i + 1));
        }
        const fs::path key = fs::path(c.out) / (d.name + "_key_results.csv");
        io::write_file(key, [&](std::ostream& out) { io::write_key_results_csv(out, summaries); });
        io::write_file(fs::path(c.out) / (d.name + "_scenario_metrics.csv"),
                       [&](std::ostream& out) { io::write_scenario_metrics_csv(out, summaries); });
        std::cout << scenarios.size() << " scenarios; key results written to " << key.string() << '\n';
    }
    return 0;
}

// Finds the design a stored batch was simulated from (with or without a threshold override).
std::optional<ValidatedSpec> spec_for_batch(const Common& c, const io::RunManifest& manifest) {
    for (const auto& d : selected_designs(c)) {
        for (const auto& sc : io::design_scenarios(d)) {
            const ValidatedSpec spec = effective_spec(sc.spec, c);
            if (io::fingerprint(spec) == manifest.fingerprint) return spec;
        }
    }
    return std::nullopt;
}

int cmd_metrics(const Common& c, const std::string& batch_path, const std::string& csv_path) {
    const auto batch = io::load_batch(batch_path);
    const auto spec = spec_for_batch(c, batch.manifest);
    if (!spec) {
        throw io::ManifestMismatch("no design or scenario in " + c.config + " matches the batch in " + batch_path +
                                   " (pass --superiority if it was simulated with a threshold override)");
    }
    const auto summary = summarize_batch(batch.results, *spec, summary_options(c));
    const fs::path out = csv_path.empty() ? fs::path(fs::path(batch_path).replace_extension("").string() + "_metrics_" +
                                                         SelectionStrategy::parse(c.select).to_string() + ".csv")
                                          : fs::path(csv_path);
    io::write_file(out, [&](std::ostream& o) { io::write_metrics_csv(o, summary); });
    print_key_metrics(batch.manifest.label.empty() ? batch_path : batch.manifest.label, summary);
    std::cout << "metrics written to " << out.string() << '\n';
    return 0;
}

int cmd_combos(const std::string& batch_path, const std::string& csv_path) {
    const auto batch = io::load_batch(batch_path);
    const auto combos = remaining_arm_combos(batch.results);
    const fs::path out = csv_path.empty() ? fs::path(fs::path(batch_path).replace_extension("").string() + "_combos.csv")
                                          : fs::path(csv_path);
    io::write_file(out, [&](std::ostream& o) { io::write_combos_csv(o, combos, batch.manifest.arms); });
    for (const auto& combo : combos) {
        std::string names;
        for (std::size_t i = 0; i < combo.arms.size(); ++i) names += (i ? ", " : "") + batch.manifest.arms[combo.arms[i]];
        std::cout << num(100.0 * combo.frequency, "%5.1f") << "%  " << (names.empty() ? "(none)" : names) << '\n';
    }
    std::cout << "combinations written to " << out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trialsim: simulate and calibrate Bayesian adaptive trial designs"};
    app.set_version_flag("--version", std::string("trialsim ") + kEngineVersion);
    app.require_subcommand(1);
    Common c;

    auto* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("--config", c.config, "design config (YAML)")->required()->check(CLI::ExistingFile);

    auto* simulate = app.add_subcommand("simulate", "simulate designs and write performance metrics");
    add_config(simulate, c);
    add_run(simulate, c);
    add_summary(simulate, c);
    add_threshold(simulate, c);

    CalibrationSettings settings;
    bool no_narrowing = false;
    auto* calibrate = app.add_subcommand("calibrate", "calibrate the superiority threshold to a target type 1 error");
    add_config(calibrate, c);
    add_run(calibrate, c);
    add_summary(calibrate, c);
    calibrate->add_option("--target", settings.target, "target probability of stopping for superiority");
    calibrate->add_option("--tol", settings.tol, "tolerance around the target");
    calibrate->add_option("--dir", settings.dir, "-1: only accept values below target, 1: above, 0: either")
        ->check(CLI::Range(-1, 1));
    calibrate->add_option("--range-lo", settings.range_lo, "lower end of the threshold search range");
    calibrate->add_option("--range-hi", settings.range_hi, "upper end of the threshold search range");
    calibrate->add_option("--iter-max", settings.iter_max, "maximum total evaluations");
    calibrate->add_option("--resolution", settings.gp.resolution, "grid points for the acquisition search");
    calibrate->add_option("--kappa", settings.gp.kappa, "exploration weight on the predictive SD");
    calibrate->add_option("--pow", settings.gp.pow, "power of the exponential covariance");
    calibrate->add_option("--lengthscale", settings.gp.lengthscale, "covariance length scale");
    calibrate->add_flag("--no-narrowing", no_narrowing, "always search the full range");

    std::vector<double> effects;
    std::vector<std::string> fixed_arms;
    auto* scenarios = app.add_subcommand("scenarios", "simulate every scenario of a design and export key results");
    add_config(scenarios, c);
    add_run(scenarios, c);
    add_summary(scenarios, c);
    add_threshold(scenarios, c);
    scenarios->add_option("--effects", effects, "grid effects added to the free arms (overrides the config grid)");
    scenarios->add_option("--fixed-arms", fixed_arms, "arms kept at their base truth in the grid");

    std::string batch_path, csv_path;
    auto* metrics = app.add_subcommand("metrics", "recompute metrics from a stored batch");
    add_config(metrics, c);
    add_summary(metrics, c);
    add_threshold(metrics, c);
    metrics->add_option("--batch", batch_path, "stored batch file")->required()->check(CLI::ExistingFile);
    metrics->add_option("--csv", csv_path, "output CSV (default: next to the batch)");
    metrics->add_option("--seed", c.seed, "bootstrap seed");

    auto* combos = app.add_subcommand("combos", "frequencies of arm sets remaining at the end of the trial");
    combos->add_option("--batch", batch_path, "stored batch file")->required()->check(CLI::ExistingFile);
    combos->add_option("--csv", csv_path, "output CSV (default: next to the batch)");

    CLI11_PARSE(app, argc, argv);
    settings.gp.narrowing = !no_narrowing;

    std::vector<std::string> args(argv, argv + argc);
    const std::string command = app.get_subcommands().front()->get_name();
    io::SessionLog log(command, args);
    log_common(log, c);
    const bool writes_log = command == "simulate" || command == "calibrate" || command == "scenarios";
    const fs::path log_path = fs::path(c.out) / ("session_" + command + ".json");
    try {
        int code = 0;
        if (command == "validate") code = cmd_validate(c);
        if (command == "simulate") code = cmd_simulate(c, log);
        if (command == "calibrate") code = cmd_calibrate(c, settings, log);
        if (command == "scenarios") code = cmd_scenarios(c, effects, fixed_arms, log);
        if (command == "metrics") code = cmd_metrics(c, batch_path, csv_path);
        if (command == "combos") code = cmd_combos(batch_path, csv_path);
        if (writes_log) log.write(log_path, code == 0);
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (writes_log) log.write(log_path, false, e.what());
        return 2;
    }
}
