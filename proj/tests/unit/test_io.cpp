#include "trialsim/io/batch_store.hpp"
#include "trialsim/io/calibration_store.hpp"
#include "trialsim/io/config.hpp"
#include "trialsim/io/export.hpp"
#include "trialsim/io/scenarios.hpp"
#include "trialsim/io/serialize.hpp"

#include "doctest.h"
#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace trialsim;
using namespace trialsim::io;
using trialsim::testing::primary_spec;
using trialsim::testing::probs;
using trialsim::testing::small_spec;

namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = TRIALSIM_CONFIG_DIR;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("trialsim_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string config_error(const std::string& text) {
    try {
        parse_config_string(text, "test.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* kSmall = R"(name: small
arms: [A, B]
outcome:
  model: binomial
  true_ys: [0.3, 0.2]
data_looks: {seq: [100, 600, 100]}
n_draws: 500
)";

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("primary config equals the programmatic design") {
        const auto designs = parse_config(kConfigDir / "primary.yaml");
        REQUIRE(designs.size() == 1);
        CHECK(designs[0].name == "primary");
        CHECK(designs[0].spec == validate_spec(primary_spec()));
        CHECK(fingerprint(designs[0].spec) == fingerprint(validate_spec(primary_spec())));
    }

    TEST_CASE("example configs parse") {
        for (const char* name : {"common_control.yaml", "hurdle.yaml", "pooled_prior.yaml"}) {
            CAPTURE(name);
            const auto designs = parse_config(kConfigDir / name);
            CHECK(!designs.empty());
            CHECK(!design_scenarios(designs[0]).empty());
        }
        const auto cc = parse_config(kConfigDir / "common_control.yaml")[0];
        CHECK(*cc.spec.spec().fixed_probs[0] == doctest::Approx(sqrt_control_prob(3)));
        const auto scenarios = design_scenarios(cc);
        REQUIRE(scenarios.size() == 2);
        CHECK(scenarios[1].label == "one better");
        CHECK(scenarios[0].label == "Standard 25.0 - Intervention A 25.0 - Intervention B 25.0 - Intervention C 25.0");
    }

    TEST_CASE("unknown keys are reported with their line") {
        const auto msg = config_error(std::string(kSmall) + "stopping_rule: early\n");
        CHECK(msg.find("test.yaml:8") != std::string::npos);
        CHECK(msg.find("stopping_rule") != std::string::npos);

        const auto nested = config_error(R"(arms: [A, B]
outcome:
  model: binomial
  true_ys: [0.3, 0.2]
  dispersion: 2
data_looks: [100]
)");
        CHECK(nested.find("test.yaml:5") != std::string::npos);
    }

    TEST_CASE("schema and validation errors") {
        CHECK(config_error(R"(arms: [A]
outcome: {model: binomial, true_ys: [0.3]}
data_looks: [100]
)").find("at least two arms") != std::string::npos);
        CHECK(config_error(R"(arms: [A, B]
outcome: {model: binomial, true_ys: [0.3, 0.2]}
data_looks: [100, abc]
)").find("test.yaml:3") != std::string::npos);
        CHECK(config_error(R"(arms: [A, B]
outcome: {model: poisson, true_ys: [0.3, 0.2]}
data_looks: [100]
)").find("unknown outcome model") != std::string::npos);
        CHECK(config_error(R"(arms: [A, B]
outcome: {model: binomial, true_means: [0.3, 0.2]}
data_looks: [100]
)").find("true_means") != std::string::npos);
        CHECK(!config_error("arms: [A, B\n").empty());
        CHECK(!config_error("").empty());
        CHECK_THROWS_AS(parse_config(kConfigDir / "does_not_exist.yaml"), ConfigError);
    }

    TEST_CASE("schedules") {
        const auto d = parse_config_string(R"(arms: [A, B]
outcome: {model: binomial, true_ys: [0.3, 0.2]}
data_looks: [{seq: [100, 300, 100]}, 400]
randomised_at_looks: {seq: [100, 400, 100], add: 50, cap: 400}
superiority: [{repeat: [1.0, 2]}, 0.99, 0.98]
)")[0];
        CHECK(d.spec.spec().data_looks == std::vector<int>{100, 200, 300, 400});
        CHECK(d.spec.spec().randomised_at_looks == std::vector<int>{150, 250, 350, 400});
        CHECK(d.spec.spec().superiority == std::vector<double>{1.0, 1.0, 0.99, 0.98});
        CHECK(!config_error(R"(arms: [A, B]
outcome: {model: binomial, true_ys: [0.3, 0.2]}
data_looks: [100, 200]
randomised_at_looks: {seq: [100, 200, 100], add: 50, cap: 500}
)").empty());
    }

    TEST_CASE("multiple designs and scenario overrides") {
        const std::string text = std::string(kSmall) + R"(scenarios:
  - true_ys: [0.25, 0.20]
  - label: big
    true_ys: [0.4, 0.2]
---
name: other
arms: [A, B]
outcome: {model: binomial, true_ys: [0.3, 0.3]}
data_looks: [100]
)";
        const auto designs = parse_config_string(text);
        REQUIRE(designs.size() == 2);
        const auto scenarios = design_scenarios(designs[0]);
        REQUIRE(scenarios.size() == 2);
        CHECK(scenarios[0].label == "A 25.0 - B 20.0");
        CHECK(scenarios[1].label == "big");
        CHECK(scenarios[0].spec.true_ys() == std::vector<double>{0.25, 0.20});
        CHECK(design_scenarios(designs[1]).size() == 1);

        CHECK(config_error(text + "---\nname: other\narms: [A, B]\noutcome: {model: binomial, true_ys: [0.3, 0.3]}\n"
                                  "data_looks: [100]\n")
                  .find("duplicate design") != std::string::npos);
    }
}

TEST_SUITE("fingerprints") {
    TEST_CASE("truth changes the fingerprint but not the design fingerprint") {
        const auto base = validate_spec(primary_spec());
        const auto other = with_truth(base, probs({0.25, 0.20, 0.25}));
        CHECK(fingerprint(base) != fingerprint(other));
        CHECK(design_fingerprint(base) == design_fingerprint(other));
        CHECK(fingerprint(base) == fingerprint(validate_spec(primary_spec())));
        CHECK(fingerprint(base) != fingerprint(with_symmetric_thresholds(base, 0.9904)));
        CHECK(fingerprint(base).size() == 64);
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    TEST_CASE("result records round-trip") {
        const auto spec = validate_spec(small_spec(0.3, 0.25));
        std::vector<TrialResult> results(20);
        run_trials(spec, 3, 0, results, 1);
        std::stringstream buf;
        for (const auto& r : results) write_result(buf, r);
        for (const auto& r : results) {
            const auto back = read_result(buf);
            CHECK(back == r);
            CHECK(back.symmetric_lo == r.symmetric_lo);
            CHECK(back.symmetric_hi == r.symmetric_hi);
        }
    }
}

TEST_SUITE("batch store") {
    TEST_CASE("save, load, extend, prefix") {
        TempDir dir;
        const auto spec = validate_spec(small_spec(0.3, 0.25));
        const auto path = dir.path / "small.batch";

        BatchStats stats;
        const auto first = run_batch(spec, 30, 5, 2, path, "small", &stats);
        CHECK(stats.simulated == 30);
        CHECK(stats.loaded == 0);
        const auto loaded = load_batch(path);
        CHECK(loaded.results == first);
        CHECK(loaded.manifest.fingerprint == fingerprint(spec));
        CHECK(loaded.manifest.n_rep == 30);
        CHECK(loaded.manifest.label == "small");

        stats = {};
        const auto again = run_batch(spec, 30, 5, 1, path, "small", &stats);
        CHECK(again == first);
        CHECK(stats.loaded == 30);
        CHECK(stats.simulated == 0);

        stats = {};
        const auto longer = run_batch(spec, 45, 5, 3, path, "small", &stats);
        CHECK(stats.loaded == 30);
        CHECK(stats.simulated == 15);
        std::vector<TrialResult> fresh(45);
        run_trials(spec, 5, 0, fresh, 1);
        CHECK(longer == fresh);
        CHECK(load_batch(path).manifest.n_rep == 45);

        const auto prefix = run_batch(spec, 10, 5, 1, path);
        CHECK(prefix == std::vector<TrialResult>(fresh.begin(), fresh.begin() + 10));
    }

    TEST_CASE("mismatches are errors") {
        TempDir dir;
        const auto spec = validate_spec(small_spec(0.3, 0.25));
        const auto path = dir.path / "b.batch";
        run_batch(spec, 5, 5, 1, path);
        CHECK_THROWS_AS(run_batch(spec, 5, 6, 1, path), ManifestMismatch);
        CHECK_THROWS_AS(run_batch(validate_spec(small_spec(0.3, 0.2)), 5, 5, 1, path), ManifestMismatch);

        std::ofstream(dir.path / "junk.batch") << "not a batch";
        CHECK_THROWS(load_batch(dir.path / "junk.batch"));
        CHECK_THROWS(load_batch(dir.path / "missing.batch"));
    }

    TEST_CASE("identical runs write identical files") {
        TempDir dir;
        const auto spec = validate_spec(small_spec(0.3, 0.25));
        run_batch(spec, 25, 9, 1, dir.path / "a.batch");
        run_batch(spec, 25, 9, 3, dir.path / "b.batch");
        auto bytes = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), {});
        };
        CHECK(bytes(dir.path / "a.batch") == bytes(dir.path / "b.batch"));
    }
}

TEST_SUITE("scenarios") {
    TEST_CASE("grid expansion without a control removes permutations") {
        const auto base = validate_spec(primary_spec());
        const auto grid = scenario_grid(base, {0, 0.025, -0.025, 0.05, -0.05}, {"Arm A"});
        CHECK(grid.size() == 15);
        CHECK(grid[0].label == "A 25.0 - B 25.0 - C 25.0");
        CHECK(grid[1].label == "A 25.0 - B 27.5 - C 25.0");
        std::set<std::string> labels;
        for (const auto& s : grid) {
            labels.insert(s.label);
            CHECK(s.spec.true_ys()[0] == 0.25);
        }
        CHECK(labels.size() == 15);
        CHECK(labels.contains("A 25.0 - B 22.5 - C 27.5"));
        CHECK(!labels.contains("A 25.0 - B 27.5 - C 22.5"));
        CHECK_THROWS(scenario_grid(base, {0.1}, {"Arm Z"}));
        CHECK_THROWS(scenario_grid(base, {}, {}));
    }

    TEST_CASE("grid with a control keeps every combination") {
        auto s = primary_spec();
        s.control = "Arm A";
        const auto grid = scenario_grid(validate_spec(s), {0, 0.025, -0.025, 0.05, -0.05}, {"Arm A"});
        CHECK(grid.size() == 25);
    }

    TEST_CASE("primary config grid") {
        const auto design = parse_config(kConfigDir / "primary.yaml")[0];
        CHECK(design_scenarios(design).size() == 15);
    }
}

TEST_SUITE("export") {
    TEST_CASE("number formatting") {
        CHECK(format_number(0.1) == "0.1");
        CHECK(format_number(7881.0) == "7881");
        CHECK(format_number(std::nullopt) == "NA");
        CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "NA");
        CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
        CHECK(csv_field("a,b") == "\"a,b\"");
        CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
        CHECK(csv_field("plain") == "plain");
    }

    TEST_CASE("metrics csv") {
        const auto spec = validate_spec(small_spec(0.3, 0.25));
        std::vector<TrialResult> results(10);
        run_trials(spec, 1, 0, results, 1);
        const auto summary = summarize_batch(results, spec);
        std::ostringstream out;
        write_metrics_csv(out, summary);
        std::istringstream in(out.str());
        std::string line;
        std::getline(in, line);
        CHECK(line == "metric,est,err_sd,err_mad,lo,hi");
        std::getline(in, line);
        CHECK(line == "n_summarised,10,,,,");
        int rows = 1;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == static_cast<int>(summary.names.size()));
        CHECK(out.str().find("rmse_te,NA,,,,") != std::string::npos);
    }

    TEST_CASE("combos csv") {
        std::ostringstream out;
        write_combos_csv(out, {{{0, 2}, 3, 0.75}, {{1}, 1, 0.25}}, {"A", "B", "C"});
        CHECK(out.str().find("A|C") != std::string::npos);
        CHECK(out.str().find("0.75") != std::string::npos);
    }
}

TEST_SUITE("calibration store") {
    TEST_CASE("round trip and identity checks") {
        TempDir dir;
        const auto spec = validate_spec(small_spec(0.3, 0.3));
        CalibrationSettings s;
        s.target = 0.1;
        s.tol = 0.05;
        s.dir = 0;
        s.range_lo = 0.6;
        s.iter_max = 4;
        const auto path = dir.path / "cal.json";
        CHECK(load_calibration_evaluations(path, spec, s, 50, 1).empty());
        const auto result = calibrate_trial(spec, s, 50, 1, 1);
        save_calibration(path, spec, result);
        CHECK(load_calibration_evaluations(path, spec, s, 50, 1) == result.outcome.evaluations);
        CHECK_THROWS_AS(load_calibration_evaluations(path, spec, s, 60, 1), ManifestMismatch);
        CHECK_THROWS_AS(load_calibration_evaluations(path, spec, s, 50, 2), ManifestMismatch);
        auto other = s;
        other.target = 0.2;
        // Evaluations depend on the design, n_rep and seed only, so a new target reuses them.
        CHECK(load_calibration_evaluations(path, spec, other, 50, 1) == result.outcome.evaluations);
        const auto report = calibration_report(result, 1.5);
        CHECK(report.find("Best x") != std::string::npos);
    }
}
