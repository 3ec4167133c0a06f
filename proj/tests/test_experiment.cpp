#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "test_support.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/experiment.hpp"

using namespace twinwatch;
using twinwatch::testing::data_path;
using twinwatch::testing::default_layout;

namespace {

ExperimentPlan small_plan(std::vector<std::string> presets, ObservationMode mode, int target) {
    ExperimentPlan plan = full_matrix_plan();
    plan.presets = std::move(presets);
    plan.mode = mode;
    plan.target_suspects_per_cell = target;
    plan.threads = 1;
    return plan;
}

}  // namespace

TEST_CASE("Wilson interval against the textbook formula") {
    const double z = 1.959963984540054;
    for (const auto [k, n] : {std::pair{50, 100}, std::pair{740, 1000}, std::pair{0, 20}, std::pair{20, 20}}) {
        const double p = static_cast<double>(k) / n;
        const double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
        const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n)) / (1 + z * z / n);
        const auto w = wilson_interval(k, n);
        CHECK(w.half_width == doctest::Approx(half).epsilon(1e-12));
        CHECK(w.lower == doctest::Approx(std::max(0.0, centre - half)).epsilon(1e-12));
        CHECK(w.upper == doctest::Approx(std::min(1.0, centre + half)).epsilon(1e-12));
        CHECK(w.lower <= p);
        CHECK(w.upper >= p);
    }
    CHECK(wilson_interval(50, 100).half_width == doctest::Approx(0.0958).epsilon(1e-3));
}

TEST_CASE("Wilson interval covers the true rate about 95% of the time") {
    std::mt19937_64 rng(99);
    std::binomial_distribution<int> draw(1000, 0.74);
    int covered = 0;
    for (int i = 0; i < 100; ++i) {
        const auto w = wilson_interval(draw(rng), 1000);
        covered += (w.lower <= 0.74 && 0.74 <= w.upper);
    }
    CHECK(covered >= 90);
}

TEST_CASE("table columns") {
    CHECK(report_columns() == std::vector<std::string>{"Overall", "Morning", "Midday", "Afternoon", "Scenario 1",
                                                       "Scenario 2", "Scenario 3"});
}

TEST_CASE("plan validation") {
    ExperimentPlan plan = full_matrix_plan();
    CHECK_NOTHROW(plan.validate());
    plan.fixed_replications = 0;
    try {
        plan.validate();
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "replications");
    }
    plan = full_matrix_plan();
    plan.bernoulli_p = 0.2;
    CHECK_THROWS_AS(plan.validate(), ValidationError);
    plan = full_matrix_plan();
    plan.scenarios = {};
    CHECK_THROWS_AS(plan.validate(), ValidationError);
    plan = full_matrix_plan();
    plan.presets = {"Model8"};
    CHECK_THROWS_AS(run_experiment(default_layout(), plan), ValidationError);
}

TEST_CASE("each cell evaluates exactly the target number of suspects") {
    auto plan = small_plan({"Base", "Model7"}, ObservationMode::Stochastic, 60);
    plan.bernoulli_p = 0.2;
    const auto report = run_experiment(default_layout(), plan);
    CHECK(report.cells.size() == 2 * 9);
    for (const auto& c : report.cells) {
        CHECK(c.evaluated == 60);
        CHECK(c.accuracy == doctest::Approx(static_cast<double>(c.detected) / c.evaluated));
        CHECK(c.replications >= 1);
    }
    // Marginals are suspect-weighted sums of the cells.
    for (const auto& preset : {"Base", "Model7"}) {
        int det = 0;
        for (const auto& c : report.cells) {
            if (c.preset == preset) det += c.detected;
        }
        const auto* overall = report.marginal(preset, "Overall");
        REQUIRE(overall);
        CHECK(overall->evaluated == 9 * 60);
        CHECK(overall->detected == det);
        CHECK(report.marginal(preset, "Morning")->evaluated == 3 * 60);
        CHECK(report.marginal(preset, "Scenario 2")->evaluated == 3 * 60);
    }
}

TEST_CASE("presets are scored on the same suspects, so nesting gives ordered counts") {
    const auto plan = small_plan({"Base", "Model7", "Model9", "Model11"}, ObservationMode::Geometric, 40);
    const auto report = run_experiment(default_layout(), plan);
    for (std::size_t g = 0; g < 9; ++g) {
        for (std::size_t p = 1; p < 4; ++p) {
            const auto& lo = report.cells[(p - 1) * 9 + g];
            const auto& hi = report.cells[p * 9 + g];
            CHECK(lo.period == hi.period);
            CHECK(lo.scenario == hi.scenario);
            CHECK(lo.detected <= hi.detected);
        }
    }
}

TEST_CASE("experiments are deterministic and threads do not change results") {
    auto plan = small_plan({"Base"}, ObservationMode::Geometric, 20);
    const auto a = report_to_json(run_experiment(default_layout(), plan)).dump();
    plan.threads = 3;
    const auto b = report_to_json(run_experiment(default_layout(), plan)).dump();
    CHECK(a == b);
    plan.base_seed = 5;
    CHECK(report_to_json(run_experiment(default_layout(), plan)).dump() != a);
}

TEST_CASE("fixed replications evaluate every suspect produced") {
    auto plan = small_plan({"Base"}, ObservationMode::Stochastic, 1000);
    plan.fixed_replications = 2;
    plan.periods = {Period::Morning};
    plan.scenarios = {1};
    const auto report = run_experiment(default_layout(), plan);
    REQUIRE(report.cells.size() == 1);
    CHECK(report.cells[0].replications == 2);
    CHECK(report.cells[0].evaluated > 0);
    CHECK(report.cells[0].evaluated < 100);
}

TEST_CASE("custom camera presets") {
    auto plan = small_plan({"mine"}, ObservationMode::Geometric, 20);
    plan.custom_presets.push_back({"mine", builtin_preset("Base", default_layout()).cameras});
    const auto custom = run_experiment(default_layout(), plan);
    auto base_plan = small_plan({"Base"}, ObservationMode::Geometric, 20);
    const auto base = run_experiment(default_layout(), base_plan);
    CHECK(custom.marginal("mine", "Overall")->detected == base.marginal("Base", "Overall")->detected);
}

TEST_CASE("report JSON round trip") {
    auto plan = small_plan({"Base", "Model9"}, ObservationMode::Stochastic, 30);
    plan.base_seed = 17;
    const auto report = run_experiment(default_layout(), plan);
    const auto j = report_to_json(report);
    const auto back = report_from_json(j);
    CHECK(report_to_json(back).dump() == j.dump());
    CHECK(back.provenance.layout_hash.size() == 16);
    CHECK(back.provenance.tool_version == report.provenance.tool_version);
    CHECK_THROWS_AS(report_from_json(nlohmann::json{{"cells", 3}}), ParseError);
}

TEST_CASE("rendering") {
    auto plan = small_plan({"Base", "Model7", "Model9", "Model11"}, ObservationMode::Stochastic, 20);
    plan.bernoulli_p = 0.2;
    const auto report = run_experiment(default_layout(), plan);

    const auto md = render_report(report, ReportFormat::Markdown);
    CHECK(md.find("| Model | Overall | Morning | Midday | Afternoon | Scenario 1 | Scenario 2 | Scenario 3 |") == 0);
    for (const char* label : {"| Base Model |", "| Model 7 |", "| Model 9 |", "| Model 11 |"}) {
        CHECK(md.find(label) != std::string::npos);
    }
    CHECK(md.find("bernoulli_p: 0.2") != std::string::npos);
    CHECK(md.find("layout: default_station (") != std::string::npos);

    const auto csv = render_report(report, ReportFormat::Csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 9);
    CHECK(csv.rfind("preset,period,scenario,evaluated,detected,accuracy,ci_half_width\n", 0) == 0);

    CHECK(nlohmann::json::parse(render_report(report, ReportFormat::Json)) == report_to_json(report));
    CHECK(report_format_from_string("md") == ReportFormat::Markdown);
    CHECK_THROWS_AS(report_format_from_string("xml"), ValidationError);

    const auto dir = std::filesystem::temp_directory_path();
    export_report(report, ReportFormat::Csv, dir / "twinwatch_report.csv");
    CHECK(twinwatch::testing::read_text((dir / "twinwatch_report.csv").string()) == csv);
    std::filesystem::remove(dir / "twinwatch_report.csv");
    CHECK_THROWS_AS(export_report(report, ReportFormat::Csv, "/nonexistent/dir/r.csv"), IoError);
}

TEST_CASE("shipped reference table holds the published accuracies") {
    const auto ref = load_reference(data_path("reference/published_accuracy.json"));
    CHECK(ref.presets == builtin_preset_names());
    const std::map<std::string, std::vector<double>> expected{
        {"Base", {0.74, 0.72, 0.75, 0.73, 0.71, 0.75, 0.73}},
        {"Model7", {0.79, 0.77, 0.81, 0.79, 0.84, 0.77, 0.77}},
        {"Model9", {0.89, 0.90, 0.88, 0.88, 0.94, 0.87, 0.81}},
        {"Model11", {0.91, 0.91, 0.91, 0.90, 0.94, 0.90, 0.90}}};
    for (const auto& [preset, row] : expected) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            CHECK(ref.value(preset, report_columns()[i]) == row[i]);
        }
    }
    const auto md = render_reference_markdown(ref);
    CHECK(md.find("| Base Model | 0.74 | 0.72 | 0.75 | 0.73 | 0.71 | 0.75 | 0.73 |") != std::string::npos);
    CHECK_THROWS_AS(load_reference("/nonexistent/ref.json"), IoError);
}

TEST_CASE("comparison with a reference table") {
    const auto ref = load_reference(data_path("reference/published_accuracy.json"));
    ExperimentReport report;
    report.cells.push_back({"Base", Period::Morning, 1, 100, 74, 0.74, 0.0, 1});
    report.cells.push_back({"Base", Period::Midday, 2, 100, 70, 0.70, 0.0, 1});
    report.cells.push_back({"Base", Period::Afternoon, 3, 100, 80, 0.80, 0.0, 1});
    report.rebuild_marginals();
    const auto deltas = compare_to_reference(report, ref);
    REQUIRE(deltas.size() == 7);
    CHECK(deltas[0].column == "Overall");
    CHECK(deltas[0].ours == doctest::Approx(224.0 / 300.0));
    CHECK(deltas[0].delta == doctest::Approx(224.0 / 300.0 - 0.74));
    CHECK_FALSE(deltas[0].flagged);
    // Morning 0.74 vs 0.72, Midday 0.70 vs 0.75, Afternoon 0.80 vs 0.73.
    CHECK_FALSE(deltas[1].flagged);
    CHECK(deltas[2].flagged);
    CHECK(deltas[3].flagged);

    ExperimentReport partial;
    partial.cells.push_back({"Base", Period::Morning, 1, 10, 7, 0.7, 0.0, 1});
    partial.rebuild_marginals();
    try {
        compare_to_reference(partial, ref);
        FAIL("expected an axis mismatch");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "axes");
    }
    ExperimentReport stranger;
    stranger.cells.push_back({"Other", Period::Morning, 1, 10, 7, 0.7, 0.0, 1});
    stranger.rebuild_marginals();
    CHECK_THROWS_AS(compare_to_reference(stranger, ref), ValidationError);
}
