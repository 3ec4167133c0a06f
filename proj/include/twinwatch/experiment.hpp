#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinwatch/sim.hpp"

namespace twinwatch {

struct ExperimentPlan {
    std::vector<std::string> presets;
    std::vector<Period> periods;
    std::vector<int> scenarios;
    int target_suspects_per_cell = 1000;
    /// When set, each cell runs exactly this many replications and evaluates
    /// every suspect they produce, instead of stopping at the target count.
    std::optional<int> fixed_replications;
    ObservationMode mode = ObservationMode::Geometric;
    std::uint64_t base_seed = 0;
    DetectionWeights weights;
    DetectionThreshold threshold;
    std::optional<double> bernoulli_p;
    double replication_duration_s = 3600.0;
    int max_replications_per_cell = 100'000;
    unsigned threads = 0;  // 0 = hardware concurrency

    /// Camera sets for preset names that are not built-in (e.g. request bodies).
    std::vector<CameraPreset> custom_presets;
    /// Remaining simulation settings (traffic, delays, sampler, bounds, ...).
    SimConfig sim;

    void validate() const;
};

/// Plan over all built-in presets, periods and scenarios.
ExperimentPlan full_matrix_plan();

struct WilsonInterval {
    double lower = 0.0;
    double upper = 0.0;
    double half_width = 0.0;
};

/// 95% Wilson score interval for `successes` out of `trials`.
WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054);

struct CellResult {
    std::string preset;
    Period period = Period::Morning;
    int scenario = 1;
    int evaluated = 0;
    int detected = 0;
    double accuracy = 0.0;
    double ci_half_width = 0.0;
    int replications = 0;
};

/// Column labels of the accuracy table.
const std::vector<std::string>& report_columns();
std::string scenario_column(int scenario);

struct MarginalResult {
    std::string preset;
    std::string column;
    int evaluated = 0;
    int detected = 0;
    double accuracy = 0.0;
    double ci_half_width = 0.0;
};

struct Provenance {
    std::uint64_t base_seed = 0;
    ObservationMode mode = ObservationMode::Geometric;
    DetectionWeights weights;
    double threshold = 0.45;
    std::optional<double> bernoulli_p;
    int target_suspects_per_cell = 0;
    double replication_duration_s = 0.0;
    std::string layout_name;
    std::string layout_hash;
    std::string tool_version;
};

struct ExperimentReport {
    std::vector<CellResult> cells;
    std::vector<MarginalResult> marginals;
    Provenance provenance;

    const MarginalResult* marginal(std::string_view preset, std::string_view column) const;
    /// Recomputes `marginals` from `cells` (suspect-count-weighted).
    void rebuild_marginals();
    std::vector<std::string> preset_order() const;
};

ExperimentReport run_experiment(const StationLayout& layout, const ExperimentPlan& plan);

/// Reference accuracies: preset -> column -> value.
struct ReferenceTable {
    std::string description;
    std::vector<std::string> presets;  // row order
    std::map<std::string, std::map<std::string, double>> values;

    std::optional<double> value(std::string_view preset, std::string_view column) const;
};

ReferenceTable reference_from_json(const nlohmann::json& j);
ReferenceTable load_reference(const std::filesystem::path& path);

struct ReferenceDelta {
    std::string preset;
    std::string column;
    double ours = 0.0;
    double reference = 0.0;
    double delta = 0.0;  // ours - reference
    bool flagged = false;
};

/// Per-entry differences for every preset present in the report. Throws
/// ValidationError("axes") when the two tables do not cover the same entries.
std::vector<ReferenceDelta> compare_to_reference(const ExperimentReport& report,
                                                 const ReferenceTable& reference,
                                                 double tolerance = 0.03);

enum class ReportFormat { Csv, Json, Markdown };
ReportFormat report_format_from_string(std::string_view name);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

std::string render_report(const ExperimentReport& report, ReportFormat format);
/// Markdown table with the same rows and columns as a report.
std::string render_reference_markdown(const ReferenceTable& reference);

void export_report(const ExperimentReport& report, ReportFormat format,
                   const std::filesystem::path& path);

}  // namespace twinwatch
