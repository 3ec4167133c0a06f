#include "twinwatch/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "parallel.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/hash.hpp"
#include "twinwatch/version.hpp"

namespace twinwatch {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

/// Per-camera maxima of one suspect, indexed like the union camera list; -1 if unseen.
using SuspectMaxima = std::vector<double>;

struct GroupResult {
    std::vector<SuspectMaxima> suspects;
    int replications = 0;
};

std::vector<CameraPreset> resolve_presets(const StationLayout& layout, const ExperimentPlan& plan) {
    std::vector<CameraPreset> out;
    for (const auto& name : plan.presets) {
        const auto custom = std::find_if(plan.custom_presets.begin(), plan.custom_presets.end(),
                                         [&](const CameraPreset& p) { return p.name == name; });
        out.push_back(custom != plan.custom_presets.end() ? *custom : builtin_preset(name, layout));
    }
    return out;
}

}  // namespace

void ExperimentPlan::validate() const {
    if (presets.empty()) throw ValidationError("presets", "plan needs at least one preset");
    if (periods.empty()) throw ValidationError("periods", "plan needs at least one period");
    if (scenarios.empty()) throw ValidationError("scenarios", "plan needs at least one scenario");
    for (const int s : scenarios) {
        if (s < 1 || s > 3) throw ValidationError("scenarios", "scenario must be 1, 2 or 3");
    }
    if (target_suspects_per_cell < 1) {
        throw ValidationError("target_suspects_per_cell", "target must be at least 1");
    }
    if (fixed_replications && *fixed_replications < 1) {
        throw ValidationError("replications", "replications must be at least 1");
    }
    if (!(replication_duration_s > 0.0)) {
        throw ValidationError("duration_s", "replication duration must be positive");
    }
    if (max_replications_per_cell < 1) {
        throw ValidationError("max_replications_per_cell", "must be at least 1");
    }
    if (bernoulli_p && mode != ObservationMode::Stochastic) {
        throw ValidationError("bernoulli_p", "the Bernoulli hook requires stochastic mode");
    }
    weights.validate();
    threshold.validate();
    for (const auto& p : custom_presets) {
        if (p.cameras.empty()) throw ValidationError("cameras", "preset '" + p.name + "' has no cameras");
        for (const auto& c : p.cameras) validate_camera(c);
    }
}

ExperimentPlan full_matrix_plan() {
    ExperimentPlan plan;
    plan.presets = builtin_preset_names();
    plan.periods = {Period::Morning, Period::Midday, Period::Afternoon};
    plan.scenarios = {1, 2, 3};
    return plan;
}

WilsonInterval wilson_interval(int successes, int trials, double z) {
    if (trials <= 0) return {0.0, 1.0, 0.5};
    const double n = trials;
    const double p = successes / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {std::max(0.0, center - half), std::min(1.0, center + half), half};
}

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> columns{"Overall",    "Morning",    "Midday",    "Afternoon",
                                                  "Scenario 1", "Scenario 2", "Scenario 3"};
    return columns;
}

std::string scenario_column(int scenario) { return "Scenario " + std::to_string(scenario); }

const MarginalResult* ExperimentReport::marginal(std::string_view preset, std::string_view column) const {
    for (const auto& m : marginals) {
        if (m.preset == preset && m.column == column) return &m;
    }
    return nullptr;
}

std::vector<std::string> ExperimentReport::preset_order() const {
    std::vector<std::string> order;
    for (const auto& c : cells) {
        if (std::find(order.begin(), order.end(), c.preset) == order.end()) order.push_back(c.preset);
    }
    for (const auto& m : marginals) {
        if (std::find(order.begin(), order.end(), m.preset) == order.end()) order.push_back(m.preset);
    }
    return order;
}

void ExperimentReport::rebuild_marginals() {
    marginals.clear();
    for (const auto& preset : preset_order()) {
        std::map<std::string, std::pair<int, int>> sums;  // column -> (evaluated, detected)
        for (const auto& c : cells) {
            if (c.preset != preset) continue;
            for (const auto& col : {std::string("Overall"), std::string(to_string(c.period)),
                                    scenario_column(c.scenario)}) {
                sums[col].first += c.evaluated;
                sums[col].second += c.detected;
            }
        }
        for (const auto& col : report_columns()) {
            const auto it = sums.find(col);
            if (it == sums.end()) continue;
            const auto [evaluated, detected] = it->second;
            MarginalResult m;
            m.preset = preset;
            m.column = col;
            m.evaluated = evaluated;
            m.detected = detected;
            m.accuracy = evaluated > 0 ? static_cast<double>(detected) / evaluated : 0.0;
            m.ci_half_width = wilson_interval(detected, evaluated).half_width;
            marginals.push_back(std::move(m));
        }
    }
}

ExperimentReport run_experiment(const StationLayout& layout, const ExperimentPlan& plan) {
    plan.validate();
    const auto presets = resolve_presets(layout, plan);

    // Every preset is scored from the same simulated suspects: run once with the
    // union of all cameras, then restrict the per-camera maxima to each preset.
    std::vector<Camera> cameras;
    for (const auto& preset : presets) {
        for (const auto& cam : preset.cameras) {
            const auto it = std::find_if(cameras.begin(), cameras.end(),
                                         [&](const Camera& c) { return c.id == cam.id; });
            if (it == cameras.end()) {
                cameras.push_back(cam);
            } else if (!(*it == cam)) {
                throw ValidationError(cam.id, "camera '" + cam.id + "' appears with two different poses");
            }
        }
    }
    std::vector<std::vector<std::size_t>> preset_columns;
    for (const auto& preset : presets) {
        std::vector<std::size_t> cols;
        for (const auto& cam : preset.cameras) {
            for (std::size_t i = 0; i < cameras.size(); ++i) {
                if (cameras[i].id == cam.id) cols.push_back(i);
            }
        }
        preset_columns.push_back(std::move(cols));
    }

    SimConfig base = plan.sim;
    base.mode = plan.mode;
    base.weights = plan.weights;
    base.threshold = plan.threshold;
    base.bernoulli_p = plan.bernoulli_p;
    base.preset = CameraPreset{"union", cameras};
    base.drain = true;
    base.observe_regular_agents = false;
    base.record_regular_samples = false;
    base.validate();

    struct Group {
        Period period;
        int scenario;
    };
    std::vector<Group> groups;
    for (const auto period : plan.periods) {
        for (const int scenario : plan.scenarios) groups.push_back({period, scenario});
    }
    std::vector<GroupResult> results(groups.size());

    detail::parallel_for(groups.size(), plan.threads, [&](std::size_t g) {
        const Group& group = groups[g];
        GroupResult& result = results[g];
        SimConfig cfg = base;
        cfg.period = group.period;
        cfg.suspect_scenarios = {group.scenario};
        const auto target = static_cast<std::size_t>(plan.target_suspects_per_cell);
        for (int r = 0; r < plan.max_replications_per_cell; ++r) {
            if (plan.fixed_replications ? r >= *plan.fixed_replications : result.suspects.size() >= target) {
                break;
            }
            cfg.seed = mix_seed({plan.base_seed, static_cast<std::uint64_t>(group.period),
                                 static_cast<std::uint64_t>(group.scenario), static_cast<std::uint64_t>(r)});
            const SimOutput out = run_simulation(layout, cfg, plan.replication_duration_s);
            ++result.replications;
            for (const auto& t : out.trajectories) {
                if (t.kind != AgentKind::Suspect || !t.completed()) continue;
                SuspectMaxima maxima(cameras.size(), -1.0);
                for (const auto& m : t.per_camera_max) {
                    for (std::size_t i = 0; i < cameras.size(); ++i) {
                        if (cameras[i].id == m.camera_id) maxima[i] = m.max_p;
                    }
                }
                result.suspects.push_back(std::move(maxima));
            }
        }
        if (!plan.fixed_replications && result.suspects.size() > target) result.suspects.resize(target);
    });

    ExperimentReport report;
    for (std::size_t p = 0; p < presets.size(); ++p) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            CellResult cell;
            cell.preset = presets[p].name;
            cell.period = groups[g].period;
            cell.scenario = groups[g].scenario;
            cell.replications = results[g].replications;
            for (const auto& maxima : results[g].suspects) {
                std::vector<double> seen;
                for (const std::size_t col : preset_columns[p]) {
                    if (maxima[col] >= 0.0) seen.push_back(maxima[col]);
                }
                ++cell.evaluated;
                if (trajectory_detected(seen, plan.threshold)) ++cell.detected;
            }
            cell.accuracy = cell.evaluated > 0 ? static_cast<double>(cell.detected) / cell.evaluated : 0.0;
            cell.ci_half_width = wilson_interval(cell.detected, cell.evaluated).half_width;
            report.cells.push_back(std::move(cell));
        }
    }
    report.rebuild_marginals();

    Provenance& prov = report.provenance;
    prov.base_seed = plan.base_seed;
    prov.mode = plan.mode;
    prov.weights = plan.weights;
    prov.threshold = plan.threshold.t;
    prov.bernoulli_p = plan.bernoulli_p;
    prov.target_suspects_per_cell = plan.fixed_replications ? 0 : plan.target_suspects_per_cell;
    prov.replication_duration_s = plan.replication_duration_s;
    prov.layout_name = layout.name;
    prov.layout_hash = hex64(layout_hash(layout));
    prov.tool_version = kToolVersion;
    return report;
}

std::optional<double> ReferenceTable::value(std::string_view preset, std::string_view column) const {
    const auto row = values.find(std::string(preset));
    if (row == values.end()) return std::nullopt;
    const auto cell = row->second.find(std::string(column));
    if (cell == row->second.end()) return std::nullopt;
    return cell->second;
}

ReferenceTable reference_from_json(const json& j) {
    ReferenceTable ref;
    try {
        ref.description = j.value("description", "");
        for (const auto& row : j.at("rows")) {
            const auto preset = row.at("preset").get<std::string>();
            ref.presets.push_back(preset);
            for (const auto& col : report_columns()) {
                if (row.contains(col)) ref.values[preset][col] = row.at(col).get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed reference table: ") + e.what());
    }
    return ref;
}

ReferenceTable load_reference(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open reference file '" + path.string() + "'");
    try {
        return reference_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("reference file '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::vector<ReferenceDelta> compare_to_reference(const ExperimentReport& report,
                                                 const ReferenceTable& reference, double tolerance) {
    std::vector<ReferenceDelta> out;
    for (const auto& preset : report.preset_order()) {
        const auto row = reference.values.find(preset);
        if (row == reference.values.end()) {
            throw ValidationError("axes", "reference has no row for preset '" + preset + "'");
        }
        for (const auto& col : report_columns()) {
            const auto ref_value = reference.value(preset, col);
            const MarginalResult* ours = report.marginal(preset, col);
            if (ref_value.has_value() != (ours != nullptr)) {
                throw ValidationError("axes", "axis mismatch at " + preset + " / " + col);
            }
            if (!ours) continue;
            ReferenceDelta d;
            d.preset = preset;
            d.column = col;
            d.ours = ours->accuracy;
            d.reference = *ref_value;
            d.delta = d.ours - d.reference;
            d.flagged = std::abs(d.delta) > tolerance;
            out.push_back(std::move(d));
        }
    }
    return out;
}

ReportFormat report_format_from_string(std::string_view name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    throw ValidationError("format", "unknown format '" + std::string(name) + "' (expected csv, json or markdown)");
}

json report_to_json(const ExperimentReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        cells.push_back(json{{"preset", c.preset},
                             {"period", std::string(to_string(c.period))},
                             {"scenario", c.scenario},
                             {"evaluated", c.evaluated},
                             {"detected", c.detected},
                             {"accuracy", c.accuracy},
                             {"ci_half_width", c.ci_half_width},
                             {"replications", c.replications}});
    }
    json marginals = json::array();
    for (const auto& m : report.marginals) {
        marginals.push_back(json{{"preset", m.preset},
                                 {"column", m.column},
                                 {"evaluated", m.evaluated},
                                 {"detected", m.detected},
                                 {"accuracy", m.accuracy},
                                 {"ci_half_width", m.ci_half_width}});
    }
    const Provenance& p = report.provenance;
    json prov{{"base_seed", p.base_seed},
              {"mode", std::string(to_string(p.mode))},
              {"weights", json{{"w_a", p.weights.w_a}, {"w_d", p.weights.w_d}, {"w_n", p.weights.w_n}}},
              {"threshold", p.threshold},
              {"bernoulli_p", p.bernoulli_p ? json(*p.bernoulli_p) : json(nullptr)},
              {"target_suspects_per_cell", p.target_suspects_per_cell},
              {"replication_duration_s", p.replication_duration_s},
              {"layout_name", p.layout_name},
              {"layout_hash", p.layout_hash},
              {"tool_version", p.tool_version}};
    return json{{"cells", cells}, {"marginals", marginals}, {"provenance", prov}};
}

ExperimentReport report_from_json(const json& j) {
    ExperimentReport r;
    try {
        for (const auto& c : j.at("cells")) {
            CellResult cell;
            cell.preset = c.at("preset").get<std::string>();
            cell.period = period_from_string(c.at("period").get<std::string>());
            cell.scenario = c.at("scenario").get<int>();
            cell.evaluated = c.at("evaluated").get<int>();
            cell.detected = c.at("detected").get<int>();
            cell.accuracy = c.at("accuracy").get<double>();
            cell.ci_half_width = c.at("ci_half_width").get<double>();
            cell.replications = c.value("replications", 0);
            r.cells.push_back(std::move(cell));
        }
        for (const auto& m : j.at("marginals")) {
            r.marginals.push_back({m.at("preset").get<std::string>(), m.at("column").get<std::string>(),
                                   m.at("evaluated").get<int>(), m.at("detected").get<int>(),
                                   m.at("accuracy").get<double>(), m.at("ci_half_width").get<double>()});
        }
        const auto& p = j.at("provenance");
        Provenance& prov = r.provenance;
        prov.base_seed = p.at("base_seed").get<std::uint64_t>();
        prov.mode = observation_mode_from_string(p.at("mode").get<std::string>());
        const auto& w = p.at("weights");
        prov.weights = {w.at("w_a").get<double>(), w.at("w_d").get<double>(), w.at("w_n").get<double>()};
        prov.threshold = p.at("threshold").get<double>();
        if (!p.at("bernoulli_p").is_null()) prov.bernoulli_p = p.at("bernoulli_p").get<double>();
        prov.target_suspects_per_cell = p.at("target_suspects_per_cell").get<int>();
        prov.replication_duration_s = p.at("replication_duration_s").get<double>();
        prov.layout_name = p.at("layout_name").get<std::string>();
        prov.layout_hash = p.at("layout_hash").get<std::string>();
        prov.tool_version = p.at("tool_version").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
    return r;
}

namespace {

std::string markdown_table(const std::vector<std::string>& presets,
                           const std::function<std::optional<double>(const std::string&, const std::string&)>& cell) {
    std::ostringstream out;
    out << "| Model | Overall | Morning | Midday | Afternoon | Scenario 1 | Scenario 2 | Scenario 3 |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& preset : presets) {
        out << "| " << preset_display_name(preset);
        for (const auto& col : report_columns()) {
            const auto v = cell(preset, col);
            out << " | " << (v ? fixed2(*v) : std::string("-"));
        }
        out << " |\n";
    }
    return out.str();
}

}  // namespace

std::string render_reference_markdown(const ReferenceTable& reference) {
    return markdown_table(reference.presets, [&](const std::string& p, const std::string& c) {
        return reference.value(p, c);
    });
}

std::string render_report(const ExperimentReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
        case ReportFormat::Csv: {
            std::ostringstream out;
            out << "preset,period,scenario,evaluated,detected,accuracy,ci_half_width\n";
            for (const auto& c : report.cells) {
                out << c.preset << ',' << to_string(c.period) << ',' << c.scenario << ',' << c.evaluated << ','
                    << c.detected << ',' << fixed4(c.accuracy) << ',' << fixed4(c.ci_half_width) << '\n';
            }
            return out.str();
        }
        case ReportFormat::Markdown: {
            std::string table = markdown_table(report.preset_order(), [&](const std::string& p, const std::string& c) {
                const MarginalResult* m = report.marginal(p, c);
                return m ? std::optional<double>(m->accuracy) : std::nullopt;
            });
            const Provenance& prov = report.provenance;
            std::ostringstream out;
            out << table << "\n";
            out << "mode: " << to_string(prov.mode) << ", seed: " << prov.base_seed << ", weights: ("
                << fixed4(prov.weights.w_a) << ", " << fixed4(prov.weights.w_d) << ", " << fixed4(prov.weights.w_n)
                << "), threshold: " << prov.threshold;
            if (prov.bernoulli_p) out << ", bernoulli_p: " << *prov.bernoulli_p;
            out << ", layout: " << prov.layout_name << " (" << prov.layout_hash << ")\n";
            return out.str();
        }
    }
    return {};
}

void export_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report to '" + path.string() + "'");
    out << render_report(report, format);
    if (!out) throw IoError("failed writing report to '" + path.string() + "'");
}

}  // namespace twinwatch
