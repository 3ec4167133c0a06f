#include "twinwatch/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "json_util.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/experiment.hpp"
#include "twinwatch/heatmap.hpp"
#include "twinwatch/optimizer.hpp"
#include "twinwatch/service.hpp"
#include "twinwatch/version.hpp"

#ifndef TWINWATCH_DEFAULT_LAYOUT
#define TWINWATCH_DEFAULT_LAYOUT "data/layouts/default_station.json"
#endif

namespace twinwatch {

using json = nlohmann::json;

namespace {

struct GlobalOptions {
    std::string layout = TWINWATCH_DEFAULT_LAYOUT;
    std::uint64_t seed = 0;
    std::string mode = "geometric";
    std::string preset;
    std::string out;
    std::string format;
};

struct Filters {
    std::vector<std::string> periods;
    std::vector<int> scenarios;
    std::optional<double> threshold;
    std::vector<double> weights;  // w_a w_d w_n
};

void add_filters(CLI::App* cmd, Filters& f) {
    cmd->add_option("--period", f.periods, "Morning, Midday or Afternoon (repeatable)");
    cmd->add_option("--scenario", f.scenarios, "suspect scenario 1, 2 or 3 (repeatable)");
    cmd->add_option("--threshold", f.threshold, "detection threshold T");
    cmd->add_option("--weights", f.weights, "w_a w_d w_n")->expected(3);
}

std::vector<Period> periods_or(const Filters& f, std::vector<Period> fallback) {
    if (f.periods.empty()) return fallback;
    std::vector<Period> out;
    for (const auto& p : f.periods) out.push_back(period_from_string(p));
    return out;
}

DetectionWeights weights_or_default(const Filters& f) {
    if (f.weights.empty()) return {};
    DetectionWeights w{f.weights[0], f.weights[1], f.weights[2]};
    w.validate();
    return w;
}

ReportFormat format_or(const GlobalOptions& g, ReportFormat fallback) {
    return g.format.empty() ? fallback : report_format_from_string(g.format);
}

void emit(const GlobalOptions& g, const std::string& text, std::ostream& out) {
    if (g.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(g.out, std::ios::binary);
    if (!f) throw IoError("cannot open '" + g.out + "' for writing");
    f << text;
    if (!f) throw IoError("cannot write '" + g.out + "'");
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string render_deltas(const std::vector<ReferenceDelta>& deltas, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json rows = json::array();
        for (const auto& d : deltas) {
            rows.push_back({{"preset", d.preset}, {"column", d.column}, {"ours", d.ours},
                            {"reference", d.reference}, {"delta", d.delta}, {"flagged", d.flagged}});
        }
        return rows.dump(2) + "\n";
    }
    if (format == ReportFormat::Csv) {
        std::string s = "preset,column,ours,reference,delta,flagged\n";
        for (const auto& d : deltas) {
            s += d.preset + "," + d.column + "," + fixed(d.ours, 4) + "," + fixed(d.reference, 4) + "," +
                 fixed(d.delta, 4) + "," + (d.flagged ? "1" : "0") + "\n";
        }
        return s;
    }
    std::string s = "| Model | Column | Ours | Reference | Delta | |\n|---|---|---|---|---|---|\n";
    for (const auto& d : deltas) {
        s += "| " + preset_display_name(d.preset) + " | " + d.column + " | " + fixed(d.ours, 2) + " | " +
             fixed(d.reference, 2) + " | " + (d.delta >= 0 ? "+" : "") + fixed(d.delta, 2) + " | " +
             (d.flagged ? "outside tolerance" : "") + " |\n";
    }
    return s;
}

// Report followed by its comparison with a reference table.
std::string render_with_deltas(const ExperimentReport& rep, const std::vector<ReferenceDelta>& deltas,
                               ReportFormat fmt) {
    if (fmt == ReportFormat::Json) {
        json j = report_to_json(rep);
        j["reference_deltas"] = json::parse(render_deltas(deltas, fmt));
        return j.dump(2) + "\n";
    }
    return render_report(rep, fmt) + "\n" + render_deltas(deltas, fmt);
}

CameraPreset chosen_preset(const GlobalOptions& g, const StationLayout& layout) {
    return builtin_preset(g.preset.empty() ? "Base" : g.preset, layout);
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Metro-station surveillance twin: simulate, evaluate and tune camera presets", "twinwatch"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    GlobalOptions g;
    app.add_option("--layout", g.layout, "station layout file")->capture_default_str();
    app.add_option("--seed", g.seed, "master random seed");
    app.add_option("--mode", g.mode, "geometric or stochastic")->capture_default_str();
    app.add_option("--preset", g.preset, "camera preset (Base, Model7, Model9, Model11)");
    app.add_option("--out", g.out, "write output to this file instead of stdout");
    app.add_option("--format", g.format, "csv, json or markdown");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run one replication and print the trajectories");
    Filters sim_f;
    add_filters(simulate, sim_f);
    double sim_duration = 3600.0;
    std::optional<double> sim_bernoulli;
    simulate->add_option("--duration", sim_duration, "simulated seconds")->capture_default_str();
    simulate->add_option("--bernoulli-p", sim_bernoulli, "per-camera exceedance probability (stochastic mode)");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "accuracy table over presets, periods and scenarios");
    Filters exp_f;
    add_filters(experiment, exp_f);
    int exp_target = 1000;
    std::optional<int> exp_reps;
    std::optional<double> exp_bernoulli;
    std::string exp_reference;
    unsigned exp_threads = 0;
    double exp_duration = 3600.0;
    experiment->add_option("--target", exp_target, "suspects per cell")->capture_default_str();
    experiment->add_option("--replications", exp_reps, "fixed replications per cell instead of --target");
    experiment->add_option("--bernoulli-p", exp_bernoulli, "per-camera exceedance probability (stochastic mode)");
    experiment->add_option("--reference", exp_reference, "reference table to compare against");
    experiment->add_option("--threads", exp_threads, "worker threads, 0 = all cores");
    experiment->add_option("--duration", exp_duration, "seconds per replication")->capture_default_str();

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "per-camera exceedance and weights for a target accuracy");
    double cal_target = 0.0;
    std::size_t cal_trajectories = 10'000;
    double cal_step = 0.01;
    std::optional<double> cal_threshold;
    calibrate->add_option("--target", cal_target, "target overall accuracy")->required();
    calibrate->add_option("--trajectories", cal_trajectories, "Monte Carlo trajectories per weight candidate");
    calibrate->add_option("--grid-step", cal_step, "weight simplex grid step");
    calibrate->add_option("--threshold", cal_threshold, "detection threshold T");

    // optimize
    auto* optimize_cmd = app.add_subcommand("optimize", "hill-climb camera pans for detection accuracy");
    Filters opt_f;
    add_filters(optimize_cmd, opt_f);
    std::string opt_problem;
    int opt_budget = 400;
    int opt_restarts = 4;
    int opt_reps = 8;
    std::vector<std::string> opt_cameras;
    bool opt_position = false;
    optimize_cmd->add_option("--problem", opt_problem, "problem JSON (same body as POST /api/optimize)");
    optimize_cmd->add_option("--budget", opt_budget, "objective evaluations")->capture_default_str();
    optimize_cmd->add_option("--restarts", opt_restarts, "random restarts")->capture_default_str();
    optimize_cmd->add_option("--replications", opt_reps, "replications per period")->capture_default_str();
    optimize_cmd->add_option("--camera", opt_cameras, "camera ids to free (default: all)");
    optimize_cmd->add_flag("--slide", opt_position, "also move cameras along their mounts");

    // heatmap
    auto* heatmap = app.add_subcommand("heatmap", "best-case detection probability per floor cell");
    double cell_size = 0.5;
    heatmap->add_option("--cell-size", cell_size, "cell edge in metres")->capture_default_str();

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP API (TWINWATCH_BIND, TWINWATCH_PORT)");
    std::optional<std::string> serve_bind;
    std::optional<int> serve_port;
    serve->add_option("--bind", serve_bind, "bind address (overrides TWINWATCH_BIND)");
    serve->add_option("--port", serve_port, "port (overrides TWINWATCH_PORT)");

    // report
    auto* report = app.add_subcommand("report", "re-render a saved report or compare it with a reference");
    std::string rep_in;
    std::string rep_reference;
    double rep_tolerance = 0.03;
    report->add_option("--in", rep_in, "report JSON written by `experiment --format json`");
    report->add_option("--reference", rep_reference, "reference table JSON");
    report->add_option("--tolerance", rep_tolerance, "flag deltas larger than this")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        const ObservationMode mode = observation_mode_from_string(g.mode);
        auto layout = [&] { return load_layout(g.layout); };

        if (simulate->parsed()) {
            const StationLayout l = layout();
            SimConfig cfg;
            cfg.mode = mode;
            cfg.seed = g.seed;
            cfg.preset = chosen_preset(g, l);
            const auto periods = periods_or(sim_f, {Period::Morning});
            if (periods.size() != 1) throw ValidationError("period", "simulate takes a single period");
            cfg.period = periods.front();
            if (!sim_f.scenarios.empty()) cfg.suspect_scenarios = sim_f.scenarios;
            if (sim_f.threshold) cfg.threshold.t = *sim_f.threshold;
            cfg.weights = weights_or_default(sim_f);
            cfg.bernoulli_p = sim_bernoulli;
            cfg.validate();
            if (!(sim_duration > 0.0)) throw ValidationError("duration", "duration must be positive");
            const SimOutput result = run_simulation(l, cfg, sim_duration);
            const ReportFormat fmt = format_or(g, ReportFormat::Json);
            std::string text;
            if (fmt == ReportFormat::Json) {
                text = to_json(result).dump(2) + "\n";
            } else {
                const bool md = fmt == ReportFormat::Markdown;
                text = md ? "| agent | scenario | spawn_s | end_s | detected |\n|---|---|---|---|---|\n"
                          : "agent_id,scenario,spawn_time,end_time,detected\n";
                for (const auto& t : result.trajectories) {
                    if (t.kind != AgentKind::Suspect) continue;
                    const std::string end = t.end_time ? fixed(*t.end_time, 1) : "";
                    const std::string cells[] = {std::to_string(t.agent_id), std::to_string(t.scenario),
                                                 fixed(t.spawn_time, 1), end, t.detected ? "1" : "0"};
                    for (std::size_t i = 0; i < 5; ++i) {
                        text += md ? (i == 0 ? "| " : " | ") : (i == 0 ? "" : ",");
                        text += cells[i];
                    }
                    text += md ? " |\n" : "\n";
                }
            }
            emit(g, text, out);
        } else if (experiment->parsed()) {
            const StationLayout l = layout();
            ExperimentPlan plan = full_matrix_plan();
            if (!g.preset.empty()) plan.presets = {g.preset};
            plan.periods = periods_or(exp_f, plan.periods);
            if (!exp_f.scenarios.empty()) plan.scenarios = exp_f.scenarios;
            if (exp_f.threshold) plan.threshold.t = *exp_f.threshold;
            plan.weights = weights_or_default(exp_f);
            plan.mode = mode;
            plan.base_seed = g.seed;
            plan.target_suspects_per_cell = exp_target;
            plan.fixed_replications = exp_reps;
            plan.bernoulli_p = exp_bernoulli;
            plan.threads = exp_threads;
            plan.replication_duration_s = exp_duration;
            const ReportFormat fmt = format_or(g, ReportFormat::Markdown);
            const ExperimentReport rep = run_experiment(l, plan);
            emit(g,
                 exp_reference.empty()
                     ? render_report(rep, fmt)
                     : render_with_deltas(rep, compare_to_reference(rep, load_reference(exp_reference)), fmt),
                 out);
        } else if (calibrate->parsed()) {
            const StationLayout l = layout();
            const CameraPreset preset = chosen_preset(g, l);
            const int m = static_cast<int>(preset.cameras.size());
            const double p_star = calibrate_exceedance(cal_target, m);
            WeightCalibrationOptions opts;
            opts.trajectories = cal_trajectories;
            opts.grid_step = cal_step;
            opts.seed = g.seed;
            DetectionThreshold t;
            if (cal_threshold) t.t = *cal_threshold;
            const auto cal = calibrate_weights(cal_target, m, StochasticSampler{}, t, NormalizationBounds{}, opts);
            const ReportFormat fmt = format_or(g, ReportFormat::Markdown);
            std::string text;
            if (fmt == ReportFormat::Json) {
                text = json{{"preset", preset.name},
                            {"cameras", m},
                            {"target", cal_target},
                            {"p_star", p_star},
                            {"weights", detail::to_json(cal.weights)},
                            {"achieved_rate", cal.achieved_rate},
                            {"candidates_evaluated", cal.candidates_evaluated},
                            {"converged", cal.converged}}
                           .dump(2) +
                       "\n";
            } else if (fmt == ReportFormat::Csv) {
                text = "preset,cameras,target,p_star,w_a,w_d,w_n,achieved_rate,converged\n" + preset.name + "," +
                       std::to_string(m) + "," + fixed(cal_target, 4) + "," + fixed(p_star, 6) + "," +
                       fixed(cal.weights.w_a, 2) + "," + fixed(cal.weights.w_d, 2) + "," +
                       fixed(cal.weights.w_n, 2) + "," + fixed(cal.achieved_rate, 4) + "," +
                       (cal.converged ? "1" : "0") + "\n";
            } else {
                text = "preset " + preset.name + " (" + std::to_string(m) + " cameras), target " +
                       fixed(cal_target, 4) + "\n";
                text += "p* = " + fixed(p_star, 6) + "\n";
                text += "weights w_a=" + fixed(cal.weights.w_a, 2) + " w_d=" + fixed(cal.weights.w_d, 2) +
                        " w_n=" + fixed(cal.weights.w_n, 2) + " -> simulated rate " + fixed(cal.achieved_rate, 4) +
                        (cal.converged ? "" : " (not within tolerance)") + "\n";
            }
            emit(g, text, out);
        } else if (optimize_cmd->parsed()) {
            const StationLayout l = layout();
            OptimizationProblem p;
            if (!opt_problem.empty()) {
                p = problem_from_json(read_json_file(opt_problem), l);
            } else {
                p.layout = l;
                p.cameras = chosen_preset(g, l).cameras;
                for (const auto& c : p.cameras) {
                    const bool chosen = opt_cameras.empty() ||
                                        std::find(opt_cameras.begin(), opt_cameras.end(), c.id) != opt_cameras.end();
                    if (chosen) p.free.push_back({c.id, std::pair{0.0, 360.0}, opt_position});
                }
                p.objective.mode = mode;
                p.objective.periods = periods_or(opt_f, p.objective.periods);
                if (!opt_f.scenarios.empty()) p.objective.scenarios = opt_f.scenarios;
                if (opt_f.threshold) p.objective.threshold.t = *opt_f.threshold;
                p.objective.weights = weights_or_default(opt_f);
                p.objective.replications = opt_reps;
                p.objective.seed = g.seed;
                p.budget = opt_budget;
                p.restarts = opt_restarts;
                p.seed = g.seed;
            }
            const auto result = optimize(p);
            const ReportFormat fmt = format_or(g, ReportFormat::Json);
            std::string text;
            if (fmt == ReportFormat::Json) {
                text = to_json(result).dump(2) + "\n";
            } else {
                text = "objective " + fixed(result.initial_objective, 4) + " -> " + fixed(result.best_objective, 4) +
                       " after " + std::to_string(result.evaluations) + " evaluations" +
                       (result.budget_exhausted ? " (budget exhausted)" : "") + "\n";
                text += fmt == ReportFormat::Csv ? "camera,x,y,pan\n" : "\n| camera | x | y | pan |\n|---|---|---|---|\n";
                for (const auto& c : result.cameras) {
                    if (fmt == ReportFormat::Csv) {
                        text += c.id + "," + fixed(c.position.x, 2) + "," + fixed(c.position.y, 2) + "," +
                                fixed(c.pan_azimuth, 1) + "\n";
                    } else {
                        text += "| " + c.id + " | " + fixed(c.position.x, 2) + " | " + fixed(c.position.y, 2) +
                                " | " + fixed(c.pan_azimuth, 1) + " |\n";
                    }
                }
            }
            emit(g, text, out);
        } else if (heatmap->parsed()) {
            const StationLayout l = layout();
            const auto grid = compute_heatmap(l.bounds, chosen_preset(g, l).cameras, cell_size);
            const ReportFormat fmt = format_or(g, ReportFormat::Json);
            if (fmt == ReportFormat::Markdown) throw ValidationError("format", "heatmap supports json or csv");
            std::string text;
            if (fmt == ReportFormat::Json) {
                text = to_json(grid).dump() + "\n";
            } else {
                // One line per row, northmost row first, like a floor plan.
                for (int row = grid.height - 1; row >= 0; --row) {
                    for (int col = 0; col < grid.width; ++col) {
                        if (col) text += ",";
                        text += fixed(grid.at(col, row), 3);
                    }
                    text += "\n";
                }
            }
            emit(g, text, out);
        } else if (serve->parsed()) {
            ServerAddress addr = server_address_from_env();
            if (serve_bind) addr.host = *serve_bind;
            if (serve_port) addr.port = *serve_port;
            ServiceState state(layout());
            HttpServer server(state);
            const int port = server.bind(addr.host, addr.port);
            err << "listening on http://" << addr.host << ":" << port << "\n" << std::flush;
            server.listen();
        } else if (report->parsed()) {
            if (rep_in.empty() && rep_reference.empty()) {
                throw ValidationError("in", "report needs --in, --reference or both");
            }
            const ReportFormat fmt = format_or(g, ReportFormat::Markdown);
            if (rep_in.empty()) {
                if (fmt != ReportFormat::Markdown) {
                    throw ValidationError("format", "a reference alone renders as markdown");
                }
                emit(g, render_reference_markdown(load_reference(rep_reference)), out);
            } else {
                const ExperimentReport rep = report_from_json(read_json_file(rep_in));
                emit(g,
                     rep_reference.empty()
                         ? render_report(rep, fmt)
                         : render_with_deltas(
                               rep, compare_to_reference(rep, load_reference(rep_reference), rep_tolerance), fmt),
                     out);
            }
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.field() << ": " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace twinwatch
