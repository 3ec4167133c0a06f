#include "twinwatch/service.hpp"

#include <cstdlib>
#include <mutex>

#include <httplib.h>

#include "json_util.hpp"
#include "twinwatch/errors.hpp"
#include "twinwatch/heatmap.hpp"
#include "twinwatch/version.hpp"

namespace twinwatch {

using json = nlohmann::json;

namespace {

HttpResponse json_response(int status, const json& body) { return {status, body.dump() + "\n"}; }

HttpResponse error_response(int status, const std::string& message, const std::string& field = "") {
    json body{{"error", message}};
    if (!field.empty()) body["field"] = field;
    return json_response(status, body);
}

// Maps library exceptions onto status codes: 400 unreadable body,
// 422 invalid values, 500 anything unexpected.
template <typename Fn>
HttpResponse guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        return error_response(400, std::string("malformed JSON: ") + e.what());
    } catch (const ParseError& e) {
        return error_response(400, e.what());
    } catch (const ValidationError& e) {
        return error_response(422, e.what(), e.field());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

json parse_body(const std::string& body) {
    json j = json::parse(body);  // throws json::parse_error -> 400
    if (!j.is_object()) throw ParseError("request body must be a JSON object");
    return j;
}

std::vector<Camera> request_cameras(const json& j, const StationLayout& layout) {
    if (j.contains("cameras")) return detail::cameras_from_json(j.at("cameras"));
    return builtin_preset(detail::field_as<std::string>(j, "preset", "Base"), layout).cameras;
}

}  // namespace

StationLayout ServiceState::layout() const {
    std::shared_lock lock(mutex_);
    return layout_;
}

void ServiceState::replace_layout(StationLayout layout) {
    std::unique_lock lock(mutex_);
    layout_ = std::move(layout);
}

HttpResponse handle_health(const ServiceState& state) {
    return json_response(200, {{"status", "ok"}, {"version", kToolVersion}, {"layout", state.layout().name}});
}

HttpResponse handle_get_layout(const ServiceState& state) {
    return {200, layout_to_string(state.layout())};
}

HttpResponse handle_put_layout(ServiceState& state, const std::string& body) {
    return guarded([&] {
        StationLayout layout = layout_from_json(json::parse(body));
        const std::string name = layout.name;
        const std::uint64_t hash = layout_hash(layout);
        state.replace_layout(std::move(layout));
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
        return json_response(200, {{"status", "ok"}, {"name", name}, {"hash", hex}});
    });
}

HttpResponse handle_presets(const ServiceState& state) {
    const StationLayout layout = state.layout();
    json presets = json::array();
    for (const auto& p : layout.presets) {
        presets.push_back({{"name", p.name},
                           {"display_name", preset_display_name(p.name)},
                           {"cameras", detail::cameras_to_json(p.cameras)}});
    }
    return json_response(200, {{"presets", presets}});
}

ExperimentPlan simulate_plan_from_json(const json& j, const StationLayout& layout) {
    using detail::field_as;
    ExperimentPlan plan;
    if (j.contains("cameras")) {
        plan.custom_presets.push_back({field_as<std::string>(j, "name", "custom"), request_cameras(j, layout)});
        plan.presets = {plan.custom_presets.back().name};
    } else if (j.contains("presets")) {
        plan.presets = field_as<std::vector<std::string>>(j, "presets", {});
        for (const auto& name : plan.presets) builtin_preset(name, layout);
    } else {
        const auto name = field_as<std::string>(j, "preset", "Base");
        builtin_preset(name, layout);
        plan.presets = {name};
    }
    plan.periods = detail::periods_from_json(j, {Period::Morning, Period::Midday, Period::Afternoon});
    plan.scenarios = detail::scenarios_from_json(j, {1, 2, 3});
    plan.mode = observation_mode_from_string(field_as<std::string>(j, "mode", "geometric"));
    plan.base_seed = field_as<std::uint64_t>(j, "seed", 0);
    plan.fixed_replications = field_as(j, "replications", 1);
    plan.replication_duration_s = field_as(j, "duration_s", plan.replication_duration_s);
    plan.weights = detail::weights_from_json(j, plan.weights);
    plan.threshold.t = field_as(j, "threshold", plan.threshold.t);
    if (j.contains("bernoulli_p") && !j.at("bernoulli_p").is_null()) {
        plan.bernoulli_p = field_as(j, "bernoulli_p", 0.0);
    }
    plan.threads = 1;  // the server already runs requests in parallel
    plan.validate();
    return plan;
}

HttpResponse handle_simulate(const ServiceState& state, const std::string& body, const std::string& format) {
    return guarded([&] {
        const ReportFormat fmt = format.empty() ? ReportFormat::Json : report_format_from_string(format);
        const json j = parse_body(body);
        const StationLayout layout = state.layout();
        const ExperimentReport report = run_experiment(layout, simulate_plan_from_json(j, layout));
        HttpResponse r{200, render_report(report, fmt)};
        if (fmt == ReportFormat::Csv) r.content_type = "text/csv";
        if (fmt == ReportFormat::Markdown) r.content_type = "text/markdown";
        return r;
    });
}

HttpResponse handle_heatmap(const ServiceState& state, const std::string& body) {
    return guarded([&] {
        const json j = parse_body(body);
        const StationLayout layout = state.layout();
        const auto cameras = request_cameras(j, layout);
        const double cell = detail::field_as(j, "cell_size", 0.5);
        const auto weights = detail::weights_from_json(j, DetectionWeights{});
        return json_response(200, to_json(compute_heatmap(layout.bounds, cameras, cell, weights)));
    });
}

OptimizeRequest parse_optimize_request(const ServiceState& state, const std::string& body) {
    OptimizeRequest req;
    req.error = guarded([&] {
        const json j = parse_body(body);
        req.problem = problem_from_json(j, state.layout());
        if (req.problem.budget < 1) {
            return error_response(409, "budget must allow at least one evaluation", "budget");
        }
        req.problem.validate();
        return HttpResponse{};
    });
    if (req.error->status == 200) req.error.reset();
    return req;
}

HttpResponse handle_optimize(const ServiceState& state, const std::string& body, const TraceCallback& on_entry) {
    OptimizeRequest req = parse_optimize_request(state, body);
    if (req.error) return *req.error;
    return guarded([&] { return json_response(200, to_json(optimize(req.problem, on_entry))); });
}

ServerAddress server_address_from_env() {
    ServerAddress addr;
    if (const char* bind = std::getenv("TWINWATCH_BIND"); bind && *bind) addr.host = bind;
    if (const char* port = std::getenv("TWINWATCH_PORT"); port && *port) {
        char* end = nullptr;
        const long v = std::strtol(port, &end, 10);
        if (*end != '\0' || v < 0 || v > 65535) {
            throw ValidationError("TWINWATCH_PORT", std::string("invalid port '") + port + "'");
        }
        addr.port = static_cast<int>(v);
    }
    return addr;
}

struct HttpServer::Impl {
    ServiceState& state;
    httplib::Server server;

    explicit Impl(ServiceState& s) : state(s) {}
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(ServiceState& state) : impl_(std::make_unique<Impl>(state)) {
    auto& srv = impl_->server;
    ServiceState& st = impl_->state;

    srv.Get("/api/health", [&st](const httplib::Request&, httplib::Response& res) { send(res, handle_health(st)); });
    srv.Get("/api/layout", [&st](const httplib::Request&, httplib::Response& res) {
        send(res, handle_get_layout(st));
    });
    srv.Put("/api/layout", [&st](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_put_layout(st, req.body));
    });
    srv.Get("/api/presets", [&st](const httplib::Request&, httplib::Response& res) {
        send(res, handle_presets(st));
    });
    srv.Post("/api/simulate", [&st](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_simulate(st, req.body, req.get_param_value("format")));
    });
    srv.Post("/api/heatmap", [&st](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_heatmap(st, req.body));
    });
    srv.Post("/api/optimize", [&st](const httplib::Request& req, httplib::Response& res) {
        const std::string accept = req.get_header_value("Accept");
        if (accept.find("application/x-ndjson") == std::string::npos) {
            send(res, handle_optimize(st, req.body));
            return;
        }
        auto parsed = std::make_shared<OptimizeRequest>(parse_optimize_request(st, req.body));
        if (parsed->error) {
            send(res, *parsed->error);
            return;
        }
        res.set_chunked_content_provider("application/x-ndjson", [parsed](std::size_t, httplib::DataSink& sink) {
            auto emit = [&sink](json event) {
                const std::string line = event.dump() + "\n";
                sink.write(line.data(), line.size());
            };
            try {
                const auto result = optimize(parsed->problem, [&](const TraceEntry& e) {
                    json event = to_json(e);
                    event["event"] = "progress";
                    emit(std::move(event));
                });
                json event = to_json(result);
                event["event"] = "result";
                emit(std::move(event));
            } catch (const std::exception& e) {
                emit({{"event", "error"}, {"error", e.what()}});
            }
            sink.done();
            return true;
        });
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    if (port == 0) {
        const int bound = srv.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind to " + host);
        return bound;
    }
    if (!srv.bind_to_port(host, port)) throw IoError("cannot bind to " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace twinwatch
