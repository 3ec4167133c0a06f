#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "twinwatch/experiment.hpp"
#include "twinwatch/optimizer.hpp"
#include "twinwatch/station.hpp"

namespace twinwatch {

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// The one piece of shared state: the current layout. Readers copy it under a
/// shared lock; PUT /api/layout replaces it under an exclusive one.
class ServiceState {
public:
    explicit ServiceState(StationLayout layout) : layout_(std::move(layout)) {}

    StationLayout layout() const;
    void replace_layout(StationLayout layout);

private:
    mutable std::shared_mutex mutex_;
    StationLayout layout_;
};

HttpResponse handle_health(const ServiceState& state);
HttpResponse handle_get_layout(const ServiceState& state);
HttpResponse handle_put_layout(ServiceState& state, const std::string& body);
HttpResponse handle_presets(const ServiceState& state);
/// `format` is the `?format=` query value; empty means JSON.
HttpResponse handle_simulate(const ServiceState& state, const std::string& body, const std::string& format = "");
HttpResponse handle_heatmap(const ServiceState& state, const std::string& body);
/// When `on_entry` is set it receives every trace entry as it is produced.
HttpResponse handle_optimize(const ServiceState& state, const std::string& body,
                             const TraceCallback& on_entry = {});

/// Parsed optimize request, or the error response to send instead.
struct OptimizeRequest {
    std::optional<HttpResponse> error;
    OptimizationProblem problem;
};
OptimizeRequest parse_optimize_request(const ServiceState& state, const std::string& body);

/// Request body of /api/simulate turned into an experiment plan.
ExperimentPlan simulate_plan_from_json(const nlohmann::json& j, const StationLayout& layout);

struct ServerAddress {
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// TWINWATCH_BIND and TWINWATCH_PORT, falling back to loopback:8080.
ServerAddress server_address_from_env();

class HttpServer {
public:
    explicit HttpServer(ServiceState& state);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace twinwatch
