#pragma once

#include "elicit/session.hpp"

#include <memory>
#include <string>

namespace elicit {

/** HTTP/JSON front end for elicitation sessions.
 *
 * Endpoints:
 *   GET  /health
 *   POST /sessions                      {"dataset", "condition", "seed", optional "id", "config"} -> 201
 *   GET  /sessions/{id}                 session view; "status" is "updating" while a refit runs
 *   POST /sessions/{id}/query           issues the next batch (409 if pending or terminal)
 *   POST /sessions/{id}/feedback        {"<feature name>": 0|1, ...} -> iteration result
 *   GET  /sessions/{id}/heatmap?features=a,b
 *   GET  /sessions/{id}/metrics
 *   GET  /sessions/{id}/snapshot        the library snapshot record, verbatim
 *
 * Mutating requests on one session are serialized by rejection: a request that arrives while
 * another is running gets 409 instead of waiting. Reads never block on a running refit.
 */
class Service {
public:
    Service();
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Makes `data` available to POST /sessions under `name`. The first dataset is the default.
    void register_dataset(const std::string& name, SessionData data);
    /// Config applied to new sessions before any per-request override.
    void set_default_config(const SessionConfig& config);

    /// Binds the listening socket; port 0 picks a free port. Returns the bound port, throws
    /// std::runtime_error on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace elicit
