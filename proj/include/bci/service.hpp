#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "bci/session.hpp"

namespace bci {

struct ServiceConfig {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;  // 0 picks a free port
    std::string sessions_dir = "sessions";
    EngineConfig engine;        // realtime_factor defaults to 1 below
    SourceSpec source;
    SessionPlan plan;
    double rating_timeout_s = 60.0;
    std::string model_path;     // default model for demo / CNN validation

    ServiceConfig() { engine.realtime_factor = 1.0; }
};

// HTTP + WebSocket front end for the UI, one active session at a time.
//
//   GET  /health
//   GET  /sessions
//   GET  /sessions/{id}
//   POST /session/start  {"plan": {"kind": "training|demo|validation", ...durations},
//                         "model_kind": "knn|lda|cnn", "source": "synthetic", "model": path}
//   GET  /ws             WebSocket upgrade; JSON text messages with "v": 1
class Service {
public:
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds and starts serving on a background thread.
    void start();
    std::uint16_t port() const;
    void stop();
    // Blocks until stop() is called from another thread or a signal.
    void wait();

    class Impl;

private:
    std::shared_ptr<Impl> impl_;
};

}  // namespace bci
