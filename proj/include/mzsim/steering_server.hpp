#pragma once

#include <memory>
#include <string>

#include "mzsim/steering_session.hpp"

namespace mzsim {

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 0;  // 0 picks a free port
    int tick_ms = 50;
};

/// TCP front end for a SessionRegistry. Each connection gets a reader thread;
/// one ticker thread advances every session and pushes frames to subscribers.
class SteeringServer {
public:
    explicit SteeringServer(ServerOptions options);
    ~SteeringServer();
    SteeringServer(const SteeringServer&) = delete;
    SteeringServer& operator=(const SteeringServer&) = delete;

    unsigned short port() const;
    SessionRegistry& registry();

    void start();  // returns once the listener is accepting
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace mzsim
