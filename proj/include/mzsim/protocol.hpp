#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "mzsim/steering_session.hpp"

namespace mzsim::wire {

using json = nlohmann::json;

constexpr int kVersion = 1;
constexpr std::size_t kMaxMessage = 1u << 20;

/// 4-byte big-endian payload length followed by the UTF-8 JSON text.
std::string encode(const json& message);

/// Incremental decoder for a byte stream of framed messages.
class Decoder {
public:
    void feed(const char* data, std::size_t n) { buffer_.append(data, n); }
    /// Next complete message, if any. Throws ParseError on an oversized or
    /// malformed payload.
    std::optional<json> next();

private:
    std::string buffer_;
};

json to_json(const Frame& frame, const std::string& session);
json to_json(const CommandResult& result, const std::string& session);
json layout_json(const OpticalNetwork& network);

/// Throws ParseError on a malformed command.
Command command_from_json(const json& request);

struct Reply {
    json response;
    std::shared_ptr<Session> subscribe;  // set for subscribe requests
};

/// Handles one request; failures become "error" responses.
Reply handle(SessionRegistry& registry, const json& request);

json error_json(const json& request, std::string_view kind, const std::string& message);

} // namespace mzsim::wire
