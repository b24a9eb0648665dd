#pragma once

#include <memory>
#include <string>

#include <json.hpp>

namespace rpsim {

using nlohmann::json;

/// Request/response channel shared by every external adapter (judge,
/// patient model, clinician agent, matcher). Implementations return the raw
/// response body so callers can persist it verbatim for replay.
class JsonTransport {
public:
    virtual ~JsonTransport() = default;
    /// Throws AdapterError when the endpoint cannot be reached or answers non-2xx.
    virtual std::string post(const json& body) = 0;
    virtual std::string describe() const = 0;
};

struct HttpEndpointConfig {
    std::string name;
    /// http://host[:port]/path
    std::string url;
    /// Name of the environment variable holding a bearer token; empty for none.
    std::string api_key_env;
    double timeout_seconds = 60.0;
};

HttpEndpointConfig endpoint_from_json(const json& j);

std::shared_ptr<JsonTransport> make_http_transport(const HttpEndpointConfig& cfg);

/// Extracts the first JSON object from an adapter response. Accepts either a
/// bare object or an object whose "content" string holds the payload (possibly
/// inside a ``` fence). Throws json::exception on failure.
json parse_adapter_payload(const std::string& raw);

}  // namespace rpsim
