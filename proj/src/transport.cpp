#include "rpsim/transport.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "rpsim/error.hpp"

namespace rpsim {

namespace {

class HttpJsonTransport final : public JsonTransport {
public:
    explicit HttpJsonTransport(HttpEndpointConfig cfg) : cfg_(std::move(cfg)) {
        static const std::regex url_re(R"(^(http://[^/]+)(/.*)?$)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(cfg_.url, m, url_re)) {
            throw ConfigError("endpoint '" + cfg_.name + "': unsupported url '" + cfg_.url +
                              "' (expected http://host[:port]/path)");
        }
        base_ = m[1].str();
        path_ = m[2].matched ? m[2].str() : "/";
    }

    std::string post(const json& body) override {
        httplib::Client client(base_);
        const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        client.set_write_timeout(secs, 0);
        httplib::Headers headers;
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (key == nullptr) throw AdapterError("environment variable " + cfg_.api_key_env + " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw AdapterError("endpoint '" + cfg_.name + "' unreachable: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) {
            throw AdapterError("endpoint '" + cfg_.name + "' returned HTTP " + std::to_string(res->status));
        }
        return res->body;
    }

    std::string describe() const override { return "http:" + cfg_.name; }

private:
    HttpEndpointConfig cfg_;
    std::string base_;
    std::string path_;
};

}  // namespace

HttpEndpointConfig endpoint_from_json(const json& j) {
    HttpEndpointConfig c;
    c.name = j.value("name", "");
    c.url = j.at("url").get<std::string>();
    c.api_key_env = j.value("api_key_env", "");
    c.timeout_seconds = j.value("timeout_seconds", 60.0);
    return c;
}

std::shared_ptr<JsonTransport> make_http_transport(const HttpEndpointConfig& cfg) {
    return std::make_shared<HttpJsonTransport>(cfg);
}

json parse_adapter_payload(const std::string& raw) {
    json outer = json::parse(raw);
    if (outer.is_object() && outer.contains("content") && outer["content"].is_string()) {
        std::string inner = outer["content"].get<std::string>();
        const auto open = inner.find('{');
        const auto close = inner.rfind('}');
        if (open == std::string::npos || close == std::string::npos || close < open) {
            throw json::parse_error::create(101, 0, "no JSON object inside content", nullptr);
        }
        return json::parse(inner.substr(open, close - open + 1));
    }
    return outer;
}

}  // namespace rpsim
