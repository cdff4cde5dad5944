#include <cstdlib>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"
#include "tabkg/proposer.hpp"

namespace tabkg {

// Minimal chat-completions client. Not exercised in CI; stub providers
// cover the pipeline there.
std::string HttpProvider::complete(const Prompt& prompt, double temperature) {
    const char* key = key_env_var_.empty() ? nullptr : std::getenv(key_env_var_.c_str());
    if (!key)
        throw std::runtime_error("API key env var not set: " + key_env_var_);

    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);

    nlohmann::json body = {
        {"model", model_},
        {"temperature", temperature},
        {"messages",
         nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}})},
    };
    httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res)
        throw std::runtime_error("provider transport failure: " +
                                 httplib::to_string(res.error()));
    if (res->status != 200)
        throw std::runtime_error("provider HTTP error " + std::to_string(res->status));
    nlohmann::json reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
}

}  // namespace tabkg
