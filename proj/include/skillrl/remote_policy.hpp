#pragma once
// Chat-completion HTTP adapter for remote_policy. Request/response shapes are
// pinned in docs/wire_formats.md.

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "skillrl/policy.hpp"

namespace skillrl {

inline Policy remote_policy(const RemoteConfig& config) {
  return [config](const PolicyRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    for (const auto& turn : request.turns) {
      const char* role = turn.actor == Actor::Agent ? "assistant" : "user";
      messages.push_back({{"role", role}, {"content", turn.text}});
    }
    nlohmann::json body = {{"model", config.model},
                           {"messages", messages},
                           {"temperature", config.temperature}};

    httplib::Client client(config.endpoint_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (const char* token = std::getenv(config.auth_token_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + token);

    auto res = client.Post(config.path, headers, body.dump(), "application/json");
    if (!res)
      throw PolicyFailure("remote policy: transport error contacting " +
                          config.endpoint_url);
    if (res->status != 200)
      throw PolicyFailure("remote policy: HTTP " + std::to_string(res->status));

    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
      throw PolicyFailure("remote policy: malformed completion response");

    const nlohmann::json& choice = reply["choices"][0];
    PolicyResponse out;
    out.text = choice.at("message").at("content").get<std::string>();

    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content")) {
      std::vector<std::pair<long, double>> lps;
      long id = 0;
      for (const auto& item : choice["logprobs"]["content"])
        lps.emplace_back(id++, item.at("logprob").get<double>());
      out.token_logprobs = std::move(lps);
      out.token_count = static_cast<int>(out.token_logprobs->size());
    } else if (reply.contains("usage") && reply["usage"].contains("completion_tokens")) {
      out.token_count = reply["usage"]["completion_tokens"].get<int>();
    } else {
      out.token_count = ws_token_count(out.text);
    }
    return out;
  };
}

}  // namespace skillrl
