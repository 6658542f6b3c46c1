#pragma once
// Embedding-service client: POST {"texts": [...]} -> {"vectors": [[...], ...]}.
// Shape pinned in docs/wire_formats.md.

#include <httplib.h>
#include <json.hpp>

#include "skillrl/retrieval.hpp"

namespace skillrl {

class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint_url, int dimension, std::string path = "/embed")
      : endpoint_(std::move(endpoint_url)), dimension_(dimension), path_(std::move(path)) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    nlohmann::json body = {{"texts", texts}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) throw std::runtime_error("embedding service: transport error");
    if (res->status != 200)
      throw std::runtime_error("embedding service: HTTP " + std::to_string(res->status));
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("vectors"))
      throw std::runtime_error("embedding service: malformed response");
    std::vector<std::vector<double>> out;
    for (const auto& v : reply["vectors"]) out.push_back(v.get<std::vector<double>>());
    if (out.size() != texts.size())
      throw std::runtime_error("embedding service: vector count mismatch");
    return out;
  }

  int dimension() const override { return dimension_; }
  bool deterministic() const override { return false; }

 private:
  std::string endpoint_;
  int dimension_;
  std::string path_;
};

}  // namespace skillrl
