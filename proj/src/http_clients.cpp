#include <chrono>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cfq/embedding.hpp"
#include "cfq/error.hpp"
#include "cfq/genclient.hpp"

namespace cfq {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // /path or /
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw CfqError(ErrorKind::config, "endpoint url '" + url +
                                          "' has no scheme (use http:// or "
                                          "https://)");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string base64_encode(const std::string& bytes) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < bytes.size()) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                 static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == bytes.size()) {
    unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                 (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string post_json(const std::string& url, const std::string& api_key,
                      const std::string& body, int timeout_seconds,
                      int max_retries) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  httplib::Headers headers;
  if (!api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    }
    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw CfqError(ErrorKind::transport,
                     "endpoint returned HTTP " + std::to_string(result->status) +
                         ": " + result->body.substr(0, 200));
    }
    return result->body;
  }
  throw CfqError(ErrorKind::transport, "POST " + url + " failed after " +
                                           std::to_string(max_retries + 1) +
                                           " attempts: " + last_error);
}

class HttpChatTransport : public GenTransport {
 public:
  explicit HttpChatTransport(ChatEndpointConfig config)
      : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
      throw CfqError(ErrorKind::config, "chat endpoint url is empty");
    }
  }

  bool supports_vision() const override { return config_.supports_vision; }

  std::string complete(const GenerationRequest& request) override {
    nlohmann::ordered_json body;
    body["model"] = request.model_name;
    auto& messages = body["messages"] = nlohmann::json::array();
    if (!config_.system_prompt.empty()) {
      messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
    }
    if (request.image_uri.empty()) {
      messages.push_back({{"role", "user"}, {"content", request.prompt}});
    } else {
      std::string image_url = request.image_uri;
      if (config_.image_mode == "base64") {
        std::ifstream in(request.image_uri, std::ios::binary);
        if (!in) {
          throw CfqError(ErrorKind::io,
                         "cannot read image '" + request.image_uri + "'");
        }
        std::ostringstream bytes;
        bytes << in.rdbuf();
        image_url = "data:image/jpeg;base64," + base64_encode(bytes.str());
      }
      nlohmann::json content = nlohmann::json::array();
      content.push_back({{"type", "text"}, {"text", request.prompt}});
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", image_url}}}});
      messages.push_back({{"role", "user"}, {"content", content}});
    }
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;

    auto raw = post_json(config_.endpoint, config_.api_key, body.dump(),
                         config_.timeout_seconds, config_.max_retries);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw CfqError(ErrorKind::transport,
                     std::string("unparseable endpoint response: ") + e.what());
    }
    if (parsed.contains("choices") && parsed["choices"].is_array() &&
        !parsed["choices"].empty()) {
      const auto& choice = parsed["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        return choice["message"]["content"].get<std::string>();
      }
      if (choice.contains("text") && choice["text"].is_string()) {
        return choice["text"].get<std::string>();
      }
    }
    throw CfqError(ErrorKind::transport,
                   "endpoint response carries no choice text");
  }

 private:
  ChatEndpointConfig config_;
};

}  // namespace

std::shared_ptr<GenTransport> make_http_transport(ChatEndpointConfig config) {
  return std::make_shared<HttpChatTransport>(std::move(config));
}

RemoteProvider::RemoteProvider(RemoteEncoderConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) {
    throw CfqError(ErrorKind::config, "encoder endpoint url is empty");
  }
  if (config_.batch_size == 0) config_.batch_size = 1;
}

std::vector<EmbeddingVector> RemoteProvider::request(
    std::span<const std::string> items, const char* field) {
  std::vector<EmbeddingVector> out;
  out.reserve(items.size());
  for (std::size_t start = 0; start < items.size();
       start += config_.batch_size) {
    std::size_t end = std::min(items.size(), start + config_.batch_size);
    nlohmann::ordered_json body;
    body[field] = std::vector<std::string>(items.begin() + start,
                                           items.begin() + end);
    auto raw = post_json(config_.endpoint, config_.api_key, body.dump(),
                         config_.timeout_seconds, config_.max_retries);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw CfqError(ErrorKind::transport,
                     std::string("unparseable encoder response: ") + e.what());
    }
    if (!parsed.contains("vectors") || !parsed["vectors"].is_array() ||
        parsed["vectors"].size() != end - start) {
      throw CfqError(ErrorKind::transport,
                     "encoder response lacks one vector per input");
    }
    for (const auto& entry : parsed["vectors"]) {
      EmbeddingVector vec;
      vec.values = entry.get<std::vector<float>>();
      if (config_.dimension != 0 && vec.dimension() != config_.dimension) {
        throw CfqError(ErrorKind::config,
                       "encoder returned dimension " +
                           std::to_string(vec.dimension()) + ", configured " +
                           std::to_string(config_.dimension));
      }
      out.push_back(normalized(std::move(vec)));
    }
  }
  return out;
}

std::vector<EmbeddingVector> RemoteProvider::embed_texts(
    std::span<const std::string> texts) {
  return request(texts, "texts");
}

std::vector<EmbeddingVector> RemoteProvider::embed_images(
    std::span<const std::string> keys) {
  return request(keys, "image_uris");
}

}  // namespace cfq
