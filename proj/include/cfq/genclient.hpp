#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace cfq {

/// One chat-style generation call. batch_tag distinguishes repeated
/// augmentation turns so each turn caches separately.
struct GenerationRequest {
  std::string model_name;
  std::string prompt;
  std::string image_uri;  // empty = text-only
  double temperature = 0.7;
  int max_tokens = 256;
  int batch_tag = 0;
};

/// Content hash over all request fields, as a hex digest usable as a
/// filename. Equal requests give equal keys; any field change gives a
/// different key.
std::string cache_key(const GenerationRequest& request);

/// Wire-level generation backend. complete() returns the raw response text or
/// throws a transport error; retry policy lives in the implementation.
class GenTransport {
 public:
  virtual ~GenTransport() = default;
  virtual std::string complete(const GenerationRequest& request) = 0;
  virtual bool supports_vision() const { return false; }
};

struct ChatEndpointConfig {
  std::string endpoint;       // e.g. http://host:port/v1/chat/completions
  std::string api_key;        // sent as Authorization: Bearer when non-empty
  std::string system_prompt;  // optional leading system message
  bool supports_vision = false;
  std::string image_mode = "uri";  // "uri" | "base64"
  int timeout_seconds = 60;
  int max_retries = 2;
};

/// HTTP chat endpoint client: POSTs {model, messages, temperature,
/// max_tokens} and reads the first choice's text. Image attachments go as an
/// image_url content part, by uri or inline base64 per the capability flag.
std::shared_ptr<GenTransport> make_http_transport(ChatEndpointConfig config);

struct GenStats {
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t network_calls = 0;
};

/// Generation client with a content-addressed on-disk response cache (one
/// file per key). Without a transport the client is offline and serves cache
/// hits only. Thread-safe; concurrent writes of one key resolve to exactly
/// one stored value (first writer wins).
class GenClient {
 public:
  GenClient(std::filesystem::path cache_dir,
            std::shared_ptr<GenTransport> transport = nullptr);

  /// Returns the cached response for the request's key, or calls the
  /// endpoint, stores the response, and returns it. force_refresh skips the
  /// cache read (the fresh response replaces the entry) and is how empty
  /// generations are retried.
  std::string generate(const GenerationRequest& request,
                       bool force_refresh = false);

  bool offline() const { return transport_ == nullptr; }
  bool transport_supports_vision() const {
    return transport_ && transport_->supports_vision();
  }
  const std::filesystem::path& cache_dir() const { return cache_dir_; }
  GenStats stats() const;

 private:
  std::filesystem::path entry_path(const std::string& key) const;
  void store_entry(const std::string& key, const GenerationRequest& request,
                   const std::string& response, bool overwrite);

  std::filesystem::path cache_dir_;
  std::shared_ptr<GenTransport> transport_;
  mutable std::mutex stats_mutex_;
  GenStats stats_;
};

/// Splits raw generation output into candidate sentences: one per line,
/// leading enumeration markers ("1.", "-", "*", bullets) stripped, whitespace
/// trimmed, empties dropped. Keeps at most expected_n items (in order) when
/// expected_n >= 1. Zero usable sentences is an empty-generation error.
std::vector<std::string> parse_sentence_list(const std::string& raw,
                                             int expected_n);

}  // namespace cfq
