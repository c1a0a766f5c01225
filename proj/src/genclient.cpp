#include "cfq/genclient.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cfq/error.hpp"
#include "cfq/types.hpp"

namespace cfq {
namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw CfqError(ErrorKind::io, "sha-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

nlohmann::ordered_json request_fields(const GenerationRequest& request) {
  nlohmann::ordered_json obj;
  obj["model_name"] = request.model_name;
  obj["prompt"] = request.prompt;
  if (request.image_uri.empty()) {
    obj["image_uri"] = nullptr;
  } else {
    obj["image_uri"] = request.image_uri;
  }
  obj["temperature"] = request.temperature;
  obj["max_tokens"] = request.max_tokens;
  obj["batch_tag"] = request.batch_tag;
  return obj;
}

void validate_request(const GenerationRequest& request) {
  if (trim(request.prompt).empty()) {
    throw CfqError(ErrorKind::contract, "generation prompt is empty");
  }
  if (!std::isfinite(request.temperature) || request.temperature < 0.0) {
    throw CfqError(ErrorKind::contract, "temperature must be finite and >= 0");
  }
  if (request.max_tokens < 1) {
    throw CfqError(ErrorKind::contract, "max_tokens must be positive");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

std::string cache_key(const GenerationRequest& request) {
  return sha256_hex(request_fields(request).dump());
}

GenClient::GenClient(std::filesystem::path cache_dir,
                     std::shared_ptr<GenTransport> transport)
    : cache_dir_(std::move(cache_dir)), transport_(std::move(transport)) {
  std::filesystem::create_directories(cache_dir_);
}

std::filesystem::path GenClient::entry_path(const std::string& key) const {
  return cache_dir_ / (key + ".txt");
}

void GenClient::store_entry(const std::string& key,
                            const GenerationRequest& request,
                            const std::string& response, bool overwrite) {
  auto path = entry_path(key);
  if (overwrite) {
    auto tmp = cache_dir_ / (key + ".tmp" + std::to_string(::getpid()));
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << response;
    out.close();
    std::filesystem::rename(tmp, path);
  } else {
    // O_EXCL keeps concurrent writers of the same key first-writer-wins.
    int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) return;  // another writer won; its value stands
    ssize_t n = ::write(fd, response.data(), response.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(response.size())) {
      throw CfqError(ErrorKind::io, "short write to cache entry " + key);
    }
  }
  std::ofstream sidecar(cache_dir_ / (key + ".req.json"),
                        std::ios::binary | std::ios::trunc);
  sidecar << request_fields(request).dump(2) << '\n';
}

std::string GenClient::generate(const GenerationRequest& request,
                                bool force_refresh) {
  validate_request(request);
  const std::string key = cache_key(request);
  const auto path = entry_path(key);

  if (!force_refresh && std::filesystem::exists(path)) {
    std::lock_guard lock(stats_mutex_);
    ++stats_.cache_hits;
    return read_file(path);
  }

  {
    std::lock_guard lock(stats_mutex_);
    ++stats_.cache_misses;
  }
  if (!transport_) {
    throw CfqError(ErrorKind::cache_miss,
                   "offline and no cached response for key " + key);
  }
  if (!request.image_uri.empty() && !transport_->supports_vision()) {
    throw CfqError(ErrorKind::capability,
                   "endpoint does not accept image attachments");
  }

  std::string response;
  try {
    {
      std::lock_guard lock(stats_mutex_);
      ++stats_.network_calls;
    }
    response = transport_->complete(request);
  } catch (const CfqError& e) {
    if (e.kind() == ErrorKind::transport) {
      throw CfqError(ErrorKind::transport,
                     std::string(e.what()) + " (cache key " + key + ")");
    }
    throw;
  }

  store_entry(key, request, response, force_refresh);
  // In a racing miss the first writer's value is the one everyone sees.
  return force_refresh ? response : read_file(path);
}

GenStats GenClient::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

std::vector<std::string> parse_sentence_list(const std::string& raw,
                                             int expected_n) {
  std::vector<std::string> out;
  std::istringstream lines(raw);
  std::string line;
  while (std::getline(lines, line)) {
    std::string text = trim(line);
    bool stripped = true;
    while (stripped && !text.empty()) {
      stripped = false;
      if (text[0] == '-' || text[0] == '*') {
        text = trim(text.substr(1));
        stripped = true;
        continue;
      }
      if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xE2 &&
          static_cast<unsigned char>(text[1]) == 0x80 &&
          static_cast<unsigned char>(text[2]) == 0xA2) {  // U+2022 bullet
        text = trim(text.substr(3));
        stripped = true;
        continue;
      }
      std::size_t digits = 0;
      while (digits < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[digits]))) {
        ++digits;
      }
      if (digits > 0 && digits < text.size() &&
          (text[digits] == '.' || text[digits] == ')')) {
        // "1. foo" and "2)bar" are markers; "3.5 km" is a number, not one.
        bool followed_by_digit =
            digits + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[digits + 1]));
        if (!followed_by_digit) {
          text = trim(text.substr(digits + 1));
          stripped = true;
        }
      }
    }
    if (text.empty()) continue;
    out.push_back(std::move(text));
    if (expected_n >= 1 && out.size() == static_cast<std::size_t>(expected_n)) {
      break;
    }
  }
  if (out.empty()) {
    throw CfqError(ErrorKind::empty_generation,
                   "no usable sentences in generation output");
  }
  return out;
}

}  // namespace cfq
