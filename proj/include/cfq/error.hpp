#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfq {

/// Error taxonomy shared by all modules. Kinds map onto the CLI exit-code
/// policy: config/io/parse/format problems exit 2, everything recoverable is
/// reported per cell and exits 1.
enum class ErrorKind {
  config,            // bad configuration or invalid argument combination
  io,                // filesystem or socket failure
  parse,             // malformed input line / template / response
  format,            // binary file with wrong magic or version
  truncated,         // binary file ends mid-record
  duplicate,         // duplicate id where uniqueness is required
  lookup,            // id not present in a store or index
  domain,            // mathematically undefined request (e.g. zero vector)
  validation,        // manifest integrity failure
  transport,         // HTTP failure after retries
  cache_miss,        // offline mode and the key is not cached
  capability,        // endpoint lacks a required capability (e.g. vision)
  empty_generation,  // generation produced no usable sentences
  contract,          // precondition violated by the caller
  mismatch,          // two reports do not share cell keys
};

std::string_view to_string(ErrorKind kind);

class CfqError : public std::runtime_error {
 public:
  CfqError(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cfq
