#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cfq/genclient.hpp"

namespace cfq {

/// A handcrafted expansion prompt. The body carries the {query} placeholder
/// exactly once; n is the target sentence count per batch.
struct PromptTemplate {
  std::string name;
  std::string body;
  int n = 10;
  double temperature = 0.7;
  int max_tokens = 256;
};

/// Template file: "key: value" header lines (name, n, temperature,
/// max_tokens), a "---" separator, then the body. Parse only; placeholder
/// rules are checked by the consumer (expansion templates via
/// check_template, corpus templates via their own contracts).
PromptTemplate load_template(const std::filesystem::path& path);

/// Validates the expansion contract (exactly one {query}, n >= 1).
void check_template(const PromptTemplate& tmpl);

/// Number of occurrences of "{placeholder}" in a template body.
int placeholder_count(const std::string& body, const std::string& placeholder);

/// Substitutes the single {placeholder} occurrence in a template body.
std::string render_template(const std::string& body,
                            const std::string& placeholder,
                            const std::string& value);

/// An original query plus its expansion batches. Every enhanced text carries
/// the original query as a verbatim prefix; pooled is the exact-duplicate-free
/// union of all batches in first-occurrence order.
struct EnhancedQuery {
  std::string original;
  std::vector<std::vector<std::string>> batches;
  std::vector<std::string> pooled;
};

struct EnhanceOptions {
  std::string model_name = "default";
  int batch_count = 3;     // generation turns (batch_tag 1..B)
  int batch_retries = 2;   // refresh attempts when a turn parses empty
};

/// Expands a query into B batches of up to n enhanced texts. Each generation
/// turn uses batch_tag = 1..B; each parsed sentence s becomes
/// "<query>. <s>". A turn that parses empty is refreshed up to batch_retries
/// times, then dropped; when every turn drops the call fails and the caller
/// may fall back to baseline retrieval.
EnhancedQuery enhance(const std::string& query, const PromptTemplate& tmpl,
                      GenClient& client, const EnhanceOptions& options);

/// The unenhanced comparison arm: one batch holding exactly the query.
EnhancedQuery passthrough(const std::string& query);

}  // namespace cfq
