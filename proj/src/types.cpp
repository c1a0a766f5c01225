#include "cfq/types.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "cfq/error.hpp"

namespace cfq {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "io error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::format: return "format error";
    case ErrorKind::truncated: return "truncated file";
    case ErrorKind::duplicate: return "duplicate id";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::transport: return "transport error";
    case ErrorKind::cache_miss: return "cache miss";
    case ErrorKind::capability: return "capability error";
    case ErrorKind::empty_generation: return "empty generation";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::mismatch: return "report mismatch";
  }
  return "unknown error";
}

std::string_view to_string(GranularityLevel level) {
  switch (level) {
    case GranularityLevel::caption: return "caption";
    case GranularityLevel::imagery_tag: return "imagery_tag";
    case GranularityLevel::phrase: return "phrase";
    case GranularityLevel::triple: return "triple";
    case GranularityLevel::fragment: return "fragment";
  }
  return "caption";
}

GranularityLevel granularity_from_string(std::string_view label) {
  for (GranularityLevel level : kGranularityOrder) {
    if (label == to_string(level)) return level;
  }
  throw CfqError(ErrorKind::parse,
                 "unknown granularity '" + std::string(label) + "'");
}

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::baseline: return "baseline";
    case RetrievalMode::enhanced_maxsim: return "enhanced_maxsim";
    case RetrievalMode::enhanced_vote: return "enhanced_vote";
  }
  return "baseline";
}

RetrievalMode mode_from_string(std::string_view label) {
  for (RetrievalMode mode : kModeOrder) {
    if (label == to_string(mode)) return mode;
  }
  throw CfqError(ErrorKind::parse,
                 "unknown retrieval mode '" + std::string(label) + "'");
}

std::string trim(std::string_view text) {
  const char* ws = " \t\r\n\f\v";
  auto begin = text.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(ws);
  return std::string(text.substr(begin, end - begin + 1));
}

std::vector<Violation> validate_manifest(const DatasetManifest& manifest) {
  std::vector<Violation> out;
  std::unordered_set<std::string> image_ids;
  std::unordered_set<std::string> seen_image_dup;
  for (const auto& image : manifest.images) {
    if (trim(image.id).empty()) {
      out.push_back({image.id, "empty-image-id", "image record has empty id"});
      continue;
    }
    if (!image_ids.insert(image.id).second &&
        seen_image_dup.insert(image.id).second) {
      out.push_back({image.id, "duplicate-image-id",
                     "image id '" + image.id + "' appears more than once"});
    }
  }

  std::unordered_set<std::string> query_ids;
  std::unordered_set<std::string> seen_query_dup;
  for (const auto& query : manifest.queries) {
    if (!query_ids.insert(query.id).second &&
        seen_query_dup.insert(query.id).second) {
      out.push_back({query.id, "duplicate-query-id",
                     "query id '" + query.id + "' appears more than once"});
    }
    if (trim(query.text).empty()) {
      out.push_back({query.id, "empty-query-text",
                     "query '" + query.id + "' has empty text"});
    }
    if (query.true_image_ids.empty()) {
      out.push_back({query.id, "empty-truth-set",
                     "query '" + query.id + "' has no true images"});
    }
    for (const auto& true_id : query.true_image_ids) {
      if (!image_ids.contains(true_id)) {
        out.push_back({query.id, "missing-image",
                       "query '" + query.id + "' references missing image '" +
                           true_id + "'"});
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    if (a.record_id != b.record_id) return a.record_id < b.record_id;
    if (a.rule != b.rule) return a.rule < b.rule;
    return a.message < b.message;
  });
  return out;
}

}  // namespace cfq
