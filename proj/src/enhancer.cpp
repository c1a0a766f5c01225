#include "cfq/enhancer.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

#include "cfq/error.hpp"
#include "cfq/types.hpp"

namespace cfq {
namespace {

std::size_t count_occurrences(const std::string& text, const std::string& what) {
  std::size_t count = 0;
  for (auto pos = text.find(what); pos != std::string::npos;
       pos = text.find(what, pos + what.size())) {
    ++count;
  }
  return count;
}

}  // namespace

int placeholder_count(const std::string& body, const std::string& placeholder) {
  return count_occurrences(body, "{" + placeholder + "}");
}

void check_template(const PromptTemplate& tmpl) {
  if (count_occurrences(tmpl.body, "{query}") != 1) {
    throw CfqError(ErrorKind::parse, "template '" + tmpl.name +
                                         "' must contain {query} exactly once");
  }
  if (tmpl.n < 1) {
    throw CfqError(ErrorKind::parse,
                   "template '" + tmpl.name + "' needs n >= 1");
  }
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open template '" + path.string() + "'");
  }
  PromptTemplate tmpl;
  tmpl.name = path.stem().string();

  std::string line;
  bool in_body = false;
  std::string body;
  while (std::getline(in, line)) {
    if (!in_body) {
      std::string trimmed = trim(line);
      if (trimmed == "---") {
        in_body = true;
        continue;
      }
      auto colon = trimmed.find(':');
      if (colon == std::string::npos) {
        throw CfqError(ErrorKind::parse, "template '" + path.string() +
                                             "': header line without ':': " +
                                             trimmed);
      }
      std::string key = trim(trimmed.substr(0, colon));
      std::string value = trim(trimmed.substr(colon + 1));
      if (key == "name") {
        tmpl.name = value;
      } else if (key == "n") {
        auto [ptr, ec] =
            std::from_chars(value.data(), value.data() + value.size(), tmpl.n);
        if (ec != std::errc()) {
          throw CfqError(ErrorKind::parse,
                         "template '" + path.string() + "': bad n value");
        }
        (void)ptr;
      } else if (key == "temperature") {
        try {
          tmpl.temperature = std::stod(value);
        } catch (const std::exception&) {
          throw CfqError(ErrorKind::parse,
                         "template '" + path.string() + "': bad temperature");
        }
      } else if (key == "max_tokens") {
        tmpl.max_tokens = std::atoi(value.c_str());
      } else {
        throw CfqError(ErrorKind::parse, "template '" + path.string() +
                                             "': unknown header key '" + key +
                                             "'");
      }
    } else {
      body += line;
      body += '\n';
    }
  }
  if (!in_body) {
    throw CfqError(ErrorKind::parse,
                   "template '" + path.string() + "' has no --- separator");
  }
  tmpl.body = trim(body);
  return tmpl;
}

std::string render_template(const std::string& body,
                            const std::string& placeholder,
                            const std::string& value) {
  std::string token = "{" + placeholder + "}";
  auto pos = body.find(token);
  if (pos == std::string::npos) {
    throw CfqError(ErrorKind::parse,
                   "template body lacks the " + token + " placeholder");
  }
  std::string out = body;
  out.replace(pos, token.size(), value);
  return out;
}

EnhancedQuery enhance(const std::string& query, const PromptTemplate& tmpl,
                      GenClient& client, const EnhanceOptions& options) {
  if (trim(query).empty()) {
    throw CfqError(ErrorKind::contract, "query is empty");
  }
  if (options.batch_count < 1) {
    throw CfqError(ErrorKind::contract, "batch count must be >= 1");
  }
  check_template(tmpl);

  GenerationRequest request;
  request.model_name = options.model_name;
  request.prompt = render_template(tmpl.body, "query", query);
  request.temperature = tmpl.temperature;
  request.max_tokens = tmpl.max_tokens;

  EnhancedQuery out;
  out.original = query;

  for (int tag = 1; tag <= options.batch_count; ++tag) {
    request.batch_tag = tag;
    std::vector<std::string> sentences;
    bool got_batch = false;
    for (int attempt = 0; attempt <= options.batch_retries; ++attempt) {
      // A retry must produce a fresh generation, so it bypasses the cached
      // (empty) response; offline there is nothing fresh to get.
      bool refresh = attempt > 0;
      if (refresh && client.offline()) break;
      try {
        std::string raw = client.generate(request, refresh);
        sentences = parse_sentence_list(raw, tmpl.n);
        got_batch = true;
        break;
      } catch (const CfqError& e) {
        if (e.kind() != ErrorKind::empty_generation) throw;
      }
    }
    if (!got_batch) continue;  // drop the batch

    std::vector<std::string> batch;
    batch.reserve(sentences.size());
    for (const auto& sentence : sentences) {
      batch.push_back(query + ". " + sentence);
    }
    out.batches.push_back(std::move(batch));
  }

  if (out.batches.empty()) {
    throw CfqError(ErrorKind::empty_generation,
                   "all " + std::to_string(options.batch_count) +
                       " enhancement batches were empty for query '" + query +
                       "'");
  }

  std::unordered_set<std::string> seen;
  for (const auto& batch : out.batches) {
    for (const auto& text : batch) {
      if (seen.insert(text).second) out.pooled.push_back(text);
    }
  }
  return out;
}

EnhancedQuery passthrough(const std::string& query) {
  if (trim(query).empty()) {
    throw CfqError(ErrorKind::contract, "query is empty");
  }
  EnhancedQuery out;
  out.original = query;
  out.batches = {{query}};
  out.pooled = {query};
  return out;
}

}  // namespace cfq
