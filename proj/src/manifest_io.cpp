#include "cfq/manifest_io.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <string>

#include "cfq/error.hpp"

namespace cfq {
namespace {

using ordered_json = nlohmann::ordered_json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open '" + path.string() + "'");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw CfqError(ErrorKind::io, "cannot write '" + path.string() + "'");
  }
  return out;
}

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  throw CfqError(ErrorKind::parse,
                 path.string() + " line " + std::to_string(line) + ": " + what);
}

nlohmann::json parse_line(const std::filesystem::path& path, std::size_t line_no,
                          const std::string& line) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    line_error(path, line_no, e.what());
  }
  if (!parsed.is_object()) line_error(path, line_no, "expected a JSON object");
  return parsed;
}

std::string require_string(const nlohmann::json& obj, const char* field,
                           const std::filesystem::path& path,
                           std::size_t line_no) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    line_error(path, line_no,
               std::string("missing or non-string field '") + field + "'");
  }
  return obj[field].get<std::string>();
}

}  // namespace

std::vector<ImageRecord> load_images(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<ImageRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto obj = parse_line(path, line_no, line);
    ImageRecord record;
    record.id = require_string(obj, "id", path, line_no);
    record.uri = require_string(obj, "uri", path, line_no);
    if (obj.contains("embedding_id")) {
      if (!obj["embedding_id"].is_string()) {
        line_error(path, line_no, "field 'embedding_id' must be a string");
      }
      record.embedding_id = obj["embedding_id"].get<std::string>();
    }
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto obj = parse_line(path, line_no, line);
    QueryRecord record;
    record.id = require_string(obj, "id", path, line_no);
    record.text = require_string(obj, "text", path, line_no);
    try {
      record.granularity =
          granularity_from_string(require_string(obj, "granularity", path, line_no));
    } catch (const CfqError& e) {
      line_error(path, line_no, e.what());
    }
    if (!obj.contains("true_image_ids") || !obj["true_image_ids"].is_array()) {
      line_error(path, line_no, "missing or non-array field 'true_image_ids'");
    }
    for (const auto& entry : obj["true_image_ids"]) {
      if (!entry.is_string()) {
        line_error(path, line_no, "true_image_ids entries must be strings");
      }
      record.true_image_ids.push_back(entry.get<std::string>());
    }
    // Set semantics: sorted, unique.
    std::sort(record.true_image_ids.begin(), record.true_image_ids.end());
    record.true_image_ids.erase(
        std::unique(record.true_image_ids.begin(), record.true_image_ids.end()),
        record.true_image_ids.end());
    out.push_back(std::move(record));
  }
  return out;
}

void save_images(const std::vector<ImageRecord>& images,
                 const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& image : images) {
    ordered_json obj;
    obj["id"] = image.id;
    obj["uri"] = image.uri;
    if (image.embedding_id) obj["embedding_id"] = *image.embedding_id;
    out << obj.dump() << '\n';
  }
}

void save_queries(const std::vector<QueryRecord>& queries,
                  const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& query : queries) {
    ordered_json obj;
    obj["id"] = query.id;
    obj["text"] = query.text;
    obj["granularity"] = std::string(to_string(query.granularity));
    obj["true_image_ids"] = query.true_image_ids;
    out << obj.dump() << '\n';
  }
}

DatasetManifest load_manifest(const std::filesystem::path& images_path,
                              const std::filesystem::path& queries_path) {
  DatasetManifest manifest;
  manifest.images = load_images(images_path);
  manifest.queries = load_queries(queries_path);
  auto meta_path = queries_path.string() + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    auto in = open_input(meta_path);
    nlohmann::json meta;
    try {
      in >> meta;
    } catch (const nlohmann::json::parse_error& e) {
      throw CfqError(ErrorKind::parse, meta_path + ": " + e.what());
    }
    for (const auto& [key, value] : meta.items()) {
      if (value.is_string()) manifest.metadata[key] = value.get<std::string>();
    }
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& images_path,
                   const std::filesystem::path& queries_path) {
  save_images(manifest.images, images_path);
  save_queries(manifest.queries, queries_path);
  if (!manifest.metadata.empty()) {
    auto out = open_output(queries_path.string() + ".meta.json");
    nlohmann::json meta(manifest.metadata);
    out << meta.dump(2) << '\n';
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CfqError(ErrorKind::io,
                   "cannot open '" + path.string() + "' for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw CfqError(ErrorKind::io, "short write to '" + path.string() + "'");
  }
}

}  // namespace cfq
