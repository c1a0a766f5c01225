#pragma once

#include <filesystem>
#include <vector>

#include "cfq/types.hpp"

namespace cfq {

/// Line-delimited JSON manifest files. Blank lines are ignored; any other
/// malformed line raises a parse error carrying the 1-based line number.
std::vector<ImageRecord> load_images(const std::filesystem::path& path);
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);

void save_images(const std::vector<ImageRecord>& images,
                 const std::filesystem::path& path);
void save_queries(const std::vector<QueryRecord>& queries,
                  const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& images_path,
                              const std::filesystem::path& queries_path);

/// Writes images/queries files plus an optional metadata sidecar next to the
/// queries file (queries_path + ".meta.json") when metadata is non-empty.
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& images_path,
                   const std::filesystem::path& queries_path);

/// Whole-file write in binary mode (no newline translation); io error on any
/// failure.
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace cfq
