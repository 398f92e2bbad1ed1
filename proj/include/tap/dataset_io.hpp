#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tap/sequence.hpp"

namespace tap::data {

// Class file layout, little-endian:
//   "SEQD" | u32 version (1) | u32 dim | u32 sequence count
//   per sequence: u32 L | L * dim f32 values, frame by frame
// A dataset directory holds meta_train/, meta_val/ and meta_test/, each with
// one class_<id>.seq per class, plus manifest.txt.

std::string encode_class_file(const std::vector<RawSequence>& sequences, std::size_t dim);
std::vector<RawSequence> decode_class_file(const std::string& bytes, std::uint32_t class_id);

void write_class_file(const std::filesystem::path& path, const std::vector<RawSequence>& sequences,
                      std::size_t dim);
std::vector<RawSequence> read_class_file(const std::filesystem::path& path);

/// Parses "class_<id>.seq"; throws FormatError otherwise.
std::uint32_t class_id_from_filename(const std::filesystem::path& path);

void write_dataset(const std::filesystem::path& dir, const MetaSplits& splits, std::size_t dim,
                   const std::vector<std::string>& manifest_lines);
MetaSplits read_dataset(const std::filesystem::path& dir);

}  // namespace tap::data
