#pragma once

#include "ndsal/classifier.hpp"
#include "ndsal/harness.hpp"
#include "ndsal/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ndsal {

// ---- embedding file ---------------------------------------------------------
//
//   offset  size      field
//   0       4         magic "EMBF"
//   4       4         version (u32 LE) = 1
//   8       8         n (u64 LE)
//   16      4         d (u32 LE)
//   20      4*n*d     payload, f32 LE, row-major
//   ...     8         checksum (u64 LE): sum of payload bytes mod 2^64

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 20;

// Values are stored as 32-bit floats; doubles are rounded on encode.
std::vector<std::uint8_t> encode_embeddings(const Matrix& values);
// Throws FormatError naming the failing field (magic, version, header,
// payload, checksum, trailing data).
Matrix decode_embeddings(std::span<const std::uint8_t> bytes);

void write_embeddings(const std::filesystem::path& path, const Matrix& values);
Matrix read_embeddings(const std::filesystem::path& path);

// Delimiter-separated floats, one sample per line (for upstream encoder exports).
Matrix import_text_embeddings(const std::filesystem::path& path, char delimiter = ',');

// ---- label file -------------------------------------------------------------

inline constexpr ClassLabel kUnlabeled = -1;

struct LabelEntry {
    SampleId id = 0;
    ClassLabel label = kUnlabeled;
    bool operator==(const LabelEntry&) const = default;
};

// "id,label" header, one row per sample; -1 marks an unlabeled sample.
std::string encode_labels(std::span<const LabelEntry> entries);
// Throws FormatError naming the row for a malformed line, a duplicate id or a
// label outside 0..classes-1.
std::vector<LabelEntry> decode_labels(std::string_view text, std::size_t classes);

void write_labels(const std::filesystem::path& path, std::span<const LabelEntry> entries);
std::vector<LabelEntry> read_labels(const std::filesystem::path& path, std::size_t classes);

// Embeddings with a fully labeled label file (ids index embedding rows).
Dataset read_dataset(const std::filesystem::path& embeddings, const std::filesystem::path& labels,
                     std::size_t classes);

// ---- key-value config -------------------------------------------------------

// "key = value" lines; '#' starts a comment. Throws FormatError on a line
// without '=' or a repeated key.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Keys are the ALConfig field names; unknown keys are rejected.
ALConfig parse_al_config(std::string_view text);
ALConfig read_al_config(const std::filesystem::path& path);
std::string format_al_config(const ALConfig& config);

// Shortest round-trip decimal form.
std::string format_real(double value);

// ---- model ------------------------------------------------------------------

void write_model(const std::filesystem::path& path, const ClassifierParams& params);
ClassifierParams read_model(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ndsal
