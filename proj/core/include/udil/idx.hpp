#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "udil/data.hpp"

namespace udil {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // ubyte, 3 dims
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // ubyte, 1 dim

// Parsed IDX ubyte payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

// Parses a big-endian IDX file with the expected magic. Throws FormatError
// on a magic mismatch (reporting the observed bytes) or a truncated payload.
IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic);

// Images scaled to [0, 1], one flattened image per row, labels in [0, 10).
// Throws FormatError / IngestionError; never returns a partial dataset.
LabeledSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                    int num_classes = 10);

// Writers for the same layout (used by tooling and tests).
void write_idx_images(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

}  // namespace udil
