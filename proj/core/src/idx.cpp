#include "udil/idx.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "udil/errors.hpp"

namespace udil {

namespace {

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

std::string hex_bytes(const std::uint8_t* p, std::size_t n) {
  std::string s;
  char buf[4];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", p[i]);
    if (i) s += ' ';
    s += buf;
  }
  return s;
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (raw.size() < 4) throw FormatError("idx: " + path.string() + " is shorter than its magic number");
  const std::uint32_t magic = be32(raw.data());
  if (magic != expected_magic) {
    char want[16];
    std::snprintf(want, sizeof(want), "%08x", expected_magic);
    throw FormatError("idx: bad magic in " + path.string() + ": observed bytes [" + hex_bytes(raw.data(), 4) +
                      "], expected 0x" + want);
  }
  const std::size_t ndims = magic & 0xffu;
  const std::size_t header = 4 + 4 * ndims;
  if (raw.size() < header) throw FormatError("idx: truncated header in " + path.string());

  IdxArray arr;
  std::size_t payload = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    arr.dims.push_back(be32(raw.data() + 4 + 4 * d));
    payload *= arr.dims.back();
  }
  if (raw.size() - header < payload) {
    throw FormatError("idx: truncated payload in " + path.string() + ": expected " + std::to_string(payload) +
                      " bytes, found " + std::to_string(raw.size() - header));
  }
  arr.bytes.assign(raw.begin() + static_cast<std::ptrdiff_t>(header),
                   raw.begin() + static_cast<std::ptrdiff_t>(header + payload));
  return arr;
}

LabeledSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                    int num_classes) {
  const IdxArray images = read_idx(images_path, kIdxImagesMagic);
  const IdxArray labels = read_idx(labels_path, kIdxLabelsMagic);
  const std::size_t count = images.dims[0];
  if (labels.dims[0] != count) {
    throw IngestionError("idx: " + std::to_string(count) + " images but " + std::to_string(labels.dims[0]) +
                         " labels");
  }
  const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];

  LabeledSet set;
  set.num_classes = num_classes;
  set.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int y = labels.bytes[i];
    if (y >= num_classes) {
      throw IngestionError("idx: label " + std::to_string(y) + " at item " + std::to_string(i) + " outside [0, " +
                           std::to_string(num_classes) + ")");
    }
    set.labels.push_back(y);
  }
  set.inputs.resize(static_cast<Index>(count), static_cast<Index>(pixels));
  for (std::size_t k = 0; k < count * pixels; ++k) set.inputs.data()[k] = images.bytes[k] / 255.0;
  return set;
}

void write_idx_images(const std::filesystem::path& path, std::uint32_t rows, std::uint32_t cols,
                      std::span<const std::uint8_t> pixels) {
  if (pixels.size() % (std::size_t{rows} * cols) != 0) throw ContractError("write_idx_images: ragged payload");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(pixels.size() / (std::size_t{rows} * cols)));
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace udil
