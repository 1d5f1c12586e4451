#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsf::io {

// Little-endian serializer into an in-memory buffer.
class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void i32(std::int32_t v);
  void f32(float v);
  void f32s(std::span<const float> values);
  void bytes(std::span<const std::uint8_t> raw);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

// Little-endian reader over a byte span. Every read is bounds-checked and a
// short read raises FormatError with the offset where data ran out.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void expect_magic(std::string_view tag, std::string_view what);
  std::uint32_t u32();
  std::int32_t i32();
  float f32();
  void f32s(std::span<float> out);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  // Raises FormatError if unread bytes remain.
  void expect_end(std::string_view what) const;

 private:
  void need(std::size_t n, std::string_view what) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// partially written file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Binary portable graymap (P5, maxval 255) of a row-major 8-bit image.
std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width, std::span<const std::uint8_t> gray);

struct GrayImage8 {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage8 decode_pgm(std::span<const std::uint8_t> data);

// Lowercase hex SHA-256 of a byte range / string.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

}  // namespace tsf::io
