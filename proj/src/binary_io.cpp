#include "tsf/binary_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "tsf/errors.hpp"

namespace tsf::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void ByteWriter::magic(std::string_view tag) {
  buf_.insert(buf_.end(), tag.begin(), tag.end());
}

void ByteWriter::u32(std::uint32_t v) {
  const std::uint32_t le = to_le(v);
  std::uint8_t raw[4];
  std::memcpy(raw, &le, 4);
  buf_.insert(buf_.end(), raw, raw + 4);
}

void ByteWriter::i32(std::int32_t v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> values) {
  buf_.reserve(buf_.size() + values.size() * 4);
  for (float v : values) f32(v);
}

void ByteWriter::bytes(std::span<const std::uint8_t> raw) {
  buf_.insert(buf_.end(), raw.begin(), raw.end());
}

void ByteReader::need(std::size_t n, std::string_view what) const {
  if (remaining() < n) {
    throw FormatError("truncated data: expected " + std::to_string(n) + " more bytes for " +
                          std::string(what),
                      data_.size());
  }
}

void ByteReader::expect_magic(std::string_view tag, std::string_view what) {
  need(tag.size(), what);
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    throw FormatError("bad magic for " + std::string(what), pos_);
  }
  pos_ += tag.size();
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return to_le(v);
}

std::int32_t ByteReader::i32() { return std::bit_cast<std::int32_t>(u32()); }

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

void ByteReader::f32s(std::span<float> out) {
  need(out.size() * 4, "float payload");
  for (float& v : out) v = f32();
}

void ByteReader::expect_end(std::string_view what) const {
  if (remaining() != 0) {
    throw FormatError("trailing bytes after " + std::string(what), pos_);
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  auto raw = read_file(path);
  return {raw.begin(), raw.end()};
}

std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width, std::span<const std::uint8_t> gray) {
  if (gray.size() != height * width) throw ShapeError("pgm pixel count does not match dims");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), gray.begin(), gray.end());
  return out;
}

GrayImage8 decode_pgm(std::span<const std::uint8_t> data) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size() && std::isspace(data[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(data[pos])) ++pos;
    if (start == pos) throw FormatError("truncated pgm header", pos);
    return std::string(data.begin() + static_cast<std::ptrdiff_t>(start), data.begin() + static_cast<std::ptrdiff_t>(pos));
  };
  if (token() != "P5") throw FormatError("not a binary pgm", 0);
  GrayImage8 img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") throw FormatError("unsupported pgm maxval", pos);
  } catch (const std::logic_error&) {
    throw FormatError("bad pgm header", pos);
  }
  ++pos;
  if (data.size() - std::min(pos, data.size()) != img.width * img.height) throw FormatError("pgm size mismatch", pos);
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end());
  return img;
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace tsf::io
