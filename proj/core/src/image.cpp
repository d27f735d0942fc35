#include "scenebench/image.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <zlib.h>

#include "scenebench/errors.hpp"

namespace scenebench {

ImageBlob::ImageBlob(Bytes bytes)
    : data_(std::make_shared<const Bytes>(std::move(bytes))), digest_(sha256_hex(*data_)) {}

ImageBlob ImageBlob::from_string(std::string_view bytes) {
  return ImageBlob(Bytes(bytes.begin(), bytes.end()));
}

std::string_view ImageBlob::as_string() const noexcept {
  if (!data_) return {};
  return {reinterpret_cast<const char*>(data_->data()), data_->size()};
}

std::string_view ImageBlob::mime_type() const noexcept {
  auto b = bytes();
  auto starts = [&](std::initializer_list<std::uint8_t> sig) {
    return b.size() >= sig.size() && std::equal(sig.begin(), sig.end(), b.begin());
  };
  if (starts({0x89, 'P', 'N', 'G'})) return "image/png";
  if (starts({0xFF, 0xD8, 0xFF})) return "image/jpeg";
  if (starts({'G', 'I', 'F', '8'})) return "image/gif";
  if (b.size() >= 12 && starts({'R', 'I', 'F', 'F'}) && std::memcmp(b.data() + 8, "WEBP", 4) == 0) {
    return "image/webp";
  }
  return "application/octet-stream";
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
  SHA256(data.data(), data.size(), md.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(md.size() * 2);
  for (unsigned char c : md) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
  }
  if (clean.size() % 4 != 0) {
    throw StructuralError("base64 payload length is not a multiple of 4");
  }
  Bytes out(3 * clean.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                          static_cast<int>(clean.size()));
  if (n < 0) throw StructuralError("invalid base64 payload");
  // EVP_DecodeBlock keeps the padding bytes as zeros.
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

ImageBlob read_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read image " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ImageBlob(std::move(data));
}

void write_bytes_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

// ---------------------------------------------------------------------------
// PNG

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_chunk(Bytes& out, const char type[4], std::span<const std::uint8_t> payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

}  // namespace

Bytes encode_png(int width, int height, std::span<const std::uint8_t> rgb,
                 std::span<const std::pair<std::string, std::string>> text) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw DomainError("encode_png: pixel buffer does not match dimensions");
  }
  Bytes out(std::begin(kPngSignature), std::end(kPngSignature));

  Bytes ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
  put_chunk(out, "IHDR", ihdr);

  for (const auto& [key, value] : text) {
    Bytes payload(key.begin(), key.end());
    payload.push_back(0);
    payload.insert(payload.end(), value.begin(), value.end());
    put_chunk(out, "tEXt", payload);
  }

  Bytes raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + static_cast<std::size_t>(width) * 3));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    auto row = rgb.subspan(static_cast<std::size_t>(y) * width * 3, static_cast<std::size_t>(width) * 3);
    raw.insert(raw.end(), row.begin(), row.end());
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  Bytes packed(packed_size);
  if (compress(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size())) != Z_OK) {
    throw Error("encode_png: zlib compression failed");
  }
  packed.resize(packed_size);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

std::vector<std::pair<std::string, std::string>> png_text_chunks(std::span<const std::uint8_t> png) {
  std::vector<std::pair<std::string, std::string>> out;
  if (png.size() < 8 || !std::equal(std::begin(kPngSignature), std::end(kPngSignature), png.begin())) {
    return out;
  }
  std::size_t pos = 8;
  while (pos + 12 <= png.size()) {
    std::uint32_t len = get_u32(png.data() + pos);
    if (pos + 12 + len > png.size()) break;
    std::string_view type(reinterpret_cast<const char*>(png.data() + pos + 4), 4);
    if (type == "tEXt") {
      std::string_view payload(reinterpret_cast<const char*>(png.data() + pos + 8), len);
      auto nul = payload.find('\0');
      if (nul != std::string_view::npos) {
        out.emplace_back(std::string(payload.substr(0, nul)), std::string(payload.substr(nul + 1)));
      }
    }
    if (type == "IEND") break;
    pos += 12 + len;
  }
  return out;
}

}  // namespace scenebench
