#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scenebench {

using Bytes = std::vector<std::uint8_t>;

/// Opaque image payload plus its SHA-256 digest. Copies share the buffer.
class ImageBlob {
 public:
  ImageBlob() = default;
  explicit ImageBlob(Bytes bytes);
  static ImageBlob from_string(std::string_view bytes);

  std::span<const std::uint8_t> bytes() const noexcept {
    return data_ ? std::span<const std::uint8_t>(*data_) : std::span<const std::uint8_t>();
  }
  std::string_view as_string() const noexcept;
  const std::string& digest() const noexcept { return digest_; }
  bool empty() const noexcept { return !data_ || data_->empty(); }

  /// "image/png", "image/jpeg", "image/webp", "image/gif" by magic bytes,
  /// "application/octet-stream" otherwise.
  std::string_view mime_type() const noexcept;

 private:
  std::shared_ptr<const Bytes> data_;
  std::string digest_;
};

std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws StructuralError on invalid input.
Bytes base64_decode(std::string_view text);

/// Throws Error when the file cannot be read.
ImageBlob read_image_file(const std::filesystem::path& path);
void write_bytes_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

/// Minimal RGB PNG (no filtering, zlib-compressed) with optional tEXt chunks.
Bytes encode_png(int width, int height, std::span<const std::uint8_t> rgb,
                 std::span<const std::pair<std::string, std::string>> text = {});

/// Reads tEXt chunks back out of a PNG; empty when the data is not a PNG.
std::vector<std::pair<std::string, std::string>> png_text_chunks(std::span<const std::uint8_t> png);

}  // namespace scenebench
