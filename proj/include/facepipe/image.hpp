#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

namespace facepipe {

using Image = cv::Mat; // 8-bit BGR throughout

/// Decodes a file from disk; throws IoError naming the path on failure.
Image load_image(const std::filesystem::path& path);

Image decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Image& image);

void save_png(const std::filesystem::path& path, const Image& image);

/// "png", "jpeg" or "bin" from magic bytes; used to pick file extensions for
/// payloads returned by image services.
std::string sniff_image_format(std::span<const std::uint8_t> bytes);

/// Tiny solid-color placeholder used by the synthetic corpus writer.
Image solid_color_image(int width, int height, std::uint8_t b, std::uint8_t g, std::uint8_t r);

} // namespace facepipe
