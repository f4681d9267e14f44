#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "napkit/image.hpp"

namespace napkit {

/// PNG encode of the 8-bit quantization; gray, RGB and RGBA supported.
std::vector<std::uint8_t> encode_png(const Image& img);
/// Decodes to RGB regardless of the stored color type.
Image decode_png(std::span<const std::uint8_t> bytes);

/// Reads .png or binary .ppm (P6) files as RGB.
Image read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace napkit
