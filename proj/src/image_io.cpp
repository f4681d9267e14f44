#include "napkit/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "napkit/error.hpp"

namespace napkit {

namespace fs = std::filesystem;

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) fail(ErrorKind::EmptyImage, "cannot encode an empty image");
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  switch (img.channels()) {
    case 1: desc.format = PNG_FORMAT_GRAY; break;
    case 3: desc.format = PNG_FORMAT_RGB; break;
    case 4: desc.format = PNG_FORMAT_RGBA; break;
    default: fail(ErrorKind::InvalidArgument, "PNG encode supports 1, 3 or 4 channels");
  }
  const auto bytes = img.to_bytes();
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    fail(ErrorKind::IoError, std::string("PNG encode failed: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    fail(ErrorKind::IoError, std::string("PNG encode failed: ") + desc.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    fail(ErrorKind::ParseError, std::string("PNG decode failed: ") + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&desc);
    fail(ErrorKind::ParseError, std::string("PNG decode failed: ") + desc.message);
  }
  return Image::from_bytes(static_cast<int>(desc.width), static_cast<int>(desc.height), 3, raw);
}

namespace {

Image decode_ppm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char ch = static_cast<char>(bytes[pos]);
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos;
      } else {
        break;
      }
    }
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  if (next_token() != "P6") fail(ErrorKind::ParseError, "not a binary PPM: " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "malformed PPM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    fail(ErrorKind::ParseError, "unsupported PPM (need 8-bit): " + path.string());
  }
  ++pos;  // single whitespace before raster
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() < pos + need) fail(ErrorKind::ParseError, "truncated PPM: " + path.string());
  return Image::from_bytes(w, h, 3, std::span(bytes).subspan(pos, need));
}

}  // namespace

Image read_image(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  auto ext = path.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".ppm") return decode_ppm(bytes, path);
  try {
    return decode_png(bytes);
  } catch (const Error& e) {
    fail(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

void write_png(const fs::path& path, const Image& img) {
  write_file_bytes(path, encode_png(img));
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace napkit
