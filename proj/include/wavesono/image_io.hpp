/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The wavesono authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"

namespace wavesono {

enum class ImageFormat { pgm8, png8_gray, f32_raw };

inline constexpr std::string_view kF32Magic = "WSG1\n";
inline constexpr std::uint32_t kMaxSide = 1u << 16;

inline const char* to_string(ImageFormat f) {
  switch (f) {
    case ImageFormat::pgm8: return "pgm8";
    case ImageFormat::png8_gray: return "png8-gray";
    case ImageFormat::f32_raw: return "f32-raw";
  }
  return "?";
}

inline ImageFormat parse_image_format(std::string_view name) {
  if (name == "pgm8" || name == "pgm") return ImageFormat::pgm8;
  if (name == "png8-gray" || name == "png") return ImageFormat::png8_gray;
  if (name == "f32-raw" || name == "f32") return ImageFormat::f32_raw;
  throw ValidationError("unknown image format '" + std::string(name) + "'");
}

/// Guess the format from the file extension (.pgm, .png, .f32/.raw).
inline ImageFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (ext == ".pgm") return ImageFormat::pgm8;
  if (ext == ".png") return ImageFormat::png8_gray;
  if (ext == ".f32" || ext == ".raw") return ImageFormat::f32_raw;
  throw ValidationError("cannot infer image format from extension of " + path.string());
}

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for " + path.string());
}

inline std::uint8_t quantize8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline void check_dims(std::uint64_t h, std::uint64_t w, const std::string& where) {
  if (h == 0 || w == 0) throw ValidationError(where + ": zero dimension");
  if (h > kMaxSide || w > kMaxSide)
    throw ValidationError(where + ": dimension exceeds 65536 per side");
}

// Skips whitespace and '#' comments in a PGM header.
inline std::size_t pgm_skip(const std::vector<unsigned char>& b, std::size_t pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  return pos;
}

inline std::uint64_t pgm_number(const std::vector<unsigned char>& b, std::size_t& pos,
                                const std::string& where) {
  pos = pgm_skip(b, pos);
  if (pos >= b.size() || !std::isdigit(b[pos])) throw ValidationError(where + ": malformed PGM header");
  std::uint64_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > (1ull << 32)) throw ValidationError(where + ": dimension exceeds 65536 per side");
    ++pos;
  }
  return v;
}

inline Image load_pgm8(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  const auto where = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ValidationError(where + ": not a binary PGM (P5)");
  std::size_t pos = 2;
  auto w = pgm_number(bytes, pos, where);
  auto h = pgm_number(bytes, pos, where);
  auto maxval = pgm_number(bytes, pos, where);
  check_dims(h, w, where);
  if (maxval != 255) throw ValidationError(where + ": only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ValidationError(where + ": malformed PGM header");
  ++pos;
  if (bytes.size() - pos < h * w) throw ValidationError(where + ": truncated PGM payload");
  Image g(h, w);
  for (std::size_t i = 0; i < h * w; ++i) g[i] = bytes[pos + i] / 255.0;
  return g;
}

inline void save_pgm8(const Image& g, const std::filesystem::path& path) {
  std::string header = "P5\n" + std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + g.size());
  for (double v : g) bytes.push_back(quantize8(v));
  write_file_bytes(path, bytes);
}

inline Image load_png8(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("cannot open " + path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw ValidationError(path.string() + ": " + image.message);
  try {
    check_dims(image.height, image.width, path.string());
  } catch (...) {
    png_image_free(&image);
    throw;
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError(path.string() + ": " + msg);
  }
  Image g(image.height, image.width);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = buffer[i] / 255.0;
  return g;
}

inline void save_png8(const Image& g, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(g.width());
  image.height = static_cast<png_uint_32>(g.height());
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) buffer[i] = quantize8(g[i]);
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError("cannot write " + path.string() + ": " + msg);
  }
}

inline Image load_f32(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  const auto where = path.string();
  const std::size_t header = kF32Magic.size() + 8;
  if (bytes.size() < header || std::memcmp(bytes.data(), kF32Magic.data(), kF32Magic.size()) != 0)
    throw ValidationError(where + ": missing WSG1 magic");
  const std::uint32_t h = get_u32le(bytes.data() + kF32Magic.size());
  const std::uint32_t w = get_u32le(bytes.data() + kF32Magic.size() + 4);
  check_dims(h, w, where);
  const std::size_t n = std::size_t(h) * w;
  if (bytes.size() != header + 4 * n)
    throw ValidationError(where + ": payload size does not match header dimensions");
  Image g(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    auto bits = get_u32le(bytes.data() + header + 4 * i);
    g[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return g;
}

inline void save_f32(const Image& g, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(kF32Magic.begin(), kF32Magic.end());
  bytes.reserve(kF32Magic.size() + 8 + 4 * g.size());
  put_u32le(bytes, static_cast<std::uint32_t>(g.height()));
  put_u32le(bytes, static_cast<std::uint32_t>(g.width()));
  for (double v : g) put_u32le(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file_bytes(path, bytes);
}

}  // namespace detail

/// Load a grayscale image. 8-bit formats map to v/255; f32-raw is read verbatim.
inline Image load_image(const std::filesystem::path& path, ImageFormat format) {
  switch (format) {
    case ImageFormat::pgm8: return detail::load_pgm8(path);
    case ImageFormat::png8_gray: return detail::load_png8(path);
    case ImageFormat::f32_raw: return detail::load_f32(path);
  }
  throw ValidationError("unsupported format");
}

inline Image load_image(const std::filesystem::path& path) {
  return load_image(path, format_from_path(path));
}

/// Save a grayscale image. 8-bit formats clamp to [0,1] and quantize round(v*255), half up.
inline void save_image(const Image& grid, const std::filesystem::path& path, ImageFormat format) {
  detail::require(!grid.empty(), "save_image: empty grid");
  detail::check_dims(grid.height(), grid.width(), path.string());
  switch (format) {
    case ImageFormat::pgm8: return detail::save_pgm8(grid, path);
    case ImageFormat::png8_gray: return detail::save_png8(grid, path);
    case ImageFormat::f32_raw: return detail::save_f32(grid, path);
  }
}

inline void save_image(const Image& grid, const std::filesystem::path& path) {
  save_image(grid, path, format_from_path(path));
}

}  // namespace wavesono
