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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wavesono/errors.hpp"

namespace wavesono {

/**
 * Dense row-major 2D scalar field.
 *
 * Carries pixel intensities, speed-of-sound maps, HU maps and gradients alike.
 * `value_range` is the declared dynamic range L used by PSNR/SSIM.
 */
template <typename T = double>
class ImageGrid {
 public:
  using value_type = T;

  ImageGrid() = default;

  ImageGrid(std::size_t height, std::size_t width, T fill = T{}, double value_range = 1.0)
      : height_(height), width_(width), value_range_(value_range), data_(height * width, fill) {
    detail::require(height > 0 && width > 0, "ImageGrid: dimensions must be positive");
  }

  ImageGrid(std::size_t height, std::size_t width, std::vector<T> data, double value_range = 1.0)
      : height_(height), width_(width), value_range_(value_range), data_(std::move(data)) {
    detail::require(height > 0 && width > 0, "ImageGrid: dimensions must be positive");
    detail::require(data_.size() == height * width,
                    "ImageGrid: data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(height) + "x" + std::to_string(width));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double value_range() const noexcept { return value_range_; }
  void set_value_range(double range) { value_range_ = range; }

  T& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const ImageGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  T min() const { return *std::min_element(data_.begin(), data_.end()); }
  T max() const { return *std::max_element(data_.begin(), data_.end()); }

  double mean() const {
    double acc = 0.0;
    for (T v : data_) acc += static_cast<double>(v);
    return acc / static_cast<double>(data_.size());
  }

  template <typename F>
  ImageGrid map(F&& f) const {
    ImageGrid out(*this);
    for (auto& v : out.data_) v = f(v);
    return out;
  }

  friend bool operator==(const ImageGrid& a, const ImageGrid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  double value_range_ = 1.0;
  std::vector<T> data_;
};

using Image = ImageGrid<double>;

template <typename T>
void require_same_shape(const ImageGrid<T>& a, const ImageGrid<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                          std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
  }
}

/// Clamp every value into [lo, hi].
template <typename T>
ImageGrid<T> clamp(const ImageGrid<T>& g, T lo, T hi) {
  return g.map([=](T v) { return std::clamp(v, lo, hi); });
}

/// Affine rescale of [lo, hi] onto [0, 1], clamped.
template <typename T>
ImageGrid<T> normalize(const ImageGrid<T>& g, T lo, T hi) {
  detail::require(hi > lo, "normalize: hi must exceed lo");
  return g.map([=](T v) { return std::clamp((v - lo) / (hi - lo), T{0}, T{1}); });
}

}  // namespace wavesono
