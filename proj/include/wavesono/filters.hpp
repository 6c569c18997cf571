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
#include <array>
#include <cmath>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"

namespace wavesono {

/// Separable Gaussian blur, kernel truncated at 3 sigma, edge-replicated. sigma = 0 is the identity.
inline Image gaussian_blur(const Image& in, double sigma) {
  detail::require(sigma >= 0.0, "gaussian_blur: sigma must be non-negative");
  if (sigma == 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;

  const long h = static_cast<long>(in.height()), w = static_cast<long>(in.width());
  Image tmp(in.height(), in.width(), 0.0, in.value_range());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in(r, std::clamp(c + i, 0L, w - 1));
      tmp(r, c) = acc;
    }
  Image out(in.height(), in.width(), 0.0, in.value_range());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(std::clamp(r + i, 0L, h - 1), c);
      out(r, c) = acc;
    }
  return out;
}

/// 4-neighbour Laplacian (centre -4, cross 1) with edge-replicated padding.
inline Image laplacian(const Image& in) {
  const long h = static_cast<long>(in.height()), w = static_cast<long>(in.width());
  Image out(in.height(), in.width(), 0.0, in.value_range());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      const double v = in(r, c);
      out(r, c) = (in(std::max(r - 1, 0L), c) - v) + (in(std::min(r + 1, h - 1), c) - v) +
                  (in(r, std::max(c - 1, 0L)) - v) + (in(r, std::min(c + 1, w - 1)) - v);
    }
  return out;
}

/// Single-level orthonormal 2D Haar subbands, each (H/2) x (W/2).
struct HaarSubbands {
  Image ll, lh, hl, hh;
};

inline HaarSubbands haar_forward(const Image& in) {
  detail::require(in.height() % 2 == 0 && in.width() % 2 == 0,
                  "haar_forward: dimensions must be even (pad the image first)");
  const std::size_t h2 = in.height() / 2, w2 = in.width() / 2;
  HaarSubbands s{Image(h2, w2), Image(h2, w2), Image(h2, w2), Image(h2, w2)};
  for (std::size_t r = 0; r < h2; ++r)
    for (std::size_t c = 0; c < w2; ++c) {
      const double a = in(2 * r, 2 * c), b = in(2 * r, 2 * c + 1);
      const double d = in(2 * r + 1, 2 * c), e = in(2 * r + 1, 2 * c + 1);
      s.ll(r, c) = 0.5 * (a + b + d + e);
      s.lh(r, c) = 0.5 * (a - b + d - e);  // horizontal detail
      s.hl(r, c) = 0.5 * (a + b - d - e);  // vertical detail
      s.hh(r, c) = 0.5 * (a - b - d + e);
    }
  return s;
}

inline Image haar_inverse(const HaarSubbands& s) {
  const std::size_t h2 = s.ll.height(), w2 = s.ll.width();
  Image out(2 * h2, 2 * w2);
  for (std::size_t r = 0; r < h2; ++r)
    for (std::size_t c = 0; c < w2; ++c) {
      const double ll = s.ll(r, c), lh = s.lh(r, c), hl = s.hl(r, c), hh = s.hh(r, c);
      out(2 * r, 2 * c) = 0.5 * (ll + lh + hl + hh);
      out(2 * r, 2 * c + 1) = 0.5 * (ll - lh + hl - hh);
      out(2 * r + 1, 2 * c) = 0.5 * (ll + lh - hl - hh);
      out(2 * r + 1, 2 * c + 1) = 0.5 * (ll - lh - hl + hh);
    }
  return out;
}

/// 2x2 average pooling; odd trailing rows/columns are dropped.
inline Image downsample2(const Image& in) {
  detail::require(in.height() >= 2 && in.width() >= 2, "downsample2: image too small");
  const std::size_t h = in.height() / 2, w = in.width() / 2;
  Image out(h, w, 0.0, in.value_range());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      out(r, c) = 0.25 * (in(2 * r, 2 * c) + in(2 * r, 2 * c + 1) + in(2 * r + 1, 2 * c) + in(2 * r + 1, 2 * c + 1));
  return out;
}

}  // namespace wavesono
