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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "wavesono/errors.hpp"
#include "wavesono/filters.hpp"
#include "wavesono/image_grid.hpp"
#include "wavesono/rng.hpp"

namespace wavesono {

enum class PhantomKind { two_inclusion, layered, breast_like };

inline PhantomKind parse_phantom_kind(std::string_view s) {
  if (s == "two-inclusion") return PhantomKind::two_inclusion;
  if (s == "layered") return PhantomKind::layered;
  if (s == "breast-like") return PhantomKind::breast_like;
  throw ValidationError("unknown phantom kind '" + std::string(s) + "'");
}

inline const char* to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::two_inclusion: return "two-inclusion";
    case PhantomKind::layered: return "layered";
    case PhantomKind::breast_like: return "breast-like";
  }
  return "?";
}

/// Speed-of-sound phantoms carry m/s; the breast-like phantom is an intensity image in [0,1].
inline bool phantom_is_speed(PhantomKind k) { return k != PhantomKind::breast_like; }

namespace detail {

inline bool in_ellipse(double r, double c, double cr, double cc, double ar, double ac, double angle = 0.0) {
  const double dr = r - cr, dc = c - cc;
  const double u = dc * std::cos(angle) + dr * std::sin(angle);
  const double v = -dc * std::sin(angle) + dr * std::cos(angle);
  return (u * u) / (ac * ac) + (v * v) / (ar * ar) <= 1.0;
}

}  // namespace detail

// Background 1500 m/s; discs of radius 0.12 size at (0.5, 0.32) -> 1450 m/s and (0.5, 0.68) -> 1600 m/s.
inline Image two_inclusion_phantom(std::size_t size) {
  detail::require(size >= 32, "phantom: size must be >= 32");
  Image g(size, size, 1500.0);
  const double n = static_cast<double>(size), rad = 0.12 * n;
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      if (detail::in_ellipse(r, c, 0.5 * n, 0.32 * n, rad, rad)) g(r, c) = 1450.0;
      if (detail::in_ellipse(r, c, 0.5 * n, 0.68 * n, rad, rad)) g(r, c) = 1600.0;
    }
  return g;
}

// Four horizontal layers (1480, 1520, 1560, 1500 m/s) with seeded sinusoidal interfaces.
inline Image layered_phantom(std::size_t size, std::uint64_t seed) {
  detail::require(size >= 32, "phantom: size must be >= 32");
  Rng rng(seed);
  const double speeds[4] = {1480.0, 1520.0, 1560.0, 1500.0};
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(0.01, 0.04);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double n = static_cast<double>(size);
  Image g(size, size, speeds[0]);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      const double y = r / n, x = c / n;
      int layer = 0;
      for (int k = 0; k < 3; ++k)
        if (y > 0.25 * (k + 1) + amp[k] * std::sin(2.0 * std::numbers::pi * x + phase[k])) layer = k + 1;
      g(r, c) = speeds[layer];
    }
  return g;
}

/**
 * Water-coupled breast-like intensity phantom.
 *
 * Levels follow the default tissue table under the default HU window:
 * water background 0.50, fatty breast 0.45, glandular blobs 0.52, one lesion
 * 0.545, plus seeded texture noise (sigma 0.002).
 */
inline Image breast_like_phantom(std::size_t size, std::uint64_t seed) {
  detail::require(size >= 32, "phantom: size must be >= 32");
  Rng rng(seed);
  const double n = static_cast<double>(size);
  Image g(size, size, 0.50);
  const double br = 0.5 * n, bc = 0.5 * n, ar = 0.40 * n, ac = 0.34 * n;

  struct Blob {
    double r, c, ar, ac, angle;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < 6; ++k)
    blobs.push_back({br + rng.uniform(-0.22, 0.22) * n, bc + rng.uniform(-0.18, 0.18) * n,
                     rng.uniform(0.05, 0.10) * n, rng.uniform(0.04, 0.08) * n,
                     rng.uniform(0.0, std::numbers::pi)});
  const double lr = br + rng.uniform(-0.15, 0.15) * n, lc = bc + rng.uniform(-0.12, 0.12) * n;
  const double lrad = 0.06 * n;

  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) {
      if (!detail::in_ellipse(r, c, br, bc, ar, ac)) continue;
      double v = 0.45;
      for (const auto& b : blobs)
        if (detail::in_ellipse(r, c, b.r, b.c, b.ar, b.ac, b.angle)) v = 0.52;
      if (detail::in_ellipse(r, c, lr, lc, lrad, lrad)) v = 0.545;
      g(r, c) = v;
    }
  for (auto& v : g) v = std::clamp(v + 0.002 * rng.normal(), 0.0, 1.0);
  return g;
}

inline Image make_phantom(PhantomKind kind, std::size_t size, std::uint64_t seed) {
  switch (kind) {
    case PhantomKind::two_inclusion: return two_inclusion_phantom(size);
    case PhantomKind::layered: return layered_phantom(size, seed);
    case PhantomKind::breast_like: return breast_like_phantom(size, seed);
  }
  throw ValidationError("unknown phantom kind");
}

/// Fully developed speckle stand-in for a real ultrasound frame (Rayleigh amplitudes, light blur).
inline Image speckle_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  Image g(height, width);
  for (auto& v : g) {
    const double x = rng.normal(), y = rng.normal();
    v = 0.3 * std::sqrt(x * x + y * y);
  }
  return clamp(gaussian_blur(g, 0.7), 0.0, 1.0);
}

}  // namespace wavesono
