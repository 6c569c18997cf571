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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"
#include "wavesono/parallel.hpp"
#include "wavesono/rng.hpp"

namespace wavesono {

using Complex = std::complex<double>;
using Spectrum = ImageGrid<Complex>;

namespace detail {

// FFTW planning is not thread-safe; execution with a private plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline void fft2_inplace(Spectrum& data, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.values().data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(data.height()), static_cast<int>(data.width()), ptr, ptr, sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

// Offset of unshifted frequency index k from the centre of the shifted spectrum.
inline long centered_offset(std::size_t k, std::size_t n) {
  const std::size_t half = n / 2;
  return static_cast<long>((k + half) % n) - static_cast<long>(half);
}

}  // namespace detail

/// Forward 2D DFT, unnormalized.
inline Spectrum fft2(const Image& grid) {
  detail::require(grid.height() >= 2 && grid.width() >= 2, "fft2: image must be at least 2x2");
  Spectrum s(grid.height(), grid.width());
  for (std::size_t i = 0; i < grid.size(); ++i) s[i] = Complex(grid[i], 0.0);
  detail::fft2_inplace(s, FFTW_FORWARD);
  return s;
}

/// Inverse 2D DFT with the 1/(HW) factor, complex result.
inline Spectrum ifft2_complex(const Spectrum& spectrum) {
  Spectrum s = spectrum;
  detail::fft2_inplace(s, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(s.size());
  for (auto& v : s) v *= scale;
  return s;
}

/// Inverse 2D DFT keeping the real part.
inline Image ifft2(const Spectrum& spectrum) {
  const Spectrum s = ifft2_complex(spectrum);
  Image out(s.height(), s.width());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i].real();
  return out;
}

/// Moves DC to (H/2, W/2).
template <typename T>
ImageGrid<T> fftshift(const ImageGrid<T>& in) {
  ImageGrid<T> out(in.height(), in.width());
  const std::size_t h = in.height(), w = in.width();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) out((r + h / 2) % h, (c + w / 2) % w) = in(r, c);
  return out;
}

template <typename T>
ImageGrid<T> ifftshift(const ImageGrid<T>& in) {
  ImageGrid<T> out(in.height(), in.width());
  const std::size_t h = in.height(), w = in.width();
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = in((r + h / 2) % h, (c + w / 2) % w);
  return out;
}

/**
 * Centred square low band of the shifted spectrum.
 *
 * Half-width is floor(beta * min(H, W) / 2), so the square has side 2h + 1
 * (clipped to the spectrum) and always contains DC. `mask` is stored in the
 * centred layout; is_low() answers for unshifted FFT indices.
 */
struct SpectralBandMask {
  double beta = 0.0;
  std::size_t height = 0, width = 0;
  long half_width = 0;
  ImageGrid<std::uint8_t> mask;  // centred layout, 1 = low band (kept from source)

  SpectralBandMask(double beta_, std::size_t h, std::size_t w) : beta(beta_), height(h), width(w) {
    detail::require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1], got " + std::to_string(beta));
    detail::require(h >= 2 && w >= 2, "spectral mask: image must be at least 2x2");
    half_width = static_cast<long>(std::floor(beta * static_cast<double>(std::min(h, w)) / 2.0));
    mask = ImageGrid<std::uint8_t>(h, w, 0);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        mask((r + h / 2) % h, (c + w / 2) % w) = is_low(r, c) ? 1 : 0;
  }

  bool is_low(std::size_t kr, std::size_t kc) const {
    return std::abs(detail::centered_offset(kr, height)) <= half_width &&
           std::abs(detail::centered_offset(kc, width)) <= half_width;
  }

  std::size_t low_count() const {
    std::size_t n = 0;
    for (auto v : mask) n += v;
    return n;
  }
};

enum class SwapMode { amplitude, complex };

inline const char* to_string(SwapMode m) { return m == SwapMode::amplitude ? "amplitude" : "complex"; }

inline SwapMode parse_swap_mode(std::string_view s) {
  if (s == "amplitude") return SwapMode::amplitude;
  if (s == "complex") return SwapMode::complex;
  throw ValidationError("unknown swap mode '" + std::string(s) + "'");
}

/**
 * Spliced spectrum: low band from the source, high band from the target.
 * Amplitude mode takes only the target's magnitude and keeps the source phase.
 */
inline Spectrum splice_spectra(const Spectrum& source, const Spectrum& target, const SpectralBandMask& mask,
                               SwapMode mode) {
  require_same_shape(source, target, "spectral_swap");
  Spectrum out(source.height(), source.width());
  for (std::size_t r = 0; r < source.height(); ++r)
    for (std::size_t c = 0; c < source.width(); ++c) {
      const Complex s = source(r, c), t = target(r, c);
      if (mask.is_low(r, c)) {
        out(r, c) = s;
      } else if (mode == SwapMode::complex) {
        out(r, c) = t;
      } else {
        const double mag = std::abs(s);
        out(r, c) = mag > 0.0 ? s * (std::abs(t) / mag) : Complex(std::abs(t), 0.0);
      }
    }
  return out;
}

/// Spectral transfer before the final clamp.
inline Image spectral_swap_unclamped(const Image& source, const Image& target, double beta, SwapMode mode) {
  require_same_shape(source, target, "spectral_swap");
  const SpectralBandMask mask(beta, source.height(), source.width());
  return ifft2(splice_spectra(fft2(source), fft2(target), mask, mode));
}

/// Replace the high band of `source` with that of `target`; result clamped to [0, 1].
inline Image spectral_swap(const Image& source, const Image& target, double beta,
                           SwapMode mode = SwapMode::amplitude) {
  return clamp(spectral_swap_unclamped(source, target, beta, mode), 0.0, 1.0);
}

enum class Pairing { random_seeded, index };

inline Pairing parse_pairing(std::string_view s) {
  if (s == "random" || s == "random-seeded") return Pairing::random_seeded;
  if (s == "index") return Pairing::index;
  throw ValidationError("unknown pairing '" + std::string(s) + "'");
}

/// Target chosen for each source: i mod T for index pairing, seeded draws otherwise.
inline std::vector<std::size_t> pair_targets(std::size_t num_sources, std::size_t num_targets, Pairing pairing,
                                             std::uint64_t seed) {
  detail::require(num_targets > 0, "adapt: empty target set");
  std::vector<std::size_t> out(num_sources);
  Rng rng(seed);
  for (std::size_t i = 0; i < num_sources; ++i)
    out[i] = pairing == Pairing::index ? i % num_targets : rng.index(num_targets);
  return out;
}

struct AdaptedImage {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  double beta = 0.0;
  Image image;
};

/**
 * Adapts every source against its paired target for each beta.
 * Output order is source-major: (source 0, beta 0), (source 0, beta 1), ...
 */
inline std::vector<AdaptedImage> adapt_batch(const std::vector<Image>& sources, const std::vector<Image>& targets,
                                             const std::vector<double>& betas, SwapMode mode, Pairing pairing,
                                             std::uint64_t seed = 0, unsigned threads = 0) {
  detail::require(!targets.empty(), "adapt: empty target set");
  detail::require(!betas.empty(), "adapt: no beta values");
  for (double b : betas) detail::require(b >= 0.0 && b <= 1.0, "adapt: beta outside [0, 1]");
  const auto pairs = pair_targets(sources.size(), targets.size(), pairing, seed);
  std::vector<AdaptedImage> out(sources.size() * betas.size());
  parallel_for(
      sources.size(),
      [&](std::size_t i) {
        const Image& src = sources[i];
        const Image& tgt = targets[pairs[i]];
        require_same_shape(src, tgt, "adapt");
        const auto s = fft2(src);
        const auto t = fft2(tgt);
        for (std::size_t b = 0; b < betas.size(); ++b) {
          const SpectralBandMask mask(betas[b], src.height(), src.width());
          out[i * betas.size() + b] = {i, pairs[i], betas[b], clamp(ifft2(splice_spectra(s, t, mask, mode)), 0.0, 1.0)};
        }
      },
      threads);
  return out;
}

inline std::vector<AdaptedImage> adapt_batch(const std::vector<Image>& sources, const std::vector<Image>& targets,
                                             double beta, SwapMode mode, Pairing pairing, std::uint64_t seed = 0) {
  return adapt_batch(sources, targets, std::vector<double>{beta}, mode, pairing, seed);
}

}  // namespace wavesono
