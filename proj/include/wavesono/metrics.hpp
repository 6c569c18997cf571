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

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"

namespace wavesono {

/// PSNR reported for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct MetricReport {
  double mse = 0.0;
  double psnr = kPsnrIdentical;
  double ssim = 1.0;
};

/// Window configuration for SSIM: 11x11 Gaussian, sigma 1.5, K1 = 0.01, K2 = 0.03.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

template <typename T>
double mse(const ImageGrid<T>& a, const ImageGrid<T>& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10 log10(L^2 / mse); +inf when mse is zero.
inline double psnr_from_mse(double mse_value, double dynamic_range = 1.0) {
  detail::require(dynamic_range > 0.0, "psnr: dynamic range must be positive");
  if (mse_value <= 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(dynamic_range * dynamic_range / mse_value);
}

template <typename T>
double psnr(const ImageGrid<T>& a, const ImageGrid<T>& b, double dynamic_range = 1.0) {
  return psnr_from_mse(mse(a, b), dynamic_range);
}

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> w(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable correlation: output is (h - k + 1) x (w - k + 1).
inline std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w,
                                        const std::vector<double>& k) {
  const std::size_t ks = k.size();
  const std::size_t oh = h - ks + 1, ow = w - ks + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ks; ++i) acc += k[i] * in[r * w + c + i];
      tmp[r * ow + c] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ks; ++i) acc += k[i] * tmp[(r + i) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

}  // namespace detail

/**
 * Mean structural similarity over all valid positions of a Gaussian window.
 *
 * Stabilizers are C1 = (K1 L)^2 and C2 = (K2 L)^2 with L the dynamic range.
 * Both images must be at least one window in each direction.
 */
template <typename T>
double ssim(const ImageGrid<T>& a, const ImageGrid<T>& b, double dynamic_range = 1.0,
            const SsimParams& params = {}) {
  require_same_shape(a, b, "ssim");
  detail::require(dynamic_range > 0.0, "ssim: dynamic range must be positive");
  const auto k = static_cast<std::size_t>(params.window);
  if (a.height() < k || a.width() < k)
    throw ValidationError("ssim: image smaller than the " + std::to_string(k) + "x" +
                          std::to_string(k) + " window");

  const std::size_t h = a.height(), w = a.width(), n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = static_cast<double>(a[i]);
    y[i] = static_cast<double>(b[i]);
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto g = detail::gaussian_window_1d(params.window, params.sigma);
  const auto mx = detail::filter_valid(x, h, w, g);
  const auto my = detail::filter_valid(y, h, w, g);
  const auto mxx = detail::filter_valid(xx, h, w, g);
  const auto myy = detail::filter_valid(yy, h, w, g);
  const auto mxy = detail::filter_valid(xy, h, w, g);

  const double c1 = std::pow(params.k1 * dynamic_range, 2);
  const double c2 = std::pow(params.k2 * dynamic_range, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mx.size());
}

template <typename T>
MetricReport evaluate_metrics(const ImageGrid<T>& recon, const ImageGrid<T>& truth,
                              double dynamic_range = 1.0) {
  MetricReport r;
  r.mse = mse(recon, truth);
  r.psnr = psnr_from_mse(r.mse, dynamic_range);
  r.ssim = ssim(recon, truth, dynamic_range);
  return r;
}

}  // namespace wavesono
