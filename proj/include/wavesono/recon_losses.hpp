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
#include <functional>
#include <span>
#include <string>

#include "wavesono/errors.hpp"
#include "wavesono/filters.hpp"
#include "wavesono/image_grid.hpp"

namespace wavesono {

/// Generator-loss weights: perceptual, L1, adversarial.
struct LossWeights {
  double alpha1 = 0.0;
  double alpha2 = 10.0;
  double alpha3 = 1.0;

  void validate() const {
    for (double a : {alpha1, alpha2, alpha3})
      detail::require(std::isfinite(a) && a >= 0.0, "loss weights must be finite and non-negative");
  }
};

struct LossReport {
  double l1 = 0.0;
  double laplacian = 0.0;
  double wavelet = 0.0;
  double adversarial = 0.0;
  double perceptual = 0.0;
  double total = 0.0;
};

inline constexpr double kLogClamp = 1e-7;

inline double l1_loss(const Image& a, const Image& b) {
  require_same_shape(a, b, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

/// L1 between 4-neighbour Laplacians (edge-replicated).
inline double laplacian_loss(const Image& recon, const Image& truth) {
  require_same_shape(recon, truth, "laplacian_loss");
  return l1_loss(laplacian(recon), laplacian(truth));
}

/// Mean over the four single-level orthonormal Haar subbands of the per-band L1.
inline double wavelet_loss(const Image& recon, const Image& truth) {
  require_same_shape(recon, truth, "wavelet_loss");
  const auto a = haar_forward(recon);
  const auto b = haar_forward(truth);
  return 0.25 * (l1_loss(a.ll, b.ll) + l1_loss(a.lh, b.lh) + l1_loss(a.hl, b.hl) + l1_loss(a.hh, b.hh));
}

/// Stand-in for a feature-network loss: mean L1 over the image and three 2x2-pooled levels.
inline double pyramid_l1_loss(const Image& recon, const Image& truth) {
  require_same_shape(recon, truth, "pyramid_l1_loss");
  Image a = recon, b = truth;
  double acc = l1_loss(a, b);
  int levels = 1;
  for (int k = 0; k < 3 && a.height() >= 2 && a.width() >= 2; ++k, ++levels) {
    a = downsample2(a);
    b = downsample2(b);
    acc += l1_loss(a, b);
  }
  return acc / levels;
}

/// Pluggable perceptual slot of the generator loss.
using PerceptualLoss = std::function<double(const Image& recon, const Image& truth)>;

inline PerceptualLoss perceptual_slot(std::string_view name) {
  if (name == "pyramid" || name == "perceptual") return pyramid_l1_loss;
  if (name == "laplacian") return laplacian_loss;
  if (name == "wavelet") return wavelet_loss;
  if (name == "none") return [](const Image&, const Image&) { return 0.0; };
  throw ValidationError("unknown perceptual slot '" + std::string(name) + "'");
}

/**
 * Adversarial value mean log D(x) + mean log(1 - D(G(z))).
 * Probabilities are clamped into [eps, 1 - eps] with eps = 1e-7.
 */
inline double adversarial_value(std::span<const double> d_real, std::span<const double> d_fake) {
  detail::require(!d_real.empty() && !d_fake.empty(), "adversarial_value: empty discriminator outputs");
  auto cl = [](double p) { return std::clamp(p, kLogClamp, 1.0 - kLogClamp); };
  double real = 0.0, fake = 0.0;
  for (double p : d_real) real += std::log(cl(p));
  for (double p : d_fake) fake += std::log(1.0 - cl(p));
  return real / static_cast<double>(d_real.size()) + fake / static_cast<double>(d_fake.size());
}

/// alpha1 * perceptual + alpha2 * l1 + alpha3 * adversarial.
inline double generator_loss(double perceptual, double l1, double adversarial, const LossWeights& w) {
  w.validate();
  return w.alpha1 * perceptual + w.alpha2 * l1 + w.alpha3 * adversarial;
}

/// Every deterministic loss for an image pair; `adversarial` is supplied by the caller.
inline LossReport loss_report(const Image& recon, const Image& truth, const LossWeights& weights,
                              const PerceptualLoss& perceptual = pyramid_l1_loss, double adversarial = 0.0) {
  LossReport r;
  r.l1 = l1_loss(recon, truth);
  r.laplacian = laplacian_loss(recon, truth);
  r.wavelet = (recon.height() % 2 == 0 && recon.width() % 2 == 0) ? wavelet_loss(recon, truth)
                                                                   : std::nan("");
  r.perceptual = perceptual(recon, truth);
  r.adversarial = adversarial;
  r.total = generator_loss(r.perceptual, r.l1, r.adversarial, weights);
  return r;
}

}  // namespace wavesono
