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
#include <limits>
#include <span>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/filters.hpp"
#include "wavesono/image_grid.hpp"
#include "wavesono/parallel.hpp"
#include "wavesono/wave_solver.hpp"

namespace wavesono {

struct FwiConfig {
  std::size_t num_iterations = 10;
  double step_size = 0.005;             // max relative change of m per iteration
  double init_blur_sigma = 8.0;         // pixels
  double gradient_smoothing_sigma = 0.0;// pixels, 0 disables
  double min_speed = 1400.0;            // m/s
  double max_speed = 1700.0;            // m/s
  int element_mask_radius = 2;          // cells around each element with zeroed gradient
  SolverOptions solver;

  void validate() const {
    detail::require(num_iterations >= 1, "fwi: num_iterations must be >= 1");
    detail::require(step_size > 0.0, "fwi: step_size must be positive");
    detail::require(init_blur_sigma >= 0.0 && gradient_smoothing_sigma >= 0.0, "fwi: negative sigma");
    detail::require(min_speed < max_speed, "fwi: model bounds must be ordered");
    detail::require(min_speed >= kMinSoundSpeed && max_speed <= kMaxSoundSpeed, "fwi: bounds outside [300, 4000]");
  }
};

struct FwiState {
  AcousticModel current_model;
  std::size_t iteration = 0;
  std::vector<double> objective_history;
  Image gradient;  // dPhi/dm, s^2/m^2 per unit objective
};

struct FwiResult {
  AcousticModel model;
  FwiState state;
};

/// Non-finite objective during inversion; carries the history so far.
class InversionAborted : public NumericalError {
 public:
  InversionAborted(const std::string& what, std::size_t iteration, std::vector<double> history)
      : NumericalError(what + " at iteration " + std::to_string(iteration)), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Gradient of the misfit in both forms.
struct GradientResult {
  double objective = 0.0;
  Image exact;   // d Phi / d m for the physical pixels (sponge contributions folded in)
  Image masked;  // sponge and element neighbourhoods zeroed, optional smoothing applied
};

namespace detail {

// The solver must run on the record's time axis, never a re-derived one.
inline WaveSolver record_solver(const AcousticModel& model, const AcquisitionGeometry& geometry,
                                const ShotRecord& observed, SolverOptions options) {
  detail::require(observed.num_shots == geometry.num_shots() && observed.num_receivers == geometry.num_receivers(),
                  "shot record does not match the acquisition geometry");
  detail::require(observed.num_steps >= 2 && observed.dt > 0.0, "shot record has no time axis");
  AcquisitionGeometry g = geometry;
  g.dt = observed.dt;
  options.clamp_dt = false;
  options.num_steps = observed.num_steps;
  return WaveSolver(model, g, options);
}

inline double half_sq_norm_diff(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return 0.5 * acc;
}

}  // namespace detail

/// Sum over shots of 1/2 || P_r u_s - d_s ||^2.
inline double objective(const AcousticModel& model, const AcquisitionGeometry& geometry, const ShotRecord& observed,
                        const SolverOptions& options = {}) {
  const auto solver = detail::record_solver(model, geometry, observed, options);
  std::vector<double> per_shot(geometry.num_shots(), 0.0);
  parallel_for(
      geometry.num_shots(),
      [&](std::size_t s) {
        const auto sim = solver.simulate_shot(s, false);
        per_shot[s] = detail::half_sq_norm_diff(sim.traces, observed.shot(s));
      },
      options.threads);
  double total = 0.0;
  for (double v : per_shot) total += v;
  return total;
}

/// 1/2 ||r||^2 of an explicit residual vector.
inline double objective_from_residual(std::span<const double> residual) {
  double acc = 0.0;
  for (double r : residual) acc += r * r;
  return 0.5 * acc;
}

/// Cells within `radius` of any element, on the physical grid.
inline Image element_mask(const AcquisitionGeometry& geometry, std::size_t height, std::size_t width, int radius) {
  Image mask(height, width, 1.0);
  for (const auto& p : geometry.elements)
    for (int dr = -radius; dr <= radius; ++dr)
      for (int dc = -radius; dc <= radius; ++dc) {
        const int r = p.row + dr, c = p.col + dc;
        if (dr * dr + dc * dc > radius * radius) continue;
        if (r < 0 || c < 0 || r >= static_cast<int>(height) || c >= static_cast<int>(width)) continue;
        mask(r, c) = 0.0;
      }
  return mask;
}

/**
 * Adjoint-state gradient with respect to m = 1/c^2.
 *
 * Per shot: forward wavefield u stored, adjoint field nu run backward from the
 * data residual injected at the receivers, accumulation of -sum_t u[t] nu_tt[t].
 * Shots may run concurrently; the sum is taken in shot order.
 */
inline GradientResult compute_gradient(const AcousticModel& model, const AcquisitionGeometry& geometry,
                                       const ShotRecord& observed, const FwiConfig& config = {}) {
  const auto solver = detail::record_solver(model, geometry, observed, config.solver);
  const std::size_t cells = solver.padded_height() * solver.padded_width();
  const std::size_t shots = geometry.num_shots();
  std::vector<std::vector<double>> per_shot(shots);
  std::vector<double> phi(shots, 0.0);
  parallel_for(
      shots,
      [&](std::size_t s) {
        auto sim = solver.simulate_shot(s, true);
        const auto d = observed.shot(s);
        std::vector<double> residual(sim.traces.size());
        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = sim.traces[i] - d[i];
        phi[s] = objective_from_residual(residual);
        per_shot[s].assign(cells, 0.0);
        if (!std::isfinite(phi[s])) return;  // reported through the objective
        solver.accumulate_adjoint(residual, sim.wavefield, per_shot[s]);
      },
      config.solver.threads);

  std::vector<double> total(cells, 0.0);
  GradientResult out;
  for (std::size_t s = 0; s < shots; ++s) {
    out.objective += phi[s];
    for (std::size_t i = 0; i < cells; ++i) total[i] += per_shot[s][i];
  }
  out.exact = solver.pad_adjoint(total);
  Image masked = solver.crop(total);
  const Image mask = element_mask(geometry, model.height(), model.width(), config.element_mask_radius);
  for (std::size_t i = 0; i < masked.size(); ++i) masked[i] *= mask[i];
  out.masked = gaussian_blur(masked, config.gradient_smoothing_sigma);
  return out;
}

/// Masked (and optionally smoothed) gradient used for model updates.
inline Image gradient(const AcousticModel& model, const AcquisitionGeometry& geometry, const ShotRecord& observed,
                      const FwiConfig& config = {}) {
  return compute_gradient(model, geometry, observed, config).masked;
}

/// Linearized data J dm for a physical-grid slowness-squared perturbation.
inline ShotRecord born_data(const AcousticModel& model, const AcquisitionGeometry& geometry,
                            const ShotRecord& layout, const Image& dm, const SolverOptions& options = {}) {
  const auto solver = detail::record_solver(model, geometry, layout, options);
  const auto dm_padded = solver.pad(dm);
  ShotRecord out(layout.num_shots, layout.num_receivers, layout.num_steps, layout.dt);
  out.source_indices = geometry.source_indices;
  parallel_for(
      geometry.num_shots(),
      [&](std::size_t s) {
        const auto traces = solver.born(s, dm_padded);
        std::copy(traces.begin(), traces.end(), out.shot(s).begin());
      },
      options.threads);
  return out;
}

/// Blurred starting model: Gaussian blur of the true speed map (3 sigma truncation, edge replicate).
inline AcousticModel make_initial_model(const Image& true_speed, double sigma, double grid_spacing) {
  return AcousticModel::from_speed(gaussian_blur(true_speed, sigma), grid_spacing);
}

/**
 * Fixed-step normalized gradient descent in m = 1/c^2.
 *
 * m <- m - step_size * mean(m) * g / max|g|, then speed is clamped into
 * [min_speed, max_speed]. objective_history holds num_iterations + 1 values,
 * the first for the initial model. `on_iteration` sees every state.
 */
inline FwiResult invert(const ShotRecord& observed, const AcquisitionGeometry& geometry, const FwiConfig& config,
                        const AcousticModel& init,
                        const std::function<void(const FwiState&)>& on_iteration = {}) {
  config.validate();
  const double cfl_dt = cfl_time_step(init.grid_spacing, config.max_speed, config.solver.cfl_factor);
  detail::require(observed.dt <= cfl_dt * (1.0 + 1e-12),
                  "fwi: record dt exceeds the stability bound for max_speed");

  FwiState state;
  state.current_model = AcousticModel::from_speed(clamp(init.speed, config.min_speed, config.max_speed),
                                                  init.grid_spacing);
  for (std::size_t it = 0; it < config.num_iterations; ++it) {
    state.iteration = it;
    auto g = compute_gradient(state.current_model, geometry, observed, config);
    if (!std::isfinite(g.objective)) {
      state.objective_history.push_back(g.objective);
      throw InversionAborted("non-finite objective", it, state.objective_history);
    }
    state.objective_history.push_back(g.objective);
    state.gradient = std::move(g.masked);
    if (on_iteration) on_iteration(state);

    double gmax = 0.0;
    for (double v : state.gradient) gmax = std::max(gmax, std::abs(v));
    if (gmax == 0.0) continue;
    Image m = state.current_model.slowness_sq();
    const double scale = config.step_size * m.mean() / gmax;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] -= scale * state.gradient[i];
    Image speed = m.map([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : kMaxSoundSpeed; });
    state.current_model = AcousticModel::from_speed(clamp(speed, config.min_speed, config.max_speed),
                                                    init.grid_spacing);
  }
  state.iteration = config.num_iterations;
  const double final_phi = objective(state.current_model, geometry, observed, config.solver);
  state.objective_history.push_back(final_phi);
  if (!std::isfinite(final_phi))
    throw InversionAborted("non-finite objective", config.num_iterations, state.objective_history);
  if (on_iteration) on_iteration(state);
  return {state.current_model, std::move(state)};
}

}  // namespace wavesono
