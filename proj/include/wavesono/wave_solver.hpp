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
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"
#include "wavesono/parallel.hpp"

namespace wavesono {

inline constexpr double kMinSoundSpeed = 300.0;
inline constexpr double kMaxSoundSpeed = 4000.0;

/// Speed-of-sound model on an isotropic grid. The solver works in m = 1/c^2.
struct AcousticModel {
  Image speed;               // m/s
  double grid_spacing = 5e-4;  // m

  std::size_t height() const noexcept { return speed.height(); }
  std::size_t width() const noexcept { return speed.width(); }

  Image slowness_sq() const {
    return speed.map([](double c) { return 1.0 / (c * c); });
  }

  static AcousticModel from_speed(Image speed, double grid_spacing) {
    AcousticModel m{std::move(speed), grid_spacing};
    m.validate();
    return m;
  }

  static AcousticModel from_slowness_sq(const Image& m, double grid_spacing) {
    return from_speed(m.map([](double v) { return 1.0 / std::sqrt(v); }), grid_spacing);
  }

  void validate() const {
    detail::require(!speed.empty(), "acoustic model: empty speed map");
    detail::require(grid_spacing > 0.0, "acoustic model: grid spacing must be positive");
    for (double c : speed)
      detail::require(std::isfinite(c) && c >= kMinSoundSpeed && c <= kMaxSoundSpeed,
                      "acoustic model: speed " + std::to_string(c) + " outside [300, 4000] m/s");
  }
};

struct GridPoint {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

enum class ArrayKind { linear, curvilinear };

inline const char* to_string(ArrayKind k) { return k == ArrayKind::linear ? "linear" : "curvilinear"; }

inline ArrayKind parse_array_kind(std::string_view s) {
  if (s == "linear") return ArrayKind::linear;
  if (s == "curvilinear") return ArrayKind::curvilinear;
  throw ValidationError("unknown array kind '" + std::string(s) + "'");
}

/// Transducer array and acquisition settings. Element positions are physical-grid cells.
struct AcquisitionGeometry {
  ArrayKind array_kind = ArrayKind::linear;
  std::vector<GridPoint> elements;
  std::vector<std::size_t> source_indices;  // emitter element of each shot
  std::vector<double> element_angles;       // curvilinear arrays only, radians
  double central_frequency = 3e5;           // Hz
  double duration = 8e-5;                   // s
  double dt = 0.0;                          // s; 0 picks the stability bound
  double source_amplitude = 1.0;

  std::size_t num_shots() const noexcept { return source_indices.size(); }
  std::size_t num_receivers() const noexcept { return elements.size(); }
};

/// Ricker pulse delayed by 1.5 / f so it starts near zero.
inline double ricker_delay(double central_frequency) { return 1.5 / central_frequency; }

inline std::vector<double> ricker_wavelet(double central_frequency, double dt, std::size_t num_steps,
                                          double amplitude = 1.0) {
  detail::require(central_frequency > 0.0, "ricker_wavelet: frequency must be positive");
  detail::require(dt > 0.0, "ricker_wavelet: dt must be positive");
  const double t0 = ricker_delay(central_frequency);
  const double pf2 = std::numbers::pi * std::numbers::pi * central_frequency * central_frequency;
  std::vector<double> w(num_steps);
  for (std::size_t n = 0; n < num_steps; ++n) {
    const double tau = static_cast<double>(n) * dt - t0;
    const double a = pf2 * tau * tau;
    w[n] = amplitude * (1.0 - 2.0 * a) * std::exp(-a);
  }
  return w;
}

/// Evenly spaced elements along one row, `margin` cells in from each side.
inline AcquisitionGeometry make_linear_array(std::size_t num_elements, int depth_row, std::size_t height,
                                             std::size_t width, int margin = 4) {
  detail::require(num_elements >= 2, "make_linear_array: need at least 2 elements");
  detail::require(depth_row >= 0 && static_cast<std::size_t>(depth_row) < height,
                  "make_linear_array: depth row outside grid");
  detail::require(margin >= 0, "make_linear_array: negative margin");
  const long span = static_cast<long>(width) - 1 - 2L * margin;
  if (span < static_cast<long>(num_elements) - 1)
    throw ValidationError("make_linear_array: " + std::to_string(num_elements) +
                          " elements do not fit in width " + std::to_string(width));
  AcquisitionGeometry g;
  g.array_kind = ArrayKind::linear;
  for (std::size_t i = 0; i < num_elements; ++i) {
    const double col = margin + static_cast<double>(i) * span / static_cast<double>(num_elements - 1);
    g.elements.push_back({depth_row, static_cast<int>(std::lround(col))});
    g.source_indices.push_back(i);
  }
  return g;
}

namespace detail {

/// Distinct ring cells for the given angles, or nothing if the ring is too sparse.
inline std::optional<std::vector<GridPoint>> ring_assignment(const std::vector<double>& angles, double radius,
                                                             double center_row, double center_col, double lo,
                                                             double span, std::size_t height, std::size_t width) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  struct Cell {
    double angle;
    GridPoint p;
  };
  std::vector<Cell> cells;
  const int r0 = static_cast<int>(std::floor(center_row - radius - 1.0));
  const int r1 = static_cast<int>(std::ceil(center_row + radius + 1.0));
  const int c0 = static_cast<int>(std::floor(center_col - radius - 1.0));
  const int c1 = static_cast<int>(std::ceil(center_col + radius + 1.0));
  for (int r = std::max(r0, 0); r <= std::min(r1, static_cast<int>(height) - 1); ++r)
    for (int c = std::max(c0, 0); c <= std::min(c1, static_cast<int>(width) - 1); ++c) {
      const double dr = r - center_row, dc = c - center_col;
      if (std::abs(std::hypot(dr, dc) - radius) > 0.5) continue;
      const double a = std::fmod(std::fmod(std::atan2(dr, dc) - lo, two_pi) + two_pi, two_pi);
      if (a < span) cells.push_back({a, {r, c}});
    }
  const std::size_t n = angles.size(), m = cells.size();
  if (m < n) return std::nullopt;
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.angle < b.angle; });

  // cost[i][j]: best total for the first i elements using the first j cells
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost((n + 1) * (m + 1), inf);
  std::vector<char> take((n + 1) * (m + 1), 0);
  auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t j = 0; j <= m; ++j) cost[at(0, j)] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double target = angles[i - 1] - lo;
    for (std::size_t j = i; j <= m; ++j) {
      const double d = cells[j - 1].angle - target;
      const double with = cost[at(i - 1, j - 1)] + d * d;
      const double without = cost[at(i, j - 1)];
      if (with <= without) {
        cost[at(i, j)] = with;
        take[at(i, j)] = 1;
      } else {
        cost[at(i, j)] = without;
      }
    }
  }
  std::vector<GridPoint> out(n);
  for (std::size_t i = n, j = m; i > 0; --j)
    if (take[at(i, j)]) out[--i] = cells[j - 1].p;
  return out;
}

}  // namespace detail

/**
 * Elements evenly spaced in angle on a circular arc.
 *
 * Element i sits at angle start + i * arc / (n - 1), or start + i * 2pi / n for
 * a full circle. Angle 0 points along +col, pi/2 along +row.
 *
 * Cells within half a cell of the circle are matched to elements in angular
 * order (monotone assignment, least squared angle error), so every element
 * gets its own cell when the ring holds enough of them. Otherwise each element
 * snaps to whichever of its four surrounding cells lies closest to the circle.
 */
inline AcquisitionGeometry make_curvilinear_array(std::size_t num_elements, double radius, double center_row,
                                                  double center_col, double arc, std::size_t height,
                                                  std::size_t width, double start_angle = 0.0) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  detail::require(num_elements >= 2, "make_curvilinear_array: need at least 2 elements");
  detail::require(arc > 0.0 && arc <= two_pi + 1e-12, "make_curvilinear_array: arc must be in (0, 2pi]");
  detail::require(radius > 0.0, "make_curvilinear_array: radius must be positive");
  const bool full = arc >= two_pi - 1e-12;
  const double step = full ? two_pi / num_elements : arc / static_cast<double>(num_elements - 1);

  AcquisitionGeometry g;
  g.array_kind = ArrayKind::curvilinear;
  for (std::size_t i = 0; i < num_elements; ++i) {
    const double theta = start_angle + static_cast<double>(i) * step;
    const double r = center_row + radius * std::sin(theta);
    const double c = center_col + radius * std::cos(theta);
    GridPoint best{};
    double best_err = 1e300, best_d2 = 1e300;
    for (double rr : {std::floor(r), std::ceil(r)})
      for (double cc : {std::floor(c), std::ceil(c)}) {
        const double err = std::abs(std::hypot(rr - center_row, cc - center_col) - radius);
        const double d2 = (rr - r) * (rr - r) + (cc - c) * (cc - c);
        if (err < best_err - 1e-12 || (std::abs(err - best_err) <= 1e-12 && d2 < best_d2)) {
          best = {static_cast<int>(rr), static_cast<int>(cc)};
          best_err = err;
          best_d2 = d2;
        }
      }
    if (best.row < 0 || best.col < 0 || best.row >= static_cast<int>(height) ||
        best.col >= static_cast<int>(width))
      throw ValidationError("make_curvilinear_array: element " + std::to_string(i) + " falls outside the grid");
    g.elements.push_back(best);
    g.element_angles.push_back(theta);
    g.source_indices.push_back(i);
  }
  if (auto ring = detail::ring_assignment(g.element_angles, radius, center_row, center_col, start_angle - step / 2,
                                          full ? two_pi : arc + step, height, width))
    g.elements = std::move(*ring);
  return g;
}

inline void validate(const AcquisitionGeometry& g, std::size_t height, std::size_t width) {
  detail::require(!g.elements.empty(), "geometry: no elements");
  detail::require(!g.source_indices.empty(), "geometry: no shots");
  detail::require(g.central_frequency > 0.0, "geometry: central frequency must be positive");
  detail::require(g.duration > 0.0, "geometry: duration must be positive");
  detail::require(g.dt >= 0.0, "geometry: dt must be non-negative");
  for (const auto& p : g.elements)
    detail::require(p.row >= 0 && p.col >= 0 && static_cast<std::size_t>(p.row) < height &&
                        static_cast<std::size_t>(p.col) < width,
                    "geometry: element (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                        ") outside the physical grid");
  for (auto s : g.source_indices)
    detail::require(s < g.elements.size(), "geometry: source index out of range");
}

/// Largest stable step: cfl_factor * dx / (c_max * sqrt 2).
inline double cfl_time_step(double grid_spacing, double max_speed, double cfl_factor = 0.5) {
  return cfl_factor * grid_spacing / (max_speed * std::numbers::sqrt2);
}

/// Receiver traces, shot-major: traces[(shot * receivers + receiver) * steps + t].
struct ShotRecord {
  std::size_t num_shots = 0;
  std::size_t num_receivers = 0;
  std::size_t num_steps = 0;
  double dt = 0.0;
  std::vector<std::size_t> source_indices;
  std::vector<double> traces;

  ShotRecord() = default;
  ShotRecord(std::size_t shots, std::size_t receivers, std::size_t steps, double dt_)
      : num_shots(shots), num_receivers(receivers), num_steps(steps), dt(dt_),
        source_indices(shots, 0), traces(shots * receivers * steps, 0.0) {}

  double& at(std::size_t s, std::size_t r, std::size_t t) { return traces[(s * num_receivers + r) * num_steps + t]; }
  double at(std::size_t s, std::size_t r, std::size_t t) const {
    return traces[(s * num_receivers + r) * num_steps + t];
  }

  std::span<double> trace(std::size_t s, std::size_t r) {
    return {traces.data() + (s * num_receivers + r) * num_steps, num_steps};
  }
  std::span<const double> trace(std::size_t s, std::size_t r) const {
    return {traces.data() + (s * num_receivers + r) * num_steps, num_steps};
  }
  std::span<double> shot(std::size_t s) {
    return {traces.data() + s * num_receivers * num_steps, num_receivers * num_steps};
  }
  std::span<const double> shot(std::size_t s) const {
    return {traces.data() + s * num_receivers * num_steps, num_receivers * num_steps};
  }

  bool same_layout(const ShotRecord& o) const noexcept {
    return num_shots == o.num_shots && num_receivers == o.num_receivers && num_steps == o.num_steps;
  }

  friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

struct WavefieldSnapshot {
  std::size_t time_index = 0;
  Image field;  // padded computational grid
};

struct SolverOptions {
  int sponge_width = 40;           // cells on every side
  double cfl_factor = 0.5;
  bool clamp_dt = true;            // false: refuse to run when dt exceeds the bound
  double reference_speed = 1540.0; // sets the sponge damping strength
  double sponge_reflection = 1e-3; // target amplitude reflection of the sponge
  std::size_t num_steps = 0;       // 0: derive from the geometry duration
  std::size_t snapshot_stride = 1; // keep every k-th wavefield step for the adjoint
  unsigned threads = 0;            // shot-level workers; 0 = hardware concurrency
};

/// Forward wavefields kept for an adjoint pass: stored steps 0, k, 2k, ...
struct StoredWavefield {
  std::size_t stride = 1;
  std::size_t cells = 0;
  std::vector<double> data;

  std::span<const double> step(std::size_t index) const { return {data.data() + index * cells, cells}; }
};

struct ShotSimulation {
  std::vector<double> traces;  // receivers x steps
  StoredWavefield wavefield;
};

/**
 * Explicit solver for m u_tt + eta u_t = lap(u) + s on a sponge-padded grid.
 *
 * Leapfrog in time, 4th-order centred Laplacian in space, zero values beyond
 * the padded grid. eta is non-zero only inside the sponge. The same update,
 * run backward in time, is the exact discrete adjoint, which is what the
 * gradient and Born routines below rely on.
 */
class WaveSolver {
 public:
  WaveSolver(const AcousticModel& model, const AcquisitionGeometry& geometry, const SolverOptions& options = {})
      : geometry_(geometry), options_(options), height_(model.height()), width_(model.width()),
        dx_(model.grid_spacing) {
    model.validate();
    validate(geometry_, height_, width_);
    detail::require(options_.sponge_width >= 0, "solver: negative sponge width");
    detail::require(options_.snapshot_stride >= 1, "solver: snapshot stride must be >= 1");

    const double c_max = model.speed.max();
    const double c_min = model.speed.min();
    const double bound = cfl_time_step(dx_, c_max, options_.cfl_factor);
    if (geometry_.dt <= 0.0) {
      dt_ = bound;
    } else if (geometry_.dt > bound * (1.0 + 1e-12)) {
      if (!options_.clamp_dt)
        throw NumericalError("CFL violation: dt " + std::to_string(geometry_.dt) + " exceeds stable bound " +
                             std::to_string(bound));
      dt_ = bound;
      warnings_.push_back("dt clamped from " + std::to_string(geometry_.dt) + " to " + std::to_string(bound));
    } else {
      dt_ = geometry_.dt;
    }
    num_steps_ = options_.num_steps > 0
                     ? options_.num_steps
                     : static_cast<std::size_t>(std::floor(geometry_.duration / dt_ + 1e-9)) + 1;

    const double ppw = c_min / (geometry_.central_frequency * dx_);
    if (ppw < 10.0)
      warnings_.push_back("dispersion: " + std::to_string(ppw) + " points per wavelength at " +
                          std::to_string(geometry_.central_frequency) + " Hz (< 10); expect numerical dispersion");

    build_coefficients(model);
    wavelet_ = ricker_wavelet(geometry_.central_frequency, dt_, num_steps_, geometry_.source_amplitude);
  }

  double dt() const noexcept { return dt_; }
  std::size_t num_steps() const noexcept { return num_steps_; }
  std::size_t padded_height() const noexcept { return ph_; }
  std::size_t padded_width() const noexcept { return pw_; }
  int sponge_width() const noexcept { return options_.sponge_width; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  const std::vector<double>& wavelet() const noexcept { return wavelet_; }
  const AcquisitionGeometry& geometry() const noexcept { return geometry_; }
  const SolverOptions& options() const noexcept { return options_; }

  /// One shot. Snapshots (every `snapshot_stride` steps, padded grid) when requested.
  std::pair<ShotRecord, std::vector<WavefieldSnapshot>> forward(std::size_t shot, bool record_wavefield) const {
    detail::require(shot < geometry_.num_shots(), "forward: shot index out of range");
    auto sim = simulate_shot(shot, record_wavefield);
    ShotRecord rec(1, geometry_.num_receivers(), num_steps_, dt_);
    rec.source_indices[0] = geometry_.source_indices[shot];
    rec.traces = std::move(sim.traces);
    std::vector<WavefieldSnapshot> snaps;
    if (record_wavefield) {
      const auto& wf = sim.wavefield;
      for (std::size_t k = 0; k * wf.stride < num_steps_; ++k) {
        auto s = wf.step(k);
        snaps.push_back({k * wf.stride, Image(ph_, pw_, std::vector<double>(s.begin(), s.end()))});
      }
    }
    return {std::move(rec), std::move(snaps)};
  }

  /// Every shot of the geometry; shot s fires element source_indices[s], all elements listen.
  ShotRecord simulate_all_shots() const {
    std::vector<std::size_t> order(geometry_.num_shots());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return simulate_shots(order);
  }

  /// Same as simulate_all_shots but executes shots in the given order.
  ShotRecord simulate_shots(std::span<const std::size_t> order) const {
    ShotRecord rec(geometry_.num_shots(), geometry_.num_receivers(), num_steps_, dt_);
    rec.source_indices = geometry_.source_indices;
    parallel_for(
        order.size(),
        [&](std::size_t i) {
          const std::size_t s = order[i];
          detail::require(s < geometry_.num_shots(), "simulate_shots: shot index out of range");
          auto sim = simulate_shot(s, false);
          std::copy(sim.traces.begin(), sim.traces.end(), rec.shot(s).begin());
        },
        options_.threads);
    return rec;
  }

  /// Forward run of one shot; receivers x steps traces and optionally the stored wavefield.
  ShotSimulation simulate_shot(std::size_t shot, bool store_wavefield) const {
    const std::size_t R = geometry_.num_receivers();
    ShotSimulation out;
    out.traces.assign(R * num_steps_, 0.0);
    if (store_wavefield) {
      out.wavefield.stride = options_.snapshot_stride;
      out.wavefield.cells = ph_ * pw_;
      const std::size_t stored = (num_steps_ + options_.snapshot_stride - 1) / options_.snapshot_stride;
      out.wavefield.data.assign(stored * ph_ * pw_, 0.0);
    }
    const std::size_t src = cell(geometry_.elements[geometry_.source_indices[shot]]);
    const double src_scale = 1.0 / (dx_ * dx_);

    std::vector<double> prev(total_, 0.0), cur(total_, 0.0), next(total_, 0.0);
    for (std::size_t n = 0; n < num_steps_; ++n) {
      for (std::size_t r = 0; r < R; ++r) out.traces[r * num_steps_ + n] = cur[receiver_cells_[r]];
      if (store_wavefield && n % options_.snapshot_stride == 0)
        copy_interior(cur, out.wavefield.data.data() + (n / options_.snapshot_stride) * ph_ * pw_);
      if (n + 1 == num_steps_) break;
      step(cur, prev, next);
      next[src] += inv_a_[src] * wavelet_[n] * src_scale;
      check_field(next, n + 1, true);
      std::swap(prev, cur);
      std::swap(cur, next);
    }
    return out;
  }

  /**
   * Backward adjoint pass driven by `residual` (receivers x steps) injected at
   * the receivers. Accumulates -sum_k u[k] nu_tt[k] into `gradient` (padded
   * grid, no halo) using the stored forward wavefield.
   */
  void accumulate_adjoint(std::span<const double> residual, const StoredWavefield& wavefield,
                          std::span<double> gradient) const {
    const std::size_t R = geometry_.num_receivers();
    detail::require(residual.size() == R * num_steps_, "adjoint: residual size mismatch");
    detail::require(gradient.size() == ph_ * pw_, "adjoint: gradient size mismatch");
    const std::size_t stride = wavefield.stride;
    const double inv_dt2 = 1.0 / (dt_ * dt_);

    // later = nu[k+1], cur = nu[k], next = nu[k-1]
    std::vector<double> later(total_, 0.0), cur(total_, 0.0), next(total_, 0.0);
    for (std::size_t k = num_steps_ - 1; k >= 1; --k) {
      step(cur, later, next);
      for (std::size_t r = 0; r < R; ++r)
        next[receiver_cells_[r]] += inv_a_[receiver_cells_[r]] * residual[r * num_steps_ + k];
      check_field(next, k - 1, false);
      if (k % stride == 0) {
        const auto u = wavefield.step(k / stride);
        const double w = static_cast<double>(stride) * inv_dt2;
        for (std::size_t pr = 0; pr < ph_; ++pr) {
          const std::size_t base = (pr + kHalo) * sw_ + kHalo;
          for (std::size_t pc = 0; pc < pw_; ++pc) {
            const std::size_t i = base + pc;
            const double nu_tt = later[i] - 2.0 * cur[i] + next[i];
            gradient[pr * pw_ + pc] -= w * u[pr * pw_ + pc] * nu_tt;
          }
        }
      }
      std::swap(later, cur);
      std::swap(cur, next);
    }
  }

  /**
   * Born (linearized) data for a slowness-squared perturbation `dm` on the
   * padded grid (no halo): returns receivers x steps traces of J dm.
   */
  std::vector<double> born(std::size_t shot, std::span<const double> dm) const {
    detail::require(dm.size() == ph_ * pw_, "born: perturbation size mismatch");
    const std::size_t R = geometry_.num_receivers();
    std::vector<double> traces(R * num_steps_, 0.0);
    const std::size_t src = cell(geometry_.elements[geometry_.source_indices[shot]]);
    const double src_scale = 1.0 / (dx_ * dx_);
    const double inv_dt2 = 1.0 / (dt_ * dt_);

    std::vector<double> up(total_, 0.0), uc(total_, 0.0), un(total_, 0.0);
    std::vector<double> dp(total_, 0.0), dc(total_, 0.0), dn(total_, 0.0);
    for (std::size_t n = 0; n < num_steps_; ++n) {
      for (std::size_t r = 0; r < R; ++r) traces[r * num_steps_ + n] = dc[receiver_cells_[r]];
      if (n + 1 == num_steps_) break;
      step(uc, up, un);
      un[src] += inv_a_[src] * wavelet_[n] * src_scale;
      step(dc, dp, dn);
      for (std::size_t pr = 0; pr < ph_; ++pr) {
        const std::size_t base = (pr + kHalo) * sw_ + kHalo;
        for (std::size_t pc = 0; pc < pw_; ++pc) {
          const std::size_t i = base + pc;
          const double u_tt = (un[i] - 2.0 * uc[i] + up[i]) * inv_dt2;
          dn[i] -= inv_a_[i] * dm[pr * pw_ + pc] * u_tt;
        }
      }
      std::swap(up, uc);
      std::swap(uc, un);
      std::swap(dp, dc);
      std::swap(dc, dn);
    }
    return traces;
  }

  /// Edge-replicated extension of a physical-grid field onto the padded grid.
  std::vector<double> pad(const Image& physical) const {
    detail::require(physical.height() == height_ && physical.width() == width_, "pad: dimension mismatch");
    const int s = options_.sponge_width;
    std::vector<double> out(ph_ * pw_);
    for (std::size_t r = 0; r < ph_; ++r) {
      const auto pr = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(r) - s, 0, long(height_) - 1));
      for (std::size_t c = 0; c < pw_; ++c) {
        const auto pc = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(c) - s, 0, long(width_) - 1));
        out[r * pw_ + c] = physical(pr, pc);
      }
    }
    return out;
  }

  /// Transpose of pad(): sponge values are summed onto the nearest edge pixel.
  Image pad_adjoint(std::span<const double> padded) const {
    detail::require(padded.size() == ph_ * pw_, "pad_adjoint: size mismatch");
    const int s = options_.sponge_width;
    Image out(height_, width_, 0.0);
    for (std::size_t r = 0; r < ph_; ++r) {
      const auto pr = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(r) - s, 0, long(height_) - 1));
      for (std::size_t c = 0; c < pw_; ++c) {
        const auto pc = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(c) - s, 0, long(width_) - 1));
        out(pr, pc) += padded[r * pw_ + c];
      }
    }
    return out;
  }

  /// Physical-grid window of a padded field.
  Image crop(std::span<const double> padded) const {
    detail::require(padded.size() == ph_ * pw_, "crop: size mismatch");
    const auto s = static_cast<std::size_t>(options_.sponge_width);
    Image out(height_, width_, 0.0);
    for (std::size_t r = 0; r < height_; ++r)
      for (std::size_t c = 0; c < width_; ++c) out(r, c) = padded[(r + s) * pw_ + c + s];
    return out;
  }

 private:
  static constexpr std::size_t kHalo = 2;

  std::size_t cell(const GridPoint& p) const {
    const auto s = static_cast<std::size_t>(options_.sponge_width);
    return (static_cast<std::size_t>(p.row) + s + kHalo) * sw_ + static_cast<std::size_t>(p.col) + s + kHalo;
  }

  void build_coefficients(const AcousticModel& model) {
    const int s = options_.sponge_width;
    ph_ = height_ + 2 * static_cast<std::size_t>(s);
    pw_ = width_ + 2 * static_cast<std::size_t>(s);
    sw_ = pw_ + 2 * kHalo;
    total_ = (ph_ + 2 * kHalo) * sw_;

    const auto m = pad(model.slowness_sq());
    const double m_ref = 1.0 / (options_.reference_speed * options_.reference_speed);
    const double gamma_max =
        s > 0 ? 3.0 * options_.reference_speed / (2.0 * s * dx_) * std::log(1.0 / options_.sponge_reflection) : 0.0;
    auto profile = [&](long idx, long n) {
      const long depth = std::max({static_cast<long>(s) - idx, idx - (n - 1 - static_cast<long>(s)), 0L});
      if (depth == 0) return 0.0;
      return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(depth) / s));
    };

    inv_a_.assign(total_, 0.0);
    b_.assign(total_, 0.0);
    m2_.assign(total_, 0.0);
    const double inv_dt2 = 1.0 / (dt_ * dt_);
    for (std::size_t r = 0; r < ph_; ++r)
      for (std::size_t c = 0; c < pw_; ++c) {
        const double gamma = gamma_max * (profile(static_cast<long>(r), static_cast<long>(ph_)) +
                                          profile(static_cast<long>(c), static_cast<long>(pw_)));
        const double eta = gamma * m_ref;
        const double mv = m[r * pw_ + c];
        const std::size_t i = (r + kHalo) * sw_ + c + kHalo;
        inv_a_[i] = 1.0 / (mv * inv_dt2 + 0.5 * eta / dt_);
        b_[i] = mv * inv_dt2 - 0.5 * eta / dt_;
        m2_[i] = 2.0 * mv * inv_dt2;
      }

    receiver_cells_.clear();
    for (const auto& p : geometry_.elements) receiver_cells_.push_back(cell(p));
  }

  // next = ((m2 + L) cur - b prev) / a
  void step(const std::vector<double>& cur, const std::vector<double>& prev, std::vector<double>& next) const {
    const double inv_dx2 = 1.0 / (dx_ * dx_);
    const double c0 = -5.0 * inv_dx2, c1 = 4.0 / 3.0 * inv_dx2, c2 = -1.0 / 12.0 * inv_dx2;
    const std::size_t sw = sw_, sw2 = 2 * sw_;
    const double* u = cur.data();
    const double* p = prev.data();
    double* o = next.data();
    for (std::size_t r = 0; r < ph_; ++r) {
      const std::size_t base = (r + kHalo) * sw + kHalo;
      for (std::size_t i = base; i < base + pw_; ++i) {
        const double lap = c0 * u[i] + c1 * (u[i - 1] + u[i + 1] + u[i - sw] + u[i + sw]) +
                           c2 * (u[i - 2] + u[i + 2] + u[i - sw2] + u[i + sw2]);
        o[i] = inv_a_[i] * (m2_[i] * u[i] + lap - b_[i] * p[i]);
      }
    }
  }

  void copy_interior(const std::vector<double>& field, double* out) const {
    for (std::size_t r = 0; r < ph_; ++r)
      std::copy_n(field.data() + (r + kHalo) * sw_ + kHalo, pw_, out + r * pw_);
  }

  void check_field(const std::vector<double>& field, std::size_t step_index, bool apply_ceiling) const {
    if (step_index % 32 != 0) return;
    const double ceiling = 1e6 * std::max(std::abs(geometry_.source_amplitude), 1e-300);
    for (double v : field) {
      if (!std::isfinite(v))
        throw NumericalError("non-finite wavefield value", static_cast<std::ptrdiff_t>(step_index));
      if (apply_ceiling && std::abs(v) > ceiling)
        throw NumericalError("wavefield exceeded stability ceiling", static_cast<std::ptrdiff_t>(step_index));
    }
  }

  AcquisitionGeometry geometry_;
  SolverOptions options_;
  std::size_t height_ = 0, width_ = 0;
  double dx_ = 0.0;
  double dt_ = 0.0;
  std::size_t num_steps_ = 0;
  std::size_t ph_ = 0, pw_ = 0, sw_ = 0, total_ = 0;
  std::vector<double> inv_a_, b_, m2_;
  std::vector<std::size_t> receiver_cells_;
  std::vector<double> wavelet_;
  std::vector<std::string> warnings_;
};

/// Convenience wrapper: all shots of `geometry` through `model`.
inline ShotRecord simulate_all_shots(const AcousticModel& model, const AcquisitionGeometry& geometry,
                                     const SolverOptions& options = {}) {
  return WaveSolver(model, geometry, options).simulate_all_shots();
}

}  // namespace wavesono
