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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavesono/errors.hpp"
#include "wavesono/image_grid.hpp"

namespace wavesono {

struct ElementFraction {
  std::string symbol;
  double weight = 0.0;       // mass fraction w_i
  double mu_over_rho = 0.0;  // cm^2/g at the configured tube voltage
};

struct TissueEntry {
  std::string name;
  std::vector<ElementFraction> elements;
  double density = 0.0;             // g/cm^3
  double hu_anchor = 0.0;           // HU
  double sound_speed_anchor = 0.0;  // m/s at 37 C
};

struct TissueTable {
  std::vector<TissueEntry> entries;
  double water_mu = 0.0;  // 1/cm
};

/// Depth attenuation applied row by row, rows increasing downward.
struct AttenuationParams {
  double alpha_ref = 0.0;   // 1/m
  double pixel_size = 5e-4; // m/pixel
};

inline constexpr double kWeightTolerance = 1e-3;

inline void validate(const TissueEntry& e) {
  const std::string who = "tissue '" + e.name + "'";
  detail::require(!e.elements.empty(), who + ": no elements");
  double sum = 0.0;
  for (const auto& el : e.elements) {
    detail::require(el.weight >= 0.0 && el.mu_over_rho >= 0.0, who + ": negative weight or coefficient");
    sum += el.weight;
  }
  detail::require(std::abs(sum - 1.0) <= kWeightTolerance,
                  who + ": mass fractions sum to " + std::to_string(sum) + ", expected 1");
  detail::require(e.density > 0.0, who + ": density must be positive");
  detail::require(e.sound_speed_anchor >= 300.0 && e.sound_speed_anchor <= 4000.0,
                  who + ": sound speed outside [300, 4000] m/s");
}

inline void validate(const TissueTable& t) {
  detail::require(t.entries.size() >= 2, "tissue table needs at least 2 entries");
  detail::require(t.water_mu > 0.0, "tissue table: water_mu must be positive");
  bool has_water = false;
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    validate(t.entries[i]);
    if (t.entries[i].hu_anchor == 0.0) has_water = true;
    if (i > 0)
      detail::require(t.entries[i].hu_anchor > t.entries[i - 1].hu_anchor,
                      "tissue table: HU anchors must be strictly increasing");
  }
  detail::require(has_water, "tissue table: no water entry (hu = 0)");
}

/// mu_x = rho_x * sum_i w_i (mu_i / rho_i), in 1/cm.
inline double linear_attenuation(const TissueEntry& entry) {
  validate(entry);
  double acc = 0.0;
  for (const auto& el : entry.elements) acc += el.weight * el.mu_over_rho;
  return entry.density * acc;
}

/// 1000 (mu_x - mu_water) / mu_water.
inline double hounsfield(double mu_x, double mu_water) {
  detail::require(mu_water > 0.0, "hounsfield: mu_water must be positive");
  return 1000.0 * (mu_x - mu_water) / mu_water;
}

/// Affine map of [0,1] intensities onto [hu_min, hu_max].
inline Image intensity_to_hu(const Image& grid, double hu_min = -1000.0, double hu_max = 1000.0) {
  detail::require(hu_max > hu_min, "intensity_to_hu: hu_max must exceed hu_min");
  for (double v : grid)
    detail::require(v >= 0.0 && v <= 1.0, "intensity_to_hu: intensities must lie in [0,1]");
  const double span = hu_max - hu_min;
  return grid.map([=](double v) { return hu_min + v * span; });
}

/// Piecewise-linear HU -> speed through the table anchors, clamped at both ends.
inline double hu_to_sound_speed(double hu, const TissueTable& table) {
  const auto& e = table.entries;
  if (hu <= e.front().hu_anchor) return e.front().sound_speed_anchor;
  if (hu >= e.back().hu_anchor) return e.back().sound_speed_anchor;
  std::size_t i = 1;
  while (hu > e[i].hu_anchor) ++i;
  const auto& lo = e[i - 1];
  const auto& hi = e[i];
  const double t = (hu - lo.hu_anchor) / (hi.hu_anchor - lo.hu_anchor);
  return lo.sound_speed_anchor + t * (hi.sound_speed_anchor - lo.sound_speed_anchor);
}

inline Image hu_to_sound_speed(const Image& hu_grid, const TissueTable& table) {
  validate(table);
  Image out = hu_grid.map([&](double hu) { return hu_to_sound_speed(hu, table); });
  out.set_value_range(1.0);
  return out;
}

/// Multiplies row r by exp(-alpha_ref * r * pixel_size).
inline Image apply_attenuation(const Image& grid, const AttenuationParams& params) {
  detail::require(params.alpha_ref >= 0.0, "apply_attenuation: alpha_ref must be non-negative");
  detail::require(params.pixel_size > 0.0, "apply_attenuation: pixel_size must be positive");
  Image out = grid;
  for (std::size_t r = 0; r < grid.height(); ++r) {
    const double gain = std::exp(-params.alpha_ref * static_cast<double>(r) * params.pixel_size);
    for (std::size_t c = 0; c < grid.width(); ++c) out(r, c) *= gain;
  }
  return out;
}

// Composition and coefficients below are rough ~20 keV configuration values,
// not reference physiology. Swap in a JSON table for real work.
inline TissueTable default_tissue_table() {
  auto el = [](const char* s, double w, double mr) { return ElementFraction{s, w, mr}; };
  TissueTable t;
  t.water_mu = 0.8096;
  t.entries = {
      {"air", {el("N", 0.755, 0.6172), el("O", 0.232, 0.8651), el("Ar", 0.013, 8.0)}, 0.0012, -1000.0, 343.0},
      {"fat", {el("H", 0.114, 0.3695), el("C", 0.598, 0.4420), el("N", 0.007, 0.6172), el("O", 0.281, 0.8651)},
       0.95, -100.0, 1450.0},
      {"water", {el("H", 0.112, 0.3695), el("O", 0.888, 0.8651)}, 1.0, 0.0, 1524.0},
      {"glandular", {el("H", 0.106, 0.3695), el("C", 0.332, 0.4420), el("N", 0.030, 0.6172), el("O", 0.532, 0.8651)},
       1.02, 40.0, 1550.0},
      {"tumor", {el("H", 0.104, 0.3695), el("C", 0.143, 0.4420), el("N", 0.034, 0.6172), el("O", 0.719, 0.8651)},
       1.05, 90.0, 1600.0},
  };
  return t;
}

inline nlohmann::json to_json(const TissueTable& t) {
  nlohmann::json j;
  j["water_mu_1_cm"] = t.water_mu;
  j["tissues"] = nlohmann::json::array();
  for (const auto& e : t.entries) {
    nlohmann::json je{{"name", e.name},
                      {"density_g_cm3", e.density},
                      {"hu", e.hu_anchor},
                      {"sound_speed_m_s", e.sound_speed_anchor},
                      {"elements", nlohmann::json::array()}};
    for (const auto& el : e.elements)
      je["elements"].push_back({{"symbol", el.symbol}, {"w", el.weight}, {"mu_over_rho_cm2_g", el.mu_over_rho}});
    j["tissues"].push_back(std::move(je));
  }
  return j;
}

inline TissueTable tissue_table_from_json(const nlohmann::json& j) {
  TissueTable t;
  try {
    t.water_mu = j.at("water_mu_1_cm").get<double>();
    for (const auto& je : j.at("tissues")) {
      TissueEntry e;
      e.name = je.at("name").get<std::string>();
      e.density = je.at("density_g_cm3").get<double>();
      e.hu_anchor = je.at("hu").get<double>();
      e.sound_speed_anchor = je.at("sound_speed_m_s").get<double>();
      for (const auto& jel : je.at("elements"))
        e.elements.push_back({jel.at("symbol").get<std::string>(), jel.at("w").get<double>(),
                              jel.at("mu_over_rho_cm2_g").get<double>()});
      t.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("tissue table: ") + ex.what());
  }
  validate(t);
  return t;
}

inline TissueTable load_tissue_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open tissue table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(path.string() + ": " + ex.what());
  }
  return tissue_table_from_json(j);
}

/// Intensity image -> HU -> speed-of-sound map.
inline Image intensity_to_sound_speed(const Image& intensity, const TissueTable& table,
                                      double hu_min = -1000.0, double hu_max = 1000.0) {
  return hu_to_sound_speed(intensity_to_hu(intensity, hu_min, hu_max), table);
}

}  // namespace wavesono
