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

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "wavesono/errors.hpp"
#include "wavesono/image_io.hpp"
#include "wavesono/wave_solver.hpp"

namespace wavesono {

inline nlohmann::json to_json(const AcquisitionGeometry& g) {
  nlohmann::json j;
  j["array_kind"] = to_string(g.array_kind);
  j["elements"] = nlohmann::json::array();
  for (const auto& p : g.elements) j["elements"].push_back({p.row, p.col});
  j["source_indices"] = g.source_indices;
  if (!g.element_angles.empty()) j["element_angles"] = g.element_angles;
  j["frequency_hz"] = g.central_frequency;
  j["duration_s"] = g.duration;
  j["dt_s"] = g.dt;
  j["source_amplitude"] = g.source_amplitude;
  return j;
}

inline AcquisitionGeometry geometry_from_json(const nlohmann::json& j) {
  AcquisitionGeometry g;
  try {
    g.array_kind = parse_array_kind(j.at("array_kind").get<std::string>());
    for (const auto& p : j.at("elements")) g.elements.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    g.source_indices = j.at("source_indices").get<std::vector<std::size_t>>();
    if (j.contains("element_angles")) g.element_angles = j.at("element_angles").get<std::vector<double>>();
    g.central_frequency = j.at("frequency_hz").get<double>();
    g.duration = j.at("duration_s").get<double>();
    g.dt = j.at("dt_s").get<double>();
    g.source_amplitude = j.value("source_amplitude", 1.0);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("geometry: ") + ex.what());
  }
  return g;
}

/// A shot record on disk: f32-raw traces ((shots * receivers) x steps) plus a JSON sidecar.
struct RecordBundle {
  ShotRecord record;
  AcquisitionGeometry geometry;  // dt_s holds the record's effective dt
  double grid_spacing = 0.0;
  std::size_t model_height = 0, model_width = 0;
  int sponge_width = 40;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& traces) {
  auto p = traces;
  p.replace_extension(".json");
  return p;
}

inline void save_record(const RecordBundle& b, const std::filesystem::path& traces_path) {
  const auto& r = b.record;
  Image traces(r.num_shots * r.num_receivers, r.num_steps, r.traces);
  save_image(traces, traces_path, ImageFormat::f32_raw);
  nlohmann::json j;
  j["num_shots"] = r.num_shots;
  j["num_receivers"] = r.num_receivers;
  j["num_steps"] = r.num_steps;
  j["dt_s"] = r.dt;
  j["grid_spacing_m"] = b.grid_spacing;
  j["model_height"] = b.model_height;
  j["model_width"] = b.model_width;
  j["sponge_width"] = b.sponge_width;
  j["geometry"] = to_json(b.geometry);
  std::ofstream out(sidecar_path(traces_path));
  if (!out) throw ValidationError("cannot write " + sidecar_path(traces_path).string());
  out << j.dump(2) << '\n';
}

inline RecordBundle load_record(const std::filesystem::path& traces_path) {
  const auto meta_path = sidecar_path(traces_path);
  std::ifstream in(meta_path);
  if (!in) throw ValidationError("cannot open record sidecar " + meta_path.string());
  RecordBundle b;
  try {
    const auto j = nlohmann::json::parse(in);
    b.record = ShotRecord(j.at("num_shots").get<std::size_t>(), j.at("num_receivers").get<std::size_t>(),
                          j.at("num_steps").get<std::size_t>(), j.at("dt_s").get<double>());
    b.grid_spacing = j.at("grid_spacing_m").get<double>();
    b.model_height = j.at("model_height").get<std::size_t>();
    b.model_width = j.at("model_width").get<std::size_t>();
    b.sponge_width = j.value("sponge_width", 40);
    b.geometry = geometry_from_json(j.at("geometry"));
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(meta_path.string() + ": " + ex.what());
  }
  b.record.source_indices = b.geometry.source_indices;
  const Image traces = load_image(traces_path, ImageFormat::f32_raw);
  detail::require(traces.height() == b.record.num_shots * b.record.num_receivers &&
                      traces.width() == b.record.num_steps,
                  traces_path.string() + ": trace dimensions disagree with the sidecar");
  b.record.traces.assign(traces.begin(), traces.end());
  return b;
}

}  // namespace wavesono
