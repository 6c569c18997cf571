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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wavesono/domain_adapt.hpp"
#include "wavesono/errors.hpp"
#include "wavesono/fwi.hpp"
#include "wavesono/image_io.hpp"
#include "wavesono/metrics.hpp"
#include "wavesono/phantom.hpp"
#include "wavesono/record_io.hpp"
#include "wavesono/tissue_model.hpp"
#include "wavesono/wave_solver.hpp"

#ifndef WAVESONO_VERSION
#define WAVESONO_VERSION "0.1.0"
#endif

namespace wavesono {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Hashing

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash(const fs::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return fnv1a_hex(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// Metrics report

struct MetricsPair {
  std::string name;
  fs::path recon;
  fs::path truth;
};

struct MetricsRow {
  std::string name;
  std::string recon;
  std::string truth;
  MetricReport metrics;
};

struct MetricsSummary {
  MetricReport mean;
  MetricReport std;
};

inline std::vector<MetricsRow> report_metrics(const std::vector<MetricsPair>& pairs, double dynamic_range = 1.0) {
  detail::require(!pairs.empty(), "metrics: no image pairs");
  std::vector<MetricsRow> rows;
  for (const auto& p : pairs) {
    const Image recon = load_image(p.recon);
    const Image truth = load_image(p.truth);
    require_same_shape(recon, truth, ("metrics pair '" + p.name + "'").c_str());
    rows.push_back({p.name, p.recon.string(), p.truth.string(), evaluate_metrics(recon, truth, dynamic_range)});
  }
  return rows;
}

/// Arithmetic mean and population standard deviation of each column.
inline MetricsSummary summarize(const std::vector<MetricsRow>& rows) {
  MetricsSummary s;
  const double n = static_cast<double>(rows.size());
  auto col = [&](auto get, double& mean, double& sd) {
    double acc = 0.0;
    for (const auto& r : rows) acc += get(r.metrics);
    mean = acc / n;
    double var = 0.0;
    for (const auto& r : rows) var += (get(r.metrics) - mean) * (get(r.metrics) - mean);
    sd = std::isfinite(mean) ? std::sqrt(var / n) : std::nan("");
  };
  col([](const MetricReport& m) { return m.mse; }, s.mean.mse, s.std.mse);
  col([](const MetricReport& m) { return m.psnr; }, s.mean.psnr, s.std.psnr);
  col([](const MetricReport& m) { return m.ssim; }, s.mean.ssim, s.std.ssim);
  return s;
}

namespace detail {

inline std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr std::string_view kMetricsHeader = "name,recon,truth,mse,psnr,ssim";

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  auto line = [&](const std::string& name, const std::string& a, const std::string& b, const MetricReport& m) {
    os << name << ',' << a << ',' << b << ',' << detail::fmt_num(m.mse) << ',' << detail::fmt_num(m.psnr) << ','
       << detail::fmt_num(m.ssim) << '\n';
  };
  for (const auto& r : rows) line(r.name, r.recon, r.truth, r.metrics);
  const auto s = summarize(rows);
  line("mean", "", "", s.mean);
  line("std", "", "", s.std);
  return os.str();
}

/// Parses a metrics CSV back into per-pair rows; summary rows are dropped.
inline std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  detail::require(line == kMetricsHeader, path.string() + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 6) cells.emplace_back();
    if (cells[0] == "mean" || cells[0] == "std") continue;
    rows.push_back({cells[0], cells[1], cells[2],
                    {std::strtod(cells[3].c_str(), nullptr), std::strtod(cells[4].c_str(), nullptr),
                     std::strtod(cells[5].c_str(), nullptr)}});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Configuration

struct TransducerSettings {
  ArrayKind array_kind = ArrayKind::linear;
  std::size_t num_elements = 32;
  int depth_row = 2;        // linear arrays
  int margin = 2;           // linear arrays
  double radius = 0.0;      // curvilinear, cells; 0 = 0.45 min(H, W)
  double arc = 2.0 * std::numbers::pi;
  double start_angle = 0.0;
  double frequency_hz = 3e5;
  double duration_s = 0.0;  // 0 = round trip across the grid plus the pulse
  double dt_s = 0.0;        // 0 = stability bound at fwi.max_speed
};

struct FdaSettings {
  std::vector<double> betas{0.01, 0.05, 0.09, 0.3};
  SwapMode mode = SwapMode::amplitude;
  Pairing pairing = Pairing::random_seeded;
  std::optional<fs::path> target_dir;  // real ultrasound frames; synthetic speckle when absent
  std::size_t num_synthetic_targets = 2;
};

struct StageToggles {
  bool mam2sos = true;
  bool simulate = true;
  bool invert = true;
  bool adapt = true;
  bool metrics = true;
};

struct PipelineConfig {
  fs::path output_dir = "wavesono_run";
  std::uint64_t seed = 0;
  std::string description;
  StageToggles stages;
  std::optional<fs::path> input_image;  // intensity image; phantom when absent
  PhantomKind phantom_kind = PhantomKind::breast_like;
  std::size_t phantom_size = 128;
  std::optional<fs::path> tissue_table;
  double hu_min = -1000.0;
  double hu_max = 1000.0;
  double grid_spacing = 5e-4;
  TransducerSettings transducer;
  SolverOptions solver;
  FwiConfig fwi{.num_iterations = 5, .init_blur_sigma = 8.0};
  double attenuation_alpha = 10.0;  // 1/m, applied to the ultrasound-style rendering
  FdaSettings fda;
  double dynamic_range = 1.0;
};

namespace detail {

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline std::optional<fs::path> opt_path(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && !j.at(key).is_null()) return fs::path(j.at(key).get<std::string>());
  return std::nullopt;
}

}  // namespace detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
  json j;
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["description"] = c.description;
  j["stages"] = {{"mam2sos", c.stages.mam2sos}, {"simulate", c.stages.simulate}, {"invert", c.stages.invert},
                 {"adapt", c.stages.adapt}, {"metrics", c.stages.metrics}};
  j["input"] = {{"image", opt(c.input_image)},
                {"phantom", {{"kind", to_string(c.phantom_kind)}, {"size", c.phantom_size}}}};
  j["tissue_table"] = opt(c.tissue_table);
  j["hu_range"] = {c.hu_min, c.hu_max};
  j["grid_spacing_m"] = c.grid_spacing;
  const auto& t = c.transducer;
  j["transducer"] = {{"array_kind", to_string(t.array_kind)}, {"num_elements", t.num_elements},
                     {"depth_row", t.depth_row}, {"margin", t.margin}, {"radius_cells", t.radius},
                     {"arc_rad", t.arc}, {"start_angle_rad", t.start_angle}, {"frequency_hz", t.frequency_hz},
                     {"duration_s", t.duration_s}, {"dt_s", t.dt_s}};
  j["solver"] = {{"sponge_width", c.solver.sponge_width}, {"cfl_factor", c.solver.cfl_factor},
                 {"snapshot_stride", c.solver.snapshot_stride}, {"threads", c.solver.threads}};
  j["fwi"] = {{"num_iterations", c.fwi.num_iterations}, {"step_size", c.fwi.step_size},
              {"init_blur_sigma", c.fwi.init_blur_sigma}, {"gradient_smoothing_sigma", c.fwi.gradient_smoothing_sigma},
              {"min_speed", c.fwi.min_speed}, {"max_speed", c.fwi.max_speed},
              {"element_mask_radius", c.fwi.element_mask_radius}};
  j["attenuation_alpha_1_m"] = c.attenuation_alpha;
  j["fda"] = {{"betas", c.fda.betas}, {"mode", to_string(c.fda.mode)},
              {"pairing", c.fda.pairing == Pairing::index ? "index" : "random"},
              {"target_dir", opt(c.fda.target_dir)}, {"num_synthetic_targets", c.fda.num_synthetic_targets}};
  j["metrics"] = {{"dynamic_range", c.dynamic_range}};
  return j;
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    detail::get_if(j, "seed", c.seed);
    detail::get_if(j, "description", c.description);
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      detail::get_if(s, "mam2sos", c.stages.mam2sos);
      detail::get_if(s, "simulate", c.stages.simulate);
      detail::get_if(s, "invert", c.stages.invert);
      detail::get_if(s, "adapt", c.stages.adapt);
      detail::get_if(s, "metrics", c.stages.metrics);
    }
    if (j.contains("input")) {
      const auto& in = j.at("input");
      c.input_image = detail::opt_path(in, "image");
      if (in.contains("phantom")) {
        const auto& p = in.at("phantom");
        if (p.contains("kind")) c.phantom_kind = parse_phantom_kind(p.at("kind").get<std::string>());
        detail::get_if(p, "size", c.phantom_size);
      }
    }
    c.tissue_table = detail::opt_path(j, "tissue_table");
    if (j.contains("hu_range")) {
      c.hu_min = j.at("hu_range").at(0).get<double>();
      c.hu_max = j.at("hu_range").at(1).get<double>();
    }
    detail::get_if(j, "grid_spacing_m", c.grid_spacing);
    if (j.contains("transducer")) {
      const auto& t = j.at("transducer");
      if (t.contains("array_kind")) c.transducer.array_kind = parse_array_kind(t.at("array_kind").get<std::string>());
      detail::get_if(t, "num_elements", c.transducer.num_elements);
      detail::get_if(t, "depth_row", c.transducer.depth_row);
      detail::get_if(t, "margin", c.transducer.margin);
      detail::get_if(t, "radius_cells", c.transducer.radius);
      detail::get_if(t, "arc_rad", c.transducer.arc);
      detail::get_if(t, "start_angle_rad", c.transducer.start_angle);
      detail::get_if(t, "frequency_hz", c.transducer.frequency_hz);
      detail::get_if(t, "duration_s", c.transducer.duration_s);
      detail::get_if(t, "dt_s", c.transducer.dt_s);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      detail::get_if(s, "sponge_width", c.solver.sponge_width);
      detail::get_if(s, "cfl_factor", c.solver.cfl_factor);
      detail::get_if(s, "snapshot_stride", c.solver.snapshot_stride);
      detail::get_if(s, "threads", c.solver.threads);
    }
    if (j.contains("fwi")) {
      const auto& f = j.at("fwi");
      detail::get_if(f, "num_iterations", c.fwi.num_iterations);
      detail::get_if(f, "step_size", c.fwi.step_size);
      detail::get_if(f, "init_blur_sigma", c.fwi.init_blur_sigma);
      detail::get_if(f, "gradient_smoothing_sigma", c.fwi.gradient_smoothing_sigma);
      detail::get_if(f, "min_speed", c.fwi.min_speed);
      detail::get_if(f, "max_speed", c.fwi.max_speed);
      detail::get_if(f, "element_mask_radius", c.fwi.element_mask_radius);
    }
    detail::get_if(j, "attenuation_alpha_1_m", c.attenuation_alpha);
    if (j.contains("fda")) {
      const auto& f = j.at("fda");
      detail::get_if(f, "betas", c.fda.betas);
      if (f.contains("mode")) c.fda.mode = parse_swap_mode(f.at("mode").get<std::string>());
      if (f.contains("pairing")) c.fda.pairing = parse_pairing(f.at("pairing").get<std::string>());
      c.fda.target_dir = detail::opt_path(f, "target_dir");
      detail::get_if(f, "num_synthetic_targets", c.fda.num_synthetic_targets);
    }
    if (j.contains("metrics")) detail::get_if(j.at("metrics"), "dynamic_range", c.dynamic_range);
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("pipeline config: ") + ex.what());
  }
  c.fwi.solver = c.solver;
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  try {
    return pipeline_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ValidationError(path.string() + ": " + ex.what());
  }
}

/// Hash of the normalized configuration, ignoring fields that cannot change any output
/// (output location, description, thread count).
inline std::string config_hash(const PipelineConfig& c) {
  auto j = to_json(c);
  j.erase("output_dir");
  j.erase("description");
  j["solver"].erase("threads");
  return fnv1a_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Manifest

struct FileEntry {
  std::string path;  // relative to output_dir
  std::string hash;
};

struct StageRecord {
  std::string name;
  bool ran = false;
  std::vector<FileEntry> inputs;
  std::vector<FileEntry> outputs;
  double wall_seconds = 0.0;
};

struct RunManifest {
  std::string config_hash;
  std::string software_version = WAVESONO_VERSION;
  std::vector<StageRecord> stages;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["config_hash"] = m.config_hash;
  j["software_version"] = m.software_version;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : m.stages) {
    nlohmann::json js{{"name", s.name}, {"ran", s.ran}, {"wall_seconds", s.wall_seconds}};
    js["inputs"] = nlohmann::json::array();
    js["outputs"] = nlohmann::json::array();
    for (const auto& f : s.inputs) js["inputs"].push_back({{"path", f.path}, {"hash", f.hash}});
    for (const auto& f : s.outputs) js["outputs"].push_back({{"path", f.path}, {"hash", f.hash}});
    j["stages"].push_back(std::move(js));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Stages

namespace detail {

inline std::string beta_tag(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", beta);
  return buf;
}

inline double default_duration(const PipelineConfig& c, std::size_t height) {
  return 2.2 * static_cast<double>(height) * c.grid_spacing / c.fwi.min_speed + 3.0 / c.transducer.frequency_hz;
}

// Collects a stage's outputs so a failure can mark them `.partial`.
class StageContext {
 public:
  StageContext(fs::path root) : root_(std::move(root)) {}

  fs::path path(const std::string& rel) const { return root_ / rel; }

  fs::path output(const std::string& rel) {
    outputs_.push_back(rel);
    fs::create_directories(path(rel).parent_path());
    return path(rel);
  }

  void write_image(const Image& g, const std::string& rel) { save_image(g, output(rel)); }

  void write_text(const std::string& text, const std::string& rel) {
    std::ofstream out(output(rel));
    if (!out) throw ValidationError("cannot write " + path(rel).string());
    out << text;
  }

  const std::vector<std::string>& outputs() const { return outputs_; }

  void mark_partial() const {
    for (const auto& rel : outputs_) {
      std::error_code ec;
      if (fs::exists(path(rel), ec)) fs::rename(path(rel), fs::path(path(rel).string() + ".partial"), ec);
    }
  }

 private:
  fs::path root_;
  std::vector<std::string> outputs_;
};

struct StagePlan {
  std::string name;
  bool enabled = false;
  std::vector<std::string> inputs;        // relative to output_dir
  std::vector<fs::path> external_inputs;  // absolute or cwd-relative
  std::vector<std::string> outputs;
};

inline std::vector<StagePlan> plan_stages(const PipelineConfig& c) {
  std::vector<StagePlan> plan;
  StagePlan mam{"mam2sos", c.stages.mam2sos, {}, {}, {}};
  if (c.input_image) mam.external_inputs.push_back(*c.input_image);
  if (c.tissue_table) mam.external_inputs.push_back(*c.tissue_table);
  mam.outputs = {"mam2sos/mammogram.f32", "mam2sos/mammogram.png", "mam2sos/hu.f32", "mam2sos/sound_speed.f32",
                 "mam2sos/sound_speed.png"};
  plan.push_back(mam);

  plan.push_back({"simulate", c.stages.simulate, {"mam2sos/sound_speed.f32"}, {},
                  {"simulate/record.f32", "simulate/record.json"}});

  plan.push_back({"invert",
                  c.stages.invert,
                  {"simulate/record.f32", "simulate/record.json", "mam2sos/sound_speed.f32"},
                  {},
                  {"invert/initial_model.f32", "invert/model.f32", "invert/objective.csv",
                   "invert/reference_normalized.f32", "invert/initial_normalized.f32", "invert/model_normalized.f32",
                   "invert/ultrasound.f32", "invert/ultrasound.png"}});

  StagePlan adapt{"adapt", c.stages.adapt, {"invert/ultrasound.f32"}, {}, {}};
  if (c.fda.target_dir) {
    adapt.external_inputs.push_back(*c.fda.target_dir);
  } else {
    for (std::size_t k = 0; k < c.fda.num_synthetic_targets; ++k)
      adapt.outputs.push_back("adapt/targets/target_" + std::to_string(k) + ".f32");
  }
  for (double b : c.fda.betas) {
    adapt.outputs.push_back("adapt/ultrasound_beta" + beta_tag(b) + ".f32");
    adapt.outputs.push_back("adapt/ultrasound_beta" + beta_tag(b) + ".png");
  }
  adapt.outputs.push_back("adapt/manifest.json");
  plan.push_back(adapt);

  StagePlan metrics{"metrics", c.stages.metrics, {}, {}, {"metrics/metrics.csv"}};
  for (double b : c.fda.betas) metrics.inputs.push_back("adapt/ultrasound_beta" + beta_tag(b) + ".f32");
  metrics.inputs.insert(metrics.inputs.end(),
                        {"invert/ultrasound.f32", "invert/reference_normalized.f32", "invert/initial_normalized.f32",
                         "invert/model_normalized.f32"});
  plan.push_back(metrics);
  return plan;
}

inline std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".f32")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline void stage_mam2sos(const PipelineConfig& c, StageContext& ctx) {
  Image mammogram;
  if (c.input_image) {
    mammogram = load_image(*c.input_image);
  } else {
    detail::require(!phantom_is_speed(c.phantom_kind),
                    "mam2sos: phantom '" + std::string(to_string(c.phantom_kind)) +
                        "' is a speed map; use breast-like or an input image");
    mammogram = make_phantom(c.phantom_kind, c.phantom_size, c.seed);
  }
  const TissueTable table = c.tissue_table ? load_tissue_table(*c.tissue_table) : default_tissue_table();
  validate(table);
  const Image hu = intensity_to_hu(mammogram, c.hu_min, c.hu_max);
  const Image speed = hu_to_sound_speed(hu, table);
  ctx.write_image(mammogram, "mam2sos/mammogram.f32");
  ctx.write_image(mammogram, "mam2sos/mammogram.png");
  ctx.write_image(hu, "mam2sos/hu.f32");
  ctx.write_image(speed, "mam2sos/sound_speed.f32");
  ctx.write_image(normalize(speed, speed.min(), std::max(speed.max(), speed.min() + 1.0)), "mam2sos/sound_speed.png");
}

inline AcquisitionGeometry pipeline_geometry(const PipelineConfig& c, std::size_t height, std::size_t width) {
  const auto& t = c.transducer;
  AcquisitionGeometry g;
  if (t.array_kind == ArrayKind::linear) {
    g = make_linear_array(t.num_elements, t.depth_row, height, width, t.margin);
  } else {
    const double radius = t.radius > 0.0 ? t.radius : 0.45 * static_cast<double>(std::min(height, width));
    g = make_curvilinear_array(t.num_elements, radius, (height - 1) / 2.0, (width - 1) / 2.0, t.arc, height, width,
                               t.start_angle);
  }
  g.central_frequency = t.frequency_hz;
  g.duration = t.duration_s > 0.0 ? t.duration_s : default_duration(c, height);
  g.dt = t.dt_s > 0.0 ? t.dt_s : cfl_time_step(c.grid_spacing, c.fwi.max_speed, c.solver.cfl_factor);
  return g;
}

inline void stage_simulate(const PipelineConfig& c, StageContext& ctx, std::vector<std::string>& warnings) {
  const Image speed = load_image(ctx.path("mam2sos/sound_speed.f32"));
  const auto model = AcousticModel::from_speed(speed, c.grid_spacing);
  const auto geometry = pipeline_geometry(c, speed.height(), speed.width());
  const WaveSolver solver(model, geometry, c.solver);
  for (const auto& w : solver.warnings()) warnings.push_back("simulate: " + w);
  RecordBundle b;
  b.record = solver.simulate_all_shots();
  b.geometry = geometry;
  b.geometry.dt = solver.dt();
  b.grid_spacing = c.grid_spacing;
  b.model_height = speed.height();
  b.model_width = speed.width();
  b.sponge_width = c.solver.sponge_width;
  save_record(b, ctx.output("simulate/record.f32"));
  ctx.output("simulate/record.json");
}

/// Ultrasound-style rendering of a speed map: normalized to the FWI bounds, then depth-attenuated.
inline Image render_ultrasound(const Image& speed, const PipelineConfig& c) {
  return apply_attenuation(normalize(speed, c.fwi.min_speed, c.fwi.max_speed),
                           AttenuationParams{c.attenuation_alpha, c.grid_spacing});
}

inline void stage_invert(const PipelineConfig& c, StageContext& ctx) {
  const auto bundle = load_record(ctx.path("simulate/record.f32"));
  const Image truth = load_image(ctx.path("mam2sos/sound_speed.f32"));
  detail::require(truth.height() == bundle.model_height && truth.width() == bundle.model_width,
                  "invert: reference model does not match the record grid");
  FwiConfig fwi = c.fwi;
  fwi.solver = c.solver;
  fwi.solver.sponge_width = bundle.sponge_width;
  const auto init = make_initial_model(clamp(truth, fwi.min_speed, fwi.max_speed), fwi.init_blur_sigma,
                                       bundle.grid_spacing);
  const auto result = invert(bundle.record, bundle.geometry, fwi, init);

  std::string csv = "iteration,objective\n";
  for (std::size_t i = 0; i < result.state.objective_history.size(); ++i)
    csv += std::to_string(i) + "," + fmt_num(result.state.objective_history[i]) + "\n";
  ctx.write_image(init.speed, "invert/initial_model.f32");
  ctx.write_image(result.model.speed, "invert/model.f32");
  ctx.write_text(csv, "invert/objective.csv");
  ctx.write_image(normalize(truth, fwi.min_speed, fwi.max_speed), "invert/reference_normalized.f32");
  ctx.write_image(normalize(init.speed, fwi.min_speed, fwi.max_speed), "invert/initial_normalized.f32");
  ctx.write_image(normalize(result.model.speed, fwi.min_speed, fwi.max_speed), "invert/model_normalized.f32");
  const Image us = render_ultrasound(result.model.speed, c);
  ctx.write_image(us, "invert/ultrasound.f32");
  ctx.write_image(us, "invert/ultrasound.png");
}

inline void stage_adapt(const PipelineConfig& c, StageContext& ctx) {
  const Image us = load_image(ctx.path("invert/ultrasound.f32"));
  std::vector<Image> targets;
  std::vector<std::string> target_names;
  if (c.fda.target_dir) {
    for (const auto& p : list_images(*c.fda.target_dir)) {
      targets.push_back(load_image(p));
      target_names.push_back(p.string());
    }
    detail::require(!targets.empty(), "adapt: no images in " + c.fda.target_dir->string());
  } else {
    for (std::size_t k = 0; k < c.fda.num_synthetic_targets; ++k) {
      const std::string rel = "adapt/targets/target_" + std::to_string(k) + ".f32";
      targets.push_back(speckle_image(us.height(), us.width(), c.seed * 1000003ull + k));
      ctx.write_image(targets.back(), rel);
      target_names.push_back(rel);
    }
  }
  const auto adapted = adapt_batch({us}, targets, c.fda.betas, c.fda.mode, c.fda.pairing, c.seed, c.solver.threads);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& a : adapted) {
    const std::string stem = "adapt/ultrasound_beta" + beta_tag(a.beta);
    ctx.write_image(a.image, stem + ".f32");
    ctx.write_image(a.image, stem + ".png");
    manifest.push_back({{"source", "invert/ultrasound.f32"},
                        {"target", target_names[a.target_index]},
                        {"beta", a.beta},
                        {"mode", to_string(c.fda.mode)},
                        {"seed", c.seed},
                        {"output", stem + ".f32"}});
  }
  ctx.write_text(manifest.dump(2) + "\n", "adapt/manifest.json");
}

inline void stage_metrics(const PipelineConfig& c, StageContext& ctx) {
  std::vector<MetricsPair> pairs;
  for (double b : c.fda.betas)
    pairs.push_back({"adapt_beta" + beta_tag(b), ctx.path("adapt/ultrasound_beta" + beta_tag(b) + ".f32"),
                     ctx.path("invert/ultrasound.f32")});
  pairs.push_back({"fwi_initial", ctx.path("invert/initial_normalized.f32"),
                   ctx.path("invert/reference_normalized.f32")});
  pairs.push_back({"fwi_model", ctx.path("invert/model_normalized.f32"), ctx.path("invert/reference_normalized.f32")});
  auto rows = report_metrics(pairs, c.dynamic_range);
  for (auto& r : rows) {
    r.recon = fs::relative(r.recon, ctx.path("")).generic_string();
    r.truth = fs::relative(r.truth, ctx.path("")).generic_string();
  }
  ctx.write_text(metrics_csv(rows), "metrics/metrics.csv");
}

}  // namespace detail

/// Checks paths and ranges; every enabled stage's inputs must come from an earlier stage or exist on disk.
inline void validate(const PipelineConfig& c) {
  for (double b : c.fda.betas) detail::require(b >= 0.0 && b <= 1.0, "config: beta outside [0, 1]");
  detail::require(!c.fda.betas.empty(), "config: empty beta list");
  detail::require(c.hu_max > c.hu_min, "config: hu_range must be increasing");
  detail::require(c.grid_spacing > 0.0, "config: grid spacing must be positive");
  detail::require(c.dynamic_range > 0.0, "config: dynamic range must be positive");
  c.fwi.validate();
  if (c.stages.mam2sos && !c.input_image)
    detail::require(c.phantom_size >= 32, "config: phantom size must be >= 32");

  std::set<std::string> available;
  for (const auto& stage : detail::plan_stages(c)) {
    if (!stage.enabled) continue;
    for (const auto& p : stage.external_inputs)
      detail::require(fs::exists(p), "config: stage '" + stage.name + "' input " + p.string() + " does not exist");
    for (const auto& rel : stage.inputs)
      detail::require(available.count(rel) || fs::exists(c.output_dir / rel),
                      "config: stage '" + stage.name + "' needs " + rel +
                          ", which no enabled stage produces and which does not exist");
    available.insert(stage.outputs.begin(), stage.outputs.end());
  }
}

/**
 * Runs mam2sos -> simulate -> invert -> adapt -> metrics over files in output_dir.
 *
 * A failing stage renames whatever it already wrote with a `.partial` suffix and
 * rethrows with the stage name prefixed. manifest.json is written on success.
 */
inline RunManifest run_pipeline(const PipelineConfig& config,
                                const std::function<void(const std::string&)>& log = {}) {
  validate(config);
  fs::create_directories(config.output_dir);
  RunManifest manifest;
  manifest.config_hash = config_hash(config);
  std::vector<std::string> warnings;

  for (const auto& stage : detail::plan_stages(config)) {
    StageRecord rec;
    rec.name = stage.name;
    rec.ran = stage.enabled;
    if (!stage.enabled) {
      manifest.stages.push_back(rec);
      continue;
    }
    if (log) log("stage " + stage.name);
    for (const auto& rel : stage.inputs) rec.inputs.push_back({rel, file_hash(config.output_dir / rel)});
    detail::StageContext ctx(config.output_dir);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (stage.name == "mam2sos") detail::stage_mam2sos(config, ctx);
      else if (stage.name == "simulate") detail::stage_simulate(config, ctx, warnings);
      else if (stage.name == "invert") detail::stage_invert(config, ctx);
      else if (stage.name == "adapt") detail::stage_adapt(config, ctx);
      else if (stage.name == "metrics") detail::stage_metrics(config, ctx);
    } catch (const NumericalError& e) {
      ctx.mark_partial();
      throw NumericalError("stage '" + stage.name + "': " + e.what());
    } catch (const std::exception& e) {
      ctx.mark_partial();
      throw ValidationError("stage '" + stage.name + "': " + e.what());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& rel : ctx.outputs()) rec.outputs.push_back({rel, file_hash(config.output_dir / rel)});
    manifest.stages.push_back(std::move(rec));
  }
  for (const auto& w : warnings)
    if (log) log("warning: " + w);

  std::ofstream out(config.output_dir / "manifest.json");
  if (!out) throw ValidationError("cannot write manifest");
  out << to_json(manifest).dump(2) << '\n';
  return manifest;
}

}  // namespace wavesono
