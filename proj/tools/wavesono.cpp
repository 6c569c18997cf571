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

// wavesono command line: one subcommand per pipeline stage plus the full pipeline.
// Exit codes: 0 ok, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wavesono/wavesono.hpp"

namespace fs = std::filesystem;
using namespace wavesono;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = s.find(',', pos);
    const auto tok = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("bad number '" + tok + "' in list '" + s + "'");
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------

void add_phantom(CLI::App& app, const Globals& g) {
  auto* cmd = app.add_subcommand("phantom", "Write a synthetic phantom");
  auto kind = std::make_shared<std::string>("two-inclusion");
  auto size = std::make_shared<std::size_t>(64);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--kind", *kind, "two-inclusion | layered | breast-like")->capture_default_str();
  cmd->add_option("--size", *size, "Side length in pixels")->capture_default_str();
  cmd->add_option("-o,--out", *out, "Output image (.f32, .png, .pgm)")->required();
  cmd->callback([=, &g] {
    save_image(make_phantom(parse_phantom_kind(*kind), *size, g.seed.value_or(0)), *out);
  });
}

void add_mam2sos(CLI::App& app) {
  struct Opts {
    std::string input, out, hu_out, table;
    std::vector<double> hu_range{-1000.0, 1000.0};
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("mam2sos", "Convert an X-ray intensity image to a speed-of-sound map");
  cmd->add_option("input", o->input, "Intensity image in [0, 1]")->required();
  cmd->add_option("-o,--out", o->out, "Speed-of-sound map (m/s)")->required();
  cmd->add_option("--hu-out", o->hu_out, "Also write the HU map (.f32)");
  cmd->add_option("--tissue-table", o->table, "Tissue table JSON");
  cmd->add_option("--hu-range", o->hu_range, "HU mapped from intensity 0 and 1")->expected(2)->delimiter(',');
  cmd->callback([o] {
    const TissueTable table = o->table.empty() ? default_tissue_table() : load_tissue_table(o->table);
    validate(table);
    const Image hu = intensity_to_hu(load_image(o->input), o->hu_range[0], o->hu_range[1]);
    if (!o->hu_out.empty()) save_image(hu, o->hu_out);
    save_image(hu_to_sound_speed(hu, table), o->out);
  });
}

struct GeometryOpts {
  std::string array = "linear";
  std::size_t elements = 16;
  int depth_row = 2;
  int margin = 2;
  double radius = 0.0;
  double arc = 2.0 * std::numbers::pi;
  double frequency = 3e5;
  double duration = 0.0;
  double dt = 0.0;
  double dx = 5e-4;
  double max_speed = 1700.0;
  int sponge = 40;
  unsigned threads = 0;
};

void add_geometry_flags(CLI::App* cmd, GeometryOpts& o) {
  cmd->add_option("--array", o.array, "linear | curvilinear")->capture_default_str();
  cmd->add_option("--elements", o.elements, "Number of transducer elements")->capture_default_str();
  cmd->add_option("--depth-row", o.depth_row, "Row of a linear array")->capture_default_str();
  cmd->add_option("--margin", o.margin, "Columns left free at each side of a linear array")->capture_default_str();
  cmd->add_option("--radius", o.radius, "Curvilinear radius in cells (0: 0.45 min side)");
  cmd->add_option("--arc", o.arc, "Curvilinear arc in radians");
  cmd->add_option("--frequency", o.frequency, "Ricker central frequency (Hz)")->capture_default_str();
  cmd->add_option("--duration", o.duration, "Record length (s); 0 picks a round trip");
  cmd->add_option("--dt", o.dt, "Time step (s); 0 picks the stability bound at --max-speed");
  cmd->add_option("--grid-spacing", o.dx, "Cell size (m)")->capture_default_str();
  cmd->add_option("--max-speed", o.max_speed, "Speed used for the default time step")->capture_default_str();
  cmd->add_option("--sponge", o.sponge, "Absorbing layer width (cells)")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0: hardware)");
}

AcquisitionGeometry build_geometry(const GeometryOpts& o, std::size_t h, std::size_t w) {
  PipelineConfig c;
  c.grid_spacing = o.dx;
  c.fwi.max_speed = o.max_speed;
  c.transducer.array_kind = parse_array_kind(o.array);
  c.transducer.num_elements = o.elements;
  c.transducer.depth_row = o.depth_row;
  c.transducer.margin = o.margin;
  c.transducer.radius = o.radius;
  c.transducer.arc = o.arc;
  c.transducer.frequency_hz = o.frequency;
  c.transducer.duration_s = o.duration;
  c.transducer.dt_s = o.dt;
  return detail::pipeline_geometry(c, h, w);
}

void add_simulate(CLI::App& app) {
  struct Opts : GeometryOpts {
    std::string model, out;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("simulate", "Simulate every shot over a speed map");
  cmd->add_option("model", o->model, "Speed-of-sound map (m/s)")->required();
  cmd->add_option("-o,--out", o->out, "Trace file (.f32); a .json sidecar is written next to it")->required();
  add_geometry_flags(cmd, *o);
  cmd->callback([o] {
    const Image speed = load_image(o->model);
    const auto geometry = build_geometry(*o, speed.height(), speed.width());
    SolverOptions opts;
    opts.sponge_width = o->sponge;
    opts.threads = o->threads;
    const WaveSolver solver(AcousticModel::from_speed(speed, o->dx), geometry, opts);
    for (const auto& w : solver.warnings()) std::cerr << "warning: " << w << '\n';
    RecordBundle b{solver.simulate_all_shots(), geometry, o->dx, speed.height(), speed.width(), o->sponge};
    b.geometry.dt = solver.dt();
    save_record(b, o->out);
  });
}

void add_invert(CLI::App& app) {
  struct Opts {
    std::string record, init, out, objective = "-";
    FwiConfig fwi;
    unsigned threads = 0;
    bool quiet = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("invert", "Full-waveform inversion of a recorded shot set");
  cmd->add_option("record", o->record, "Trace file written by simulate")->required();
  cmd->add_option("--init", o->init, "Starting speed map; blurred by --blur-sigma")->required();
  cmd->add_option("-o,--out", o->out, "Final speed map (.f32)")->required();
  cmd->add_option("--objective-csv", o->objective, "Per-iteration objective CSV ('-' for stdout)");
  cmd->add_option("--iterations", o->fwi.num_iterations)->capture_default_str();
  cmd->add_option("--step", o->fwi.step_size, "Max relative slowness-squared change per iteration")
      ->capture_default_str();
  cmd->add_option("--blur-sigma", o->fwi.init_blur_sigma, "Gaussian blur of the starting map (px)")
      ->capture_default_str();
  cmd->add_option("--gradient-sigma", o->fwi.gradient_smoothing_sigma, "Gradient smoothing (px)");
  cmd->add_option("--min-speed", o->fwi.min_speed)->capture_default_str();
  cmd->add_option("--max-speed", o->fwi.max_speed)->capture_default_str();
  cmd->add_option("--threads", o->threads, "Worker threads (0: hardware)");
  cmd->add_flag("-q,--quiet", o->quiet, "No progress on stderr");
  cmd->callback([o] {
    const auto bundle = load_record(o->record);
    const Image start = load_image(o->init);
    detail::require(start.height() == bundle.model_height && start.width() == bundle.model_width,
                    "invert: starting model does not match the record grid");
    FwiConfig fwi = o->fwi;
    fwi.solver.sponge_width = bundle.sponge_width;
    fwi.solver.threads = o->threads;
    const auto init = make_initial_model(clamp(start, fwi.min_speed, fwi.max_speed), fwi.init_blur_sigma,
                                         bundle.grid_spacing);
    const bool quiet = o->quiet;
    const auto result = invert(bundle.record, bundle.geometry, fwi, init, [quiet](const FwiState& s) {
      if (!quiet) std::cerr << "iteration " << s.iteration << " objective " << s.objective_history.back() << '\n';
    });
    save_image(result.model.speed, o->out, ImageFormat::f32_raw);
    std::string csv = "iteration,objective\n";
    for (std::size_t i = 0; i < result.state.objective_history.size(); ++i)
      csv += std::to_string(i) + "," + detail::fmt_num(result.state.objective_history[i]) + "\n";
    write_text(o->objective, csv);
  });
}

void add_adapt(CLI::App& app, const Globals& g) {
  struct Opts {
    std::string source_dir, target_dir, out_dir, mode = "amplitude", pairing = "random";
    std::vector<double> betas{0.01};
    unsigned threads = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("adapt", "Fourier domain adaptation of simulated images towards real ones");
  cmd->add_option("--source-dir", o->source_dir, "Simulated images")->required();
  cmd->add_option("--target-dir", o->target_dir, "Target-domain images")->required();
  cmd->add_option("-o,--out-dir", o->out_dir, "Output directory")->required();
  cmd->add_option("--beta", o->betas, "Low-band size; repeat or comma-separate for a sweep")->delimiter(',');
  cmd->add_option("--mode", o->mode, "amplitude | complex")->capture_default_str();
  cmd->add_option("--pairing", o->pairing, "random | index")->capture_default_str();
  cmd->add_option("--threads", o->threads, "Worker threads (0: hardware)");
  cmd->callback([o, &g] {
    const auto src_paths = detail::list_images(o->source_dir);
    const auto tgt_paths = detail::list_images(o->target_dir);
    detail::require(!src_paths.empty(), "adapt: no images in " + o->source_dir);
    detail::require(!tgt_paths.empty(), "adapt: no images in " + o->target_dir);
    std::vector<Image> sources, targets;
    for (const auto& p : src_paths) sources.push_back(load_image(p));
    for (const auto& p : tgt_paths) targets.push_back(load_image(p));
    const auto mode = parse_swap_mode(o->mode);
    const auto seed = g.seed.value_or(0);
    const auto adapted = adapt_batch(sources, targets, o->betas, mode, parse_pairing(o->pairing), seed, o->threads);
    fs::create_directories(o->out_dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& a : adapted) {
      const auto name = src_paths[a.source_index].stem().string() + "_beta" + detail::beta_tag(a.beta) + ".f32";
      save_image(a.image, fs::path(o->out_dir) / name);
      manifest.push_back({{"source", src_paths[a.source_index].string()},
                          {"target", tgt_paths[a.target_index].string()},
                          {"beta", a.beta},
                          {"mode", to_string(mode)},
                          {"seed", seed},
                          {"output", name}});
    }
    write_text(fs::path(o->out_dir) / "manifest.json", manifest.dump(2) + "\n");
  });
}

void add_losses(CLI::App& app) {
  struct Opts {
    std::string a, b, weights = "0,10,1", perceptual = "pyramid";
    double adversarial = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("losses", "Reconstruction losses between two images as JSON");
  cmd->add_option("recon", o->a)->required();
  cmd->add_option("truth", o->b)->required();
  cmd->add_option("--weights", o->weights, "alpha1,alpha2,alpha3")->capture_default_str();
  cmd->add_option("--perceptual", o->perceptual, "pyramid | laplacian | wavelet | none")->capture_default_str();
  cmd->add_option("--adversarial", o->adversarial, "Adversarial term value")->capture_default_str();
  cmd->callback([o] {
    const auto w = parse_list(o->weights);
    detail::require(w.size() == 3, "losses: --weights needs three values");
    const LossWeights weights{w[0], w[1], w[2]};
    const auto r = loss_report(load_image(o->a), load_image(o->b), weights, perceptual_slot(o->perceptual),
                               o->adversarial);
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    const nlohmann::json j{{"l1", num(r.l1)},
                           {"laplacian", num(r.laplacian)},
                           {"wavelet", num(r.wavelet)},
                           {"adversarial", num(r.adversarial)},
                           {"perceptual", num(r.perceptual)},
                           {"total", num(r.total)},
                           {"weights", {weights.alpha1, weights.alpha2, weights.alpha3}}};
    std::cout << j.dump(2) << '\n';
  });
}

void add_metrics(CLI::App& app) {
  struct Opts {
    std::vector<std::string> pairs;
    std::string recon_dir, truth_dir, out = "-";
    double dynamic_range = 1.0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("metrics", "MSE, PSNR and SSIM report over image pairs");
  cmd->add_option("pairs", o->pairs, "recon truth [recon truth ...]");
  cmd->add_option("--recon-dir", o->recon_dir, "Pair files by name with --truth-dir");
  cmd->add_option("--truth-dir", o->truth_dir);
  cmd->add_option("-o,--out", o->out, "CSV path ('-' for stdout)");
  cmd->add_option("--dynamic-range", o->dynamic_range)->capture_default_str();
  cmd->callback([o] {
    std::vector<MetricsPair> pairs;
    detail::require(o->pairs.size() % 2 == 0, "metrics: positional arguments must come in recon/truth pairs");
    for (std::size_t i = 0; i < o->pairs.size(); i += 2)
      pairs.push_back({fs::path(o->pairs[i]).stem().string(), o->pairs[i], o->pairs[i + 1]});
    detail::require(o->recon_dir.empty() == o->truth_dir.empty(), "metrics: --recon-dir needs --truth-dir");
    if (!o->recon_dir.empty()) {
      for (const auto& p : detail::list_images(o->recon_dir)) {
        const auto truth = fs::path(o->truth_dir) / p.filename();
        detail::require(fs::exists(truth), "metrics: no truth image " + truth.string());
        pairs.push_back({p.stem().string(), p, truth});
      }
    }
    write_text(o->out, metrics_csv(report_metrics(pairs, o->dynamic_range)));
  });
}

void add_pipeline(CLI::App& app, const Globals& g) {
  struct Opts {
    std::string output_dir;
    bool quiet = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("pipeline", "Run the configured stages (needs --config)");
  cmd->add_option("--output-dir", o->output_dir, "Override output_dir from the config");
  cmd->add_flag("-q,--quiet", o->quiet);
  cmd->callback([o, &g] {
    detail::require(g.config.has_value(), "pipeline: --config is required");
    auto config = load_pipeline_config(*g.config);
    if (g.seed) config.seed = *g.seed;
    if (!o->output_dir.empty()) config.output_dir = o->output_dir;
    const bool quiet = o->quiet;
    const auto manifest = run_pipeline(config, [quiet](const std::string& msg) {
      if (!quiet) std::cerr << msg << '\n';
    });
    if (!quiet) std::cerr << "config hash " << manifest.config_hash << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavesono: X-ray to ultrasound simulation, inversion and domain adaptation"};
  app.set_version_flag("--version", std::string(WAVESONO_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for phantoms, pairing and the pipeline");
  app.add_option("--config", g.config, "Pipeline config JSON");

  add_phantom(app, g);
  add_mam2sos(app);
  add_simulate(app);
  add_invert(app);
  add_adapt(app, g);
  add_losses(app);
  add_metrics(app);
  add_pipeline(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
