#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "test_util.hpp"
#include "wavesono/pipeline.hpp"

using namespace wavesono;
using wavesono::test::TempDir;

namespace {

PipelineConfig small_config(const std::filesystem::path& out) {
  PipelineConfig c;
  c.output_dir = out;
  c.seed = 3;
  c.phantom_size = 48;
  c.transducer.num_elements = 8;
  c.solver.sponge_width = 16;
  c.fwi.num_iterations = 2;
  c.fwi.init_blur_sigma = 3.0;
  c.fda.betas = {0.01, 0.09};
  return c;
}

std::map<std::string, std::string> output_hashes(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const auto& s : m.stages)
    for (const auto& f : s.outputs) out[f.path] = f.hash;
  return out;
}

}  // namespace

TEST(Pipeline, FullRunManifest) {
  TempDir dir("pipe");
  const auto config = small_config(dir / "run");
  const auto m = run_pipeline(config);
  ASSERT_EQ(m.stages.size(), 5u);
  const std::vector<std::string> names{"mam2sos", "simulate", "invert", "adapt", "metrics"};
  std::set<std::string> files;
  std::size_t count = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m.stages[i].name, names[i]);
    EXPECT_TRUE(m.stages[i].ran);
    EXPECT_GE(m.stages[i].wall_seconds, 0.0);
    for (const auto& f : m.stages[i].outputs) {
      EXPECT_TRUE(std::filesystem::exists(config.output_dir / f.path)) << f.path;
      files.insert(f.path);
      ++count;
    }
  }
  EXPECT_GE(count, 5u);
  EXPECT_EQ(files.size(), count);
  EXPECT_EQ(m.config_hash, config_hash(config));
  EXPECT_EQ(m.software_version, std::string(WAVESONO_VERSION));
  EXPECT_TRUE(std::filesystem::exists(config.output_dir / "manifest.json"));

  const auto rows = read_metrics_csv(config.output_dir / "metrics/metrics.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].name, "adapt_beta0.01");
  EXPECT_EQ(rows[3].name, "fwi_model");

  std::ifstream in(config.output_dir / "invert/objective.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1 + 3);
}

TEST(Pipeline, RerunIsBitIdentical) {
  TempDir dir("rerun");
  const auto a = run_pipeline(small_config(dir / "a"));
  const auto b = run_pipeline(small_config(dir / "b"));
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_EQ(output_hashes(a), output_hashes(b));
}

TEST(Pipeline, ResumeReproducesDeletedStage) {
  TempDir dir("resume");
  auto config = small_config(dir / "run");
  const auto full = run_pipeline(config);
  for (const auto& f : full.stages[2].outputs) std::filesystem::remove(config.output_dir / f.path);
  config.stages = {false, false, true, false, false};
  const auto again = run_pipeline(config);
  ASSERT_EQ(again.stages[2].outputs.size(), full.stages[2].outputs.size());
  for (std::size_t i = 0; i < full.stages[2].outputs.size(); ++i)
    EXPECT_EQ(again.stages[2].outputs[i].hash, full.stages[2].outputs[i].hash);
  EXPECT_FALSE(again.stages[0].ran);
  EXPECT_EQ(again.stages[2].inputs.size(), 3u);
}

TEST(Pipeline, MissingInputsFailBeforeCompute) {
  TempDir dir("val");
  auto config = small_config(dir / "run");
  config.stages.adapt = false;
  try {
    run_pipeline(config);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("metrics"), std::string::npos);
  }
  EXPECT_FALSE(std::filesystem::exists(config.output_dir / "mam2sos"));
}

TEST(Pipeline, ConfigValidation) {
  TempDir dir("cv");
  auto config = small_config(dir / "run");
  config.fda.betas = {0.1, 1.2};
  EXPECT_THROW(validate(config), ValidationError);
  config = small_config(dir / "run");
  config.input_image = dir / "nope.png";
  EXPECT_THROW(validate(config), ValidationError);
  config = small_config(dir / "run");
  config.fda.target_dir = dir / "no_targets";
  EXPECT_THROW(validate(config), ValidationError);
  config = small_config(dir / "run");
  config.phantom_kind = PhantomKind::two_inclusion;
  EXPECT_THROW(run_pipeline(config), ValidationError);
}

TEST(Pipeline, FailedStageLeavesPartialOutputs) {
  TempDir dir("partial");
  auto config = small_config(dir / "run");
  config.stages.metrics = false;
  // a directory where the second adapted image should go makes the write fail midway
  std::filesystem::create_directories(config.output_dir / "adapt/ultrasound_beta0.09.f32");
  try {
    run_pipeline(config);
    FAIL() << "expected failure";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'adapt'"), std::string::npos);
  }
  EXPECT_TRUE(std::filesystem::exists(config.output_dir / "adapt/ultrasound_beta0.01.f32.partial"));
  EXPECT_FALSE(std::filesystem::exists(config.output_dir / "adapt/ultrasound_beta0.01.f32"));
  EXPECT_TRUE(std::filesystem::exists(config.output_dir / "invert/model.f32"));
}

TEST(Pipeline, CurvilinearRingAndTargetDirectory) {
  TempDir dir("ring");
  auto config = small_config(dir / "run");
  config.transducer.array_kind = ArrayKind::curvilinear;
  config.transducer.num_elements = 12;
  config.fwi.num_iterations = 1;
  std::filesystem::create_directories(dir / "targets");
  save_image(speckle_image(48, 48, 1), dir / "targets" / "a.png");
  save_image(speckle_image(48, 48, 2), dir / "targets" / "b.f32");
  config.fda.target_dir = dir / "targets";
  const auto m = run_pipeline(config);
  const auto rec = load_record(config.output_dir / "simulate/record.f32");
  EXPECT_EQ(rec.geometry.array_kind, ArrayKind::curvilinear);
  EXPECT_EQ(rec.record.num_shots, 12u);
  std::ifstream in(config.output_dir / "adapt/manifest.json");
  const auto j = nlohmann::json::parse(in);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_NE(j[0]["target"].get<std::string>().find("targets"), std::string::npos);
}

TEST(ConfigHash, ChangesOnlyWithSemantics) {
  const auto base = small_config("x");
  const auto h = config_hash(base);
  auto c = base;
  c.output_dir = "elsewhere";
  c.description = "note";
  c.solver.threads = 7;
  EXPECT_EQ(config_hash(c), h);
  c = base;
  c.seed = 4;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.fda.betas.push_back(0.3);
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.fwi.step_size *= 2;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.transducer.frequency_hz = 2.5e5;
  EXPECT_NE(config_hash(c), h);
}

TEST(ConfigJson, RoundTrip) {
  auto c = small_config("out");
  c.tissue_table = "table.json";
  c.fda.mode = SwapMode::complex;
  c.fda.pairing = Pairing::index;
  c.transducer.array_kind = ArrayKind::curvilinear;
  const auto back = pipeline_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json{{"seed", "abc"}}), ValidationError);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json{{"fda", {{"mode", "phase"}}}}), ValidationError);
}

TEST(MetricsReport, RowsSummaryAndRoundTrip) {
  TempDir dir("mr");
  const Image a = test::random_image(16, 16, 1), b = test::random_image(16, 16, 2), c = test::random_image(16, 16, 3);
  save_image(a, dir / "a.f32");
  save_image(b, dir / "b.f32");
  save_image(c, dir / "c.f32");
  const auto rows = report_metrics({{"same", dir / "a.f32", dir / "a.f32"},
                                    {"ab", dir / "a.f32", dir / "b.f32"},
                                    {"ac", dir / "a.f32", dir / "c.f32"}});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].metrics.mse, 0.0);
  EXPECT_TRUE(std::isinf(rows[0].metrics.psnr));
  EXPECT_NEAR(rows[0].metrics.ssim, 1.0, 1e-12);

  const std::vector<MetricsRow> two(rows.begin() + 1, rows.end());
  const auto s = summarize(two);
  EXPECT_NEAR(s.mean.mse, 0.5 * (two[0].metrics.mse + two[1].metrics.mse), 1e-15);
  EXPECT_NEAR(s.mean.psnr, 0.5 * (two[0].metrics.psnr + two[1].metrics.psnr), 1e-12);
  EXPECT_NEAR(s.std.ssim, 0.5 * std::abs(two[0].metrics.ssim - two[1].metrics.ssim), 1e-12);

  {
    std::ofstream out(dir / "m.csv");
    out << metrics_csv(rows);
  }
  const auto back = read_metrics_csv(dir / "m.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].name, rows[i].name);
    EXPECT_NEAR(back[i].metrics.mse, rows[i].metrics.mse, 1e-9);
    EXPECT_NEAR(back[i].metrics.ssim, rows[i].metrics.ssim, 1e-9);
    if (std::isinf(rows[i].metrics.psnr))
      EXPECT_TRUE(std::isinf(back[i].metrics.psnr));
    else
      EXPECT_NEAR(back[i].metrics.psnr, rows[i].metrics.psnr, 1e-9);
  }
  EXPECT_THROW(report_metrics({{"bad", dir / "a.f32", dir / "missing.f32"}}), ValidationError);
}

TEST(RecordIo, RoundTrip) {
  TempDir dir("rec");
  auto g = make_linear_array(4, 2, 32, 32, 2);
  g.duration = 1e-5;
  const WaveSolver s(AcousticModel::from_speed(Image(32, 32, 1500.0), 5e-4), g, {.sponge_width = 8});
  RecordBundle b{s.simulate_all_shots(), g, 5e-4, 32, 32, 8};
  b.geometry.dt = s.dt();
  save_record(b, dir / "r.f32");
  const auto back = load_record(dir / "r.f32");
  EXPECT_TRUE(back.record.same_layout(b.record));
  EXPECT_EQ(back.record.dt, b.record.dt);
  EXPECT_EQ(back.geometry.elements, g.elements);
  EXPECT_EQ(back.sponge_width, 8);
  for (std::size_t i = 0; i < b.record.traces.size(); ++i)
    EXPECT_EQ(back.record.traces[i], static_cast<double>(static_cast<float>(b.record.traces[i])));
  std::filesystem::remove(dir / "r.json");
  EXPECT_THROW(load_record(dir / "r.f32"), ValidationError);
}
