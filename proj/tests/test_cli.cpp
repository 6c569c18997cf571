#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "test_util.hpp"
#include "wavesono/wavesono.hpp"

#ifdef WAVESONO_CLI_PATH

using namespace wavesono;
using wavesono::test::TempDir;

namespace {

int run(const std::string& args, const std::filesystem::path& stdout_file = {}) {
  std::string cmd = std::string(WAVESONO_CLI_PATH) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > '" + stdout_file.string() + "'";
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("phantom --kind sphere -o /tmp/x.f32"), 2);
  EXPECT_EQ(run("--version"), 0);
}

TEST(Cli, PhantomAndMam2sos) {
  TempDir dir("cli1");
  ASSERT_EQ(run("--seed 4 phantom --kind breast-like --size 40 -o " + q(dir / "m.f32")), 0);
  const Image m = load_image(dir / "m.f32");
  const Image ref = make_phantom(PhantomKind::breast_like, 40, 4);
  ASSERT_EQ(m.size(), ref.size());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m[i], static_cast<double>(static_cast<float>(ref[i])));
  ASSERT_EQ(run("mam2sos " + q(dir / "m.f32") + " -o " + q(dir / "c.f32") + " --hu-out " + q(dir / "hu.f32")), 0);
  const Image c = load_image(dir / "c.f32");
  const Image expect = intensity_to_sound_speed(load_image(dir / "m.f32"), default_tissue_table());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], static_cast<double>(static_cast<float>(expect[i])));
  EXPECT_EQ(run("mam2sos " + q(dir / "m.f32") + " -o " + q(dir / "x.f32") + " --hu-range 10,-10"), 2);
  EXPECT_EQ(run("mam2sos " + q(dir / "missing.png") + " -o " + q(dir / "x.f32")), 2);
}

TEST(Cli, LossesJson) {
  TempDir dir("cli2");
  const Image a = test::random_image(16, 16, 1), b = test::random_image(16, 16, 2);
  save_image(a, dir / "a.png");
  save_image(b, dir / "b.png");
  ASSERT_EQ(run("losses " + q(dir / "a.png") + " " + q(dir / "b.png") + " --weights 0,10,1", dir / "out.json"), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out.json"));
  const auto r = loss_report(load_image(dir / "a.png"), load_image(dir / "b.png"), {0.0, 10.0, 1.0});
  EXPECT_NEAR(j["l1"].get<double>(), r.l1, 1e-12);
  EXPECT_NEAR(j["laplacian"].get<double>(), r.laplacian, 1e-12);
  EXPECT_NEAR(j["wavelet"].get<double>(), r.wavelet, 1e-12);
  EXPECT_NEAR(j["total"].get<double>(), r.total, 1e-12);
  EXPECT_EQ(run("losses " + q(dir / "a.png") + " " + q(dir / "b.png") + " --weights 0,10"), 2);
}

TEST(Cli, MetricsCsv) {
  TempDir dir("cli3");
  save_image(test::random_image(16, 16, 3), dir / "a.f32");
  save_image(test::random_image(16, 16, 4), dir / "b.f32");
  ASSERT_EQ(run("metrics " + q(dir / "a.f32") + " " + q(dir / "a.f32") + " " + q(dir / "a.f32") + " " +
                q(dir / "b.f32") + " -o " + q(dir / "m.csv")),
            0);
  const auto rows = read_metrics_csv(dir / "m.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].metrics.mse, 0.0);
  EXPECT_TRUE(std::isinf(rows[0].metrics.psnr));
  EXPECT_NEAR(rows[1].metrics.ssim, ssim(load_image(dir / "a.f32"), load_image(dir / "b.f32")), 1e-12);
  EXPECT_NE(slurp(dir / "m.csv").find("\nmean,"), std::string::npos);
  EXPECT_EQ(run("metrics " + q(dir / "a.f32")), 2);
}

TEST(Cli, SimulateInvert) {
  TempDir dir("cli4");
  save_image(make_phantom(PhantomKind::two_inclusion, 32, 0), dir / "true.f32");
  ASSERT_EQ(run("simulate " + q(dir / "true.f32") + " -o " + q(dir / "rec.f32") +
                " --elements 6 --sponge 10 --duration 2.5e-5"),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "rec.json"));
  ASSERT_EQ(run("invert " + q(dir / "rec.f32") + " --init " + q(dir / "true.f32") + " -o " + q(dir / "model.f32") +
                " --iterations 2 --blur-sigma 3 --objective-csv " + q(dir / "obj.csv")),
            0);
  EXPECT_EQ(load_image(dir / "model.f32").height(), 32u);
  std::istringstream csv(slurp(dir / "obj.csv"));
  std::string line;
  int n = 0;
  while (std::getline(csv, line)) ++n;
  EXPECT_EQ(n, 4);

  // corrupt one trace sample: non-finite objective is a numerical failure
  Image traces = load_image(dir / "rec.f32");
  traces[10] = std::nan("");
  save_image(traces, dir / "rec.f32");
  EXPECT_EQ(run("invert " + q(dir / "rec.f32") + " --init " + q(dir / "true.f32") + " -o " + q(dir / "m2.f32") +
                " --iterations 1 -q"),
            3);
}

TEST(Cli, AdaptDirectories) {
  TempDir dir("cli5");
  std::filesystem::create_directories(dir / "src");
  std::filesystem::create_directories(dir / "tgt");
  for (int i = 0; i < 2; ++i) save_image(test::random_image(16, 16, 10 + i), dir / "src" / ("s" + std::to_string(i) + ".f32"));
  for (int i = 0; i < 3; ++i) save_image(speckle_image(16, 16, i), dir / "tgt" / ("t" + std::to_string(i) + ".png"));
  ASSERT_EQ(run("--seed 9 adapt --source-dir " + q(dir / "src") + " --target-dir " + q(dir / "tgt") + " -o " +
                q(dir / "out") + " --beta 0.01,0.3 --mode complex"),
            0);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  ASSERT_EQ(j.size(), 4u);
  for (const auto& e : j) {
    EXPECT_EQ(e["seed"].get<int>(), 9);
    EXPECT_EQ(e["mode"].get<std::string>(), "complex");
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / e["output"].get<std::string>()));
    EXPECT_TRUE(e.contains("source"));
    EXPECT_TRUE(e.contains("target"));
  }
  EXPECT_EQ(run("adapt --source-dir " + q(dir / "src") + " --target-dir " + q(dir / "tgt") + " -o " +
                q(dir / "out2") + " --beta 1.5"),
            2);
}

TEST(Cli, PipelineConfig) {
  TempDir dir("cli6");
  const nlohmann::json cfg{{"output_dir", (dir / "run").string()},
                           {"input", {{"phantom", {{"kind", "breast-like"}, {"size", 40}}}}},
                           {"transducer", {{"num_elements", 6}}},
                           {"solver", {{"sponge_width", 12}}},
                           {"fwi", {{"num_iterations", 1}, {"init_blur_sigma", 3}}},
                           {"fda", {{"betas", {0.05}}}}};
  {
    std::ofstream out(dir / "cfg.json");
    out << cfg.dump();
  }
  ASSERT_EQ(run("pipeline --config " + q(dir / "cfg.json") + " -q"), 0);
  const auto m = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
  EXPECT_EQ(m["stages"].size(), 5u);
  EXPECT_EQ(m["config_hash"].get<std::string>(), config_hash(load_pipeline_config(dir / "cfg.json")));
  EXPECT_EQ(run("pipeline -q"), 2);
  EXPECT_EQ(run("pipeline --config " + q(dir / "missing.json")), 2);
}

#endif
