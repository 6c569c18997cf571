// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and runtime budgets are fixed here and never read from the environment.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "../test_util.hpp"
#include "../wave_oracles.hpp"
#include "wavesono/wavesono.hpp"

using namespace wavesono;

namespace {

constexpr double kDx = 5e-4;

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

int failures = 0;

void run(const char* name, double budget_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.check(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.check(secs < budget_s, fmt("runtime %.1fs over budget %.0fs", secs, budget_s));
  if (!o.ok) ++failures;
  std::printf("%s %s (%.2fs)%s%s\n", o.ok ? "PASS" : "FAIL", name, secs, o.detail.empty() ? "" : ": ",
              o.detail.c_str());
  std::fflush(stdout);
}

double rmse(const Image& a, const Image& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / static_cast<double>(a.size()));
}

void psnr_table(Outcome& o) {
  const std::vector<std::pair<double, double>> rows{{0.014, 18.54}, {0.008, 20.97}, {0.018, 17.45},
                                                    {0.010, 20.00}, {0.008, 20.97}, {0.008, 20.97},
                                                    {0.040, 13.98}, {0.008, 20.97}, {0.01, 20.00}};
  for (auto [mse, reported] : rows) {
    const double p = psnr_from_mse(mse, 1.0);
    o.check(std::abs(p - reported) <= 0.01, fmt("mse %g gives %.4f dB", mse, p));
  }
}

void hu_anchors(Outcome& o) {
  const double mu_w = 0.2059;
  o.check(hounsfield(mu_w, mu_w) == 0.0, "water is not 0 HU");
  o.check(hounsfield(0.0, mu_w) == -1000.0, "air is not -1000 HU");
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0), lam = rng.uniform(-2.0, 2.0);
    const double direct = 1000.0 * (a - mu_w) / mu_w;
    o.check(std::abs(hounsfield(a, mu_w) - direct) <= 1e-9, fmt("hu(%g) off formula", a));
    const double mixed = hounsfield(lam * a + (1.0 - lam) * b, mu_w);
    const double combo = lam * hounsfield(a, mu_w) + (1.0 - lam) * hounsfield(b, mu_w);
    o.check(std::abs(mixed - combo) <= 1e-9, fmt("affinity broken at %g, %g", a, b));
  }
}

void travel_time(Outcome& o) {
  const double c = 1540.0, f = 3e5;
  const auto model = AcousticModel::from_speed(Image(128, 128, c), kDx);
  for (int dist : {20, 40, 60}) {
    AcquisitionGeometry g;
    g.elements = {{64, 24}, {64, 24 + dist}};
    g.source_indices = {0};
    g.duration = dist * kDx / c + 3.0 / f;
    const WaveSolver solver(model, g, {});
    const auto rec = solver.forward(0, false).first;
    const auto trace = rec.trace(0, 1);
    const auto ref = test::analytic_series(trace.size(), solver.dt(), dist * kDx, c, f);
    const double lag = std::abs(static_cast<double>(test::onset_index(trace)) -
                                static_cast<double>(test::onset_index(ref)));
    o.check(lag <= 2.0, fmt("distance %g: onset off by %g samples", dist, lag));
  }

  auto g = make_linear_array(6, 20, 128, 128, 30);
  g.elements[4] = {90, 50};
  g.duration = 6e-5;
  const auto rec = simulate_all_shots(model, g, {});
  double worst = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) {
      const auto a = rec.trace(i, j), b = rec.trace(j, i);
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += a[k] * a[k];
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
  o.check(worst <= 1e-6, fmt("reciprocity error %.3e", worst));
}

struct SmallSetup {
  Image true_speed;
  AcquisitionGeometry geometry;
  SolverOptions options;
  ShotRecord observed;
};

SmallSetup small_setup() {
  SmallSetup s;
  s.true_speed = Image(32, 32, 1500.0);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c)
      if ((r - 16.0) * (r - 16.0) + (c - 14.0) * (c - 14.0) < 25.0) s.true_speed(r, c) = 1560.0;
  s.geometry = make_linear_array(8, 2, 32, 32, 2);
  s.geometry.dt = cfl_time_step(kDx, 1700.0);
  s.geometry.duration = 300 * s.geometry.dt;
  s.options.sponge_width = 10;
  s.observed = simulate_all_shots(AcousticModel::from_speed(s.true_speed, kDx), s.geometry, s.options);
  return s;
}

void adjoint(Outcome& o) {
  const auto s = small_setup();
  FwiConfig cfg;
  cfg.solver = s.options;

  const auto model = AcousticModel::from_speed(s.true_speed, kDx);
  Rng rng(1);
  Image dm(32, 32);
  for (auto& v : dm) v = rng.normal() * 1e-8;
  ShotRecord y = s.observed;
  for (auto& v : y.traces) v = rng.normal();
  const auto jdm = born_data(model, s.geometry, s.observed, dm, s.options);
  double lhs = 0.0;
  for (std::size_t i = 0; i < y.traces.size(); ++i) lhs += jdm.traces[i] * y.traces[i];
  ShotRecord obs = s.observed;
  for (std::size_t i = 0; i < obs.traces.size(); ++i) obs.traces[i] -= y.traces[i];
  const auto gy = compute_gradient(model, s.geometry, obs, cfg);
  double rhs = 0.0;
  for (std::size_t i = 0; i < dm.size(); ++i) rhs += dm[i] * gy.exact[i];
  const double dot_err = std::abs(lhs - rhs) / std::abs(lhs);
  o.check(dot_err <= 1e-3, fmt("dot test relative error %.3e", dot_err));

  const auto start = AcousticModel::from_speed(Image(32, 32, 1500.0), kDx);
  const auto g = compute_gradient(start, s.geometry, s.observed, cfg);
  const Image m = start.slowness_sq();
  for (auto [r, c] : std::vector<std::pair<int, int>>{{16, 14}, {10, 20}, {20, 8}, {25, 25}, {12, 12}}) {
    const double eps = 1e-3 * m(r, c);
    Image mp = m, mm = m;
    mp(r, c) += eps;
    mm(r, c) -= eps;
    const double fp = objective(AcousticModel::from_slowness_sq(mp, kDx), s.geometry, s.observed, s.options);
    const double fm = objective(AcousticModel::from_slowness_sq(mm, kDx), s.geometry, s.observed, s.options);
    const double fd = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(fd - g.exact(r, c)) / std::abs(fd);
    o.check(rel <= 1e-2, fmt("pixel %g: finite-difference mismatch %.3e", r * 100.0 + c, rel));
  }
}

void twin_fwi(Outcome& o) {
  const Image truth = two_inclusion_phantom(64);
  auto g = make_linear_array(16, 2, 64, 64, 2);
  g.dt = cfl_time_step(kDx, 1700.0);
  g.duration = 55e-6;
  FwiConfig cfg;
  cfg.num_iterations = 20;
  cfg.step_size = 0.005;
  cfg.init_blur_sigma = 4.0;
  cfg.min_speed = 1400.0;
  cfg.max_speed = 1700.0;
  const auto observed = simulate_all_shots(AcousticModel::from_speed(truth, kDx), g, cfg.solver);
  const auto init = make_initial_model(truth, cfg.init_blur_sigma, kDx);
  const auto result = invert(observed, g, cfg, init);
  const auto& h = result.state.objective_history;
  o.check(h.size() == 21, "objective history length");
  const double ratio = h.back() / h.front();
  o.check(ratio < 0.5, fmt("objective ratio %.4f", ratio));
  const double r0 = rmse(init.speed, truth), r1 = rmse(result.model.speed, truth);
  o.check(r1 < r0, fmt("model rmse %.4f vs initial %.4f", r1, r0));
  std::printf("  twin fwi: objective %.6g -> %.6g (ratio %.4f), rmse %.4f -> %.4f m/s\n", h.front(), h.back(),
              ratio, r0, r1);
}

void fda_invariants(Outcome& o) {
  const Image src = speckle_image(64, 80, 5);
  const Image tgt = test::random_image(64, 80, 6);
  const std::vector<double> betas{0.01, 0.05, 0.09, 0.3};
  for (double beta : betas) {
    const Image self = spectral_swap(src, src, beta);
    double worst = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) worst = std::max(worst, std::abs(self[i] - src[i]));
    o.check(worst <= 1e-6, fmt("beta %g: self swap moved %.3e", beta, worst));

    const SpectralBandMask mask(beta, src.height(), src.width());
    const auto S = fft2(src), T = fft2(tgt);
    const auto out = fft2(spectral_swap_unclamped(src, tgt, beta, SwapMode::amplitude));
    double low = 0.0, high = 0.0, scale = 0.0;
    for (std::size_t r = 0; r < S.height(); ++r)
      for (std::size_t c = 0; c < S.width(); ++c) {
        scale = std::max({scale, std::abs(S(r, c)), std::abs(T(r, c))});
        if (mask.is_low(r, c))
          low = std::max(low, std::abs(out(r, c) - S(r, c)));
        else
          high = std::max(high, std::abs(std::abs(out(r, c)) - std::abs(T(r, c))));
      }
    o.check(low <= 1e-6 * scale, fmt("beta %g: low band drift %.3e", beta, low / scale));
    o.check(high <= 1e-6 * scale, fmt("beta %g: high band amplitude drift %.3e", beta, high / scale));
  }

  const std::vector<Image> sources{src, speckle_image(64, 80, 7), speckle_image(64, 80, 8)};
  const auto grid = adapt_batch(sources, {tgt}, betas, SwapMode::amplitude, Pairing::index);
  o.check(grid.size() == sources.size() * betas.size(), "sweep grid size");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& a = grid[i];
    o.check(a.source_index == i / betas.size() && a.beta == betas[i % betas.size()], "sweep grid order");
    o.check(a.image.height() == 64 && a.image.width() == 80, "sweep image shape");
  }
}

void loss_suite(Outcome& o) {
  const LossWeights w;
  const double p = 0.37, l1 = 0.0123, adv = -1.2;
  o.check(generator_loss(p, l1, adv, w) == 10.0 * l1 + adv, "weighted sum with (0, 10, 1)");

  const std::vector<double> half(16, 0.5);
  const double eq = adversarial_value(half, half);
  o.check(std::abs(eq + 2.0 * std::log(2.0)) <= 1e-9, fmt("equilibrium value %.12f", eq));

  const Image x = test::random_image(48, 64, 21, -1.0, 1.0);
  const auto bands = haar_forward(x);
  double e_in = 0.0, e_out = 0.0;
  for (double v : x) e_in += v * v;
  for (const Image* b : {&bands.ll, &bands.lh, &bands.hl, &bands.hh})
    for (double v : *b) e_out += v * v;
  o.check(std::abs(e_in - e_out) <= 1e-9 * e_in, fmt("haar energy drift %.3e", std::abs(e_in - e_out) / e_in));

  Image a = test::random_image(40, 40, 22), b = test::random_image(40, 40, 23);
  for (auto& v : a) v = std::round(v * 256.0) / 256.0;
  for (auto& v : b) v = std::round(v * 256.0) / 256.0;
  Image a2 = a, b2 = b;
  for (auto& v : a2) v += 0.25;
  for (auto& v : b2) v += 0.25;
  o.check(laplacian_loss(a2, b2) == laplacian_loss(a, b), "laplacian loss changed under a constant offset");
  for (double v : laplacian(Image(9, 7, 0.3))) o.check(v == 0.0, "laplacian of a constant is nonzero");
}

void determinism(Outcome& o) {
  test::TempDir dir("accept");
  PipelineConfig c;
  c.seed = 17;
  c.phantom_size = 64;
  c.transducer.num_elements = 16;
  c.solver.sponge_width = 20;
  c.fwi.num_iterations = 3;
  c.fwi.init_blur_sigma = 4.0;
  c.output_dir = dir / "a";
  const auto ma = run_pipeline(c);
  c.output_dir = dir / "b";
  const auto mb = run_pipeline(c);

  o.check(ma.stages.size() == 5, "expected five stages");
  std::size_t compared = 0;
  for (std::size_t s = 0; s < ma.stages.size() && s < mb.stages.size(); ++s)
    for (const auto& f : ma.stages[s].outputs) {
      if (std::filesystem::path(f.path).extension() != ".f32") continue;
      ++compared;
      const auto bytes_a = detail::read_file_bytes(dir / "a" / f.path);
      const auto bytes_b = detail::read_file_bytes(dir / "b" / f.path);
      o.check(bytes_a == bytes_b, f.path + " differs between runs");
    }
  o.check(compared >= 5, fmt("only %g f32 outputs compared", static_cast<double>(compared)));
  std::printf("  determinism: %zu f32 outputs compared\n", compared);
}

}  // namespace

int main() {
  run("psnr-mse consistency (9 rows, 0.01 dB)", 1.0, psnr_table);
  run("hounsfield anchors and linearity (1e-9)", 1.0, hu_anchors);
  run("forward travel time (2 dt) and reciprocity (1e-6) on 128x128", 30.0, travel_time);
  run("adjoint dot test (1e-3) and finite differences (1e-2) on 32x32", 120.0, adjoint);
  run("twin fwi 64x64 two-inclusion, 16 elements, 20 iterations", 300.0, twin_fwi);
  run("spectral transfer invariants (1e-6) and beta sweep grid", 10.0, fda_invariants);
  run("loss suite: weighted sum, equilibrium, haar parseval, laplacian offset", 5.0, loss_suite);
  run("pipeline rerun bit-identical f32 outputs", 600.0, determinism);
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
