// Mammogram-like phantom to sound speed, simulate a linear array, run a few
// inversion iterations and score the rendered ultrasound image.

#include <cstdio>

#include "wavesono/wavesono.hpp"

using namespace wavesono;

int main() {
  const double dx = 5e-4;
  const Image mammogram = make_phantom(PhantomKind::breast_like, 64, 7);
  const Image speed = clamp(intensity_to_sound_speed(mammogram, default_tissue_table()), 1400.0, 1700.0);

  auto geometry = make_linear_array(16, 2, 64, 64, 2);
  geometry.dt = cfl_time_step(dx, 1700.0);
  geometry.duration = 55e-6;

  FwiConfig config;
  config.num_iterations = 5;
  config.init_blur_sigma = 4.0;
  config.solver.sponge_width = 20;

  const auto observed = simulate_all_shots(AcousticModel::from_speed(speed, dx), geometry, config.solver);
  const auto init = make_initial_model(speed, config.init_blur_sigma, dx);
  const auto result = invert(observed, geometry, config, init, [](const FwiState& s) {
    std::printf("iteration %zu  objective %.6g\n", s.iteration, s.objective_history.back());
  });

  auto normalized = [&](const Image& c) { return normalize(c, config.min_speed, config.max_speed); };
  const auto before = evaluate_metrics(normalized(init.speed), normalized(speed));
  const auto after = evaluate_metrics(normalized(result.model.speed), normalized(speed));
  std::printf("initial  mse %.3e  psnr %.2f dB  ssim %.4f\n", before.mse, before.psnr, before.ssim);
  std::printf("inverted mse %.3e  psnr %.2f dB  ssim %.4f\n", after.mse, after.psnr, after.ssim);
  save_image(normalized(result.model.speed), "sample_model.png");
  return 0;
}
