#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "wavesono/metrics.hpp"

using namespace wavesono;

namespace {

double naive_mse(const Image& a, const Image& b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.height(); ++r)
    for (std::size_t c = 0; c < a.width(); ++c) acc += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
  return acc / static_cast<double>(a.size());
}

// Direct per-window SSIM with an explicit 2D Gaussian weight table.
double naive_ssim(const Image& a, const Image& b, double L) {
  const int n = 11;
  const double sigma = 1.5;
  double w[11][11];
  double wsum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      wsum += w[i][j];
    }
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  double total = 0.0;
  int count = 0;
  for (std::size_t r = 0; r + n <= a.height(); ++r)
    for (std::size_t c = 0; c + n <= a.width(); ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          ma += w[i][j] / wsum * a(r + i, c + j);
          mb += w[i][j] / wsum * b(r + i, c + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double x = a(r + i, c + j) - ma, y = b(r + i, c + j) - mb;
          va += w[i][j] / wsum * x * x;
          vb += w[i][j] / wsum * y * y;
          cov += w[i][j] / wsum * x * y;
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST(Mse, Basics) {
  const Image a(4, 4, 0.0), b(4, 4, 0.1);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
  EXPECT_THROW(mse(a, Image(4, 5)), ValidationError);
}

TEST(Mse, MatchesLoopOracleAndIsSymmetric) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = test::random_image(13, 17, 2 * s), b = test::random_image(13, 17, 2 * s + 1);
    EXPECT_NEAR(mse(a, b), naive_mse(a, b), 1e-12);
    EXPECT_EQ(mse(a, b), mse(b, a));
    EXPECT_GE(mse(a, b), 0.0);
  }
}

TEST(Psnr, TableRows) {
  EXPECT_NEAR(psnr_from_mse(0.008), 20.97, 0.01);
  EXPECT_NEAR(psnr_from_mse(0.014), 18.54, 0.01);
  EXPECT_NEAR(psnr_from_mse(0.04), 13.98, 0.01);
}

TEST(Psnr, InfiniteForIdenticalAndMonotone) {
  const Image a = test::random_image(8, 8, 3);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0.0);
  double prev = psnr_from_mse(1e-6);
  for (double m = 2e-6; m < 1.0; m *= 1.7) {
    const double p = psnr_from_mse(m);
    EXPECT_LT(p, prev);
    prev = p;
  }
  EXPECT_NEAR(psnr_from_mse(0.01, 2.0), 10 * std::log10(4.0 / 0.01), 1e-12);
  EXPECT_THROW(psnr_from_mse(0.01, 0.0), ValidationError);
}

TEST(Ssim, SelfSimilarityIsOne) {
  const Image a = test::random_image(20, 24, 5);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(Image(16, 16, 0.3), Image(16, 16, 0.3)), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(Image(12, 12, 0.0), Image(12, 12, 1.0)), c1 / (1.0 + c1), 1e-12);
  const double c1L = (0.01 * 2.0) * (0.01 * 2.0);
  EXPECT_NEAR(ssim(Image(12, 12, 0.5), Image(12, 12, 1.5), 2.0),
              (2 * 0.75 + c1L) / (0.25 + 2.25 + c1L), 1e-12);
}

TEST(Ssim, MatchesPerWindowOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Image a = test::random_image(19, 23, 100 + s);
    Image b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.6 * a[i] + 0.4 * test::random_image(19, 23, 200 + s)[i];
    EXPECT_NEAR(ssim(a, b), naive_ssim(a, b, 1.0), 1e-6);
  }
}

TEST(Ssim, SymmetricAndBounded) {
  const Image a = test::random_image(16, 16, 7), b = test::random_image(16, 16, 8);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
  Image neg = a.map([](double v) { return 1.0 - v; });
  const double s = ssim(a, neg);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
  EXPECT_LT(s, 0.0);
}

TEST(Ssim, RejectsSmallOrMismatched) {
  EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), ValidationError);
  EXPECT_THROW(ssim(Image(12, 12), Image(12, 13)), ValidationError);
}

TEST(Metrics, IdentityReport) {
  const Image a = test::random_image(16, 16, 9);
  const auto r = evaluate_metrics(a, a);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_TRUE(std::isinf(r.psnr));
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
}
