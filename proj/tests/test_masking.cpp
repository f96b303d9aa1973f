#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "idvo/masking.hpp"
#include "idvo/png_io.hpp"
#include "test_util.hpp"

using namespace idvo;

TEST_CASE("build_dhem widths") {
  DhemParams p;
  const HardEdgeMask still = build_dhem(0.0, 0.0, 416, 128, p);
  CHECK(still.widths == EdgeWidths{0, 0, 0, 0});
  CHECK((still.grid == 1.0).all());

  p.speed_gain = 0.05;
  const HardEdgeMask moving = build_dhem(1.0, 0.0, 416, 128, p);
  CHECK(moving.widths.top == 6);
  CHECK(moving.widths.bottom == 6);
  CHECK(moving.widths.left == 21);
  CHECK(moving.widths.right == 21);
  CHECK((moving.grid.topRows(6) == 0.0).all());
  CHECK((moving.grid.block(6, 21, 116, 374) == 1.0).all());

  const HardEdgeMask left_turn = build_dhem(1.0, 0.05, 416, 128, p);
  CHECK(left_turn.widths.right > left_turn.widths.left);
  const HardEdgeMask right_turn = build_dhem(1.0, -0.05, 416, 128, p);
  CHECK(right_turn.widths.left > right_turn.widths.right);
  CHECK(right_turn.widths.left == left_turn.widths.right);

  const HardEdgeMask capped = build_dhem(1000.0, 10.0, 416, 128, p);
  CHECK(capped.widths.top == 32);
  CHECK(capped.widths.right == 104);

  CHECK_THROWS_AS(build_dhem(-0.1, 0.0, 416, 128, p), DomainError);

  p.enabled = false;
  CHECK((build_dhem(5.0, 0.1, 416, 128, p).grid == 1.0).all());
}

TEST_CASE("masked pixel count is monotone in speed") {
  const DhemParams p;
  for (double yaw : {-0.02, 0.0, 0.03}) {
    long prev = -1;
    for (int i = 0; i < 20; ++i) {
      const long masked = long((build_dhem(0.5 * i, yaw, 416, 128, p).grid == 0.0).count());
      CHECK(masked >= prev);
      prev = masked;
    }
  }
}

TEST_CASE("steering_rate sign") {
  // left turn: negative rotation about +y (camera y points down)
  const Pose6DoF left(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, -0.05, 0));
  CHECK(steering_rate(left) == doctest::Approx(0.05));
  CHECK(steering_rate(Pose6DoF::identity()) == 0.0);
}

TEST_CASE("combine") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 2.0);
  Image logits(16, 32);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = g(rng);
  const ExplainabilityField soft(logits);
  const HardEdgeMask hard = build_dhem(3.0, 0.02, 32, 16, DhemParams{});
  const CombinedMask m = combine(hard, soft);
  const Image values = soft.values();
  for (Eigen::Index r = 0; r < 16; ++r) {
    for (Eigen::Index c = 0; c < 32; ++c) {
      CHECK(m.grid(r, c) == hard.grid(r, c) * values(r, c));
      CHECK(m.grid(r, c) <= std::min(hard.grid(r, c), values(r, c)));
    }
  }
  const CombinedMask sat = combine(build_dhem(0.0, 0.0, 32, 16, DhemParams{}), ExplainabilityField(16, 32, 40.0));
  CHECK((sat.grid - 1.0).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(combine(hard, ExplainabilityField(8, 32)), DimensionError);
}

TEST_CASE("mask_loss") {
  CHECK(mask_loss(ExplainabilityField(8, 8, 0.0)).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(mask_loss(ExplainabilityField(8, 8, 0.0)).value - std::log(2.0)) < 1e-12);
  CHECK(mask_loss(ExplainabilityField(8, 8, 20.0)).value < 1e-8);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 2.0);
  Image logits(8, 16);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = g(rng);
  for (int factor : {1, 2, 4}) {
    const MaskLoss l = mask_loss(ExplainabilityField(logits), factor);
    CHECK((l.grad_logits < 0.0).all());
    for (Eigen::Index i = 0; i < logits.size(); i += 7) {
      Image hi = logits, lo = logits;
      hi.data()[i] += 1e-5;
      lo.data()[i] -= 1e-5;
      const double fd = (mask_loss(ExplainabilityField(hi), factor).value -
                         mask_loss(ExplainabilityField(lo), factor).value) / 2e-5;
      CHECK(std::abs(fd - l.grad_logits.data()[i]) <= 1e-6 * std::max(1.0, std::abs(fd)) + 1e-9);
    }
  }
}

TEST_CASE("mask_loss restricted to a support") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  Image logits(8, 16);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = g(rng);
  const HardEdgeMask hard = build_dhem(4.0, 0.0, 16, 8, DhemParams{});
  REQUIRE(hard.widths.top > 0);
  for (int factor : {1, 2}) {
    const MaskLoss full = mask_loss(ExplainabilityField(logits), factor);
    const MaskLoss ones = mask_loss(ExplainabilityField(logits), factor, Image::Ones(8, 16));
    CHECK(full.value == ones.value);
    const MaskLoss l = mask_loss(ExplainabilityField(logits), factor, hard.grid);
    CHECK(l.value < full.value);
    CHECK(((hard.grid == 0.0).select(l.grad_logits, 0.0) == 0.0).all());
    for (Eigen::Index i = 0; i < logits.size(); i += 5) {
      Image hi = logits, lo = logits;
      hi.data()[i] += 1e-5;
      lo.data()[i] -= 1e-5;
      const double fd = (mask_loss(ExplainabilityField(hi), factor, hard.grid).value -
                         mask_loss(ExplainabilityField(lo), factor, hard.grid).value) / 2e-5;
      CHECK(std::abs(fd - l.grad_logits.data()[i]) <= 1e-6 * std::max(1.0, std::abs(fd)) + 1e-9);
    }
  }
  CHECK_THROWS_AS(mask_loss(ExplainabilityField(logits), 1, Image::Ones(4, 4)), DimensionError);
}

TEST_CASE("mask preview png") {
  const std::string dir = test::scratch_dir("mask_png");
  const std::string path = dir + "/hard.png";
  const HardEdgeMask hard = build_dhem(10.0, 0.0, 64, 32, DhemParams{});
  write_mask_png(path, hard.grid);
  const Image back = read_png_gray(path);
  CHECK((back == hard.grid).all());
}
