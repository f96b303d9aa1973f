#include <doctest.h>

#include <cmath>
#include <random>

#include "idvo/evaluation.hpp"
#include "test_util.hpp"

using namespace idvo;

namespace {

std::vector<Pose6DoF> straight_line(int n, double step = 1.0) {
  std::vector<Pose6DoF> poses;
  for (int i = 0; i < n; ++i) poses.emplace_back(Eigen::Vector3d(0, 0, step * i), Eigen::Vector3d::Zero());
  return poses;
}

// Smallest RMSE over a uniform grid of scales.
double brute_force_ate(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt, double lo, double hi,
                       double step) {
  const Pose6DoF ie = invert(est.front()), ig = invert(gt.front());
  double best = INFINITY;
  for (double s = lo; s <= hi; s += step) {
    double sum = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const Eigen::Vector3d e = compose(ie, est[i]).translation();
      const Eigen::Vector3d g = compose(ig, gt[i]).translation();
      sum += (s * e - g).squaredNorm();
    }
    best = std::min(best, std::sqrt(sum / double(est.size())));
  }
  return best;
}

}  // namespace

TEST_CASE("ate_snippet") {
  const std::vector<Pose6DoF> gt = straight_line(5);
  CHECK(ate_snippet(gt, gt) == 0.0);

  std::vector<Pose6DoF> doubled;
  for (const Pose6DoF& p : gt) doubled.emplace_back(2.0 * p.translation(), p.orientation());
  CHECK(ate_snippet(doubled, gt) < 1e-15);
  CHECK(ate_scale(doubled, gt) == doctest::Approx(0.5));

  std::vector<Pose6DoF> bumped = gt;
  bumped[2] = Pose6DoF(Eigen::Vector3d(0.1, 0, 2), Eigen::Vector3d::Zero());
  // s* = 30 / 30.01; residual: x of frame 2 is 0.1 s, z unchanged up to (1 - s) i
  const double s = 30.0 / 30.01;
  double sum = (0.1 * s) * (0.1 * s);
  for (int i = 1; i < 5; ++i) sum += ((s - 1.0) * i) * ((s - 1.0) * i);
  const double hand = std::sqrt(sum / 5.0);
  CHECK(ate_snippet(bumped, gt) == doctest::Approx(hand).epsilon(1e-12));
  CHECK(std::abs(ate_snippet(bumped, gt) - brute_force_ate(bumped, gt, 0.0, 4.0, 1e-5)) < 1e-4);

  std::vector<Pose6DoF> frozen(5);
  CHECK(ate_scale(frozen, gt) == 0.0);
  CHECK_THROWS_AS(ate_snippet(straight_line(4), gt), LengthError);
  CHECK_THROWS_AS(ate_snippet(straight_line(1), straight_line(1)), LengthError);
}

TEST_CASE("ate_snippet similarity alignment") {
  std::mt19937_64 rng(41);
  std::vector<Pose6DoF> gt, est;
  const Pose6DoF twist(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0.1, 0.2, -0.3));
  for (int i = 0; i < 5; ++i) {
    gt.push_back(test::random_pose(rng));
    est.emplace_back(twist.rotation() * gt.back().translation() * 3.0, gt.back().orientation());
  }
  // rotated and scaled positions: only the similarity alignment absorbs the rotation
  CHECK(ate_snippet(est, gt, AteAlignment::similarity) < 1e-9);
  CHECK(ate_snippet(est, gt, AteAlignment::scale) > 0.01);
  CHECK(ate_snippet(gt, gt, AteAlignment::similarity) < 1e-12);
}

TEST_CASE("ate_sequence") {
  const std::vector<Pose6DoF> gt = straight_line(100, 0.3);
  const AteReport same = ate_sequence(gt, gt, 5);
  CHECK(same.count == 96);
  CHECK(same.mean == 0.0);
  CHECK(same.std == 0.0);

  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<Pose6DoF> est;
  for (const Pose6DoF& p : gt) {
    est.emplace_back(p.translation() + Eigen::Vector3d(n(rng), n(rng), n(rng)),
                     Eigen::Vector3d(n(rng), n(rng), n(rng)));
  }
  const AteReport r = ate_sequence(est, gt, 5);
  double mean = 0.0;
  for (std::size_t i = 0; i + 5 <= est.size(); ++i) {
    mean += ate_snippet(std::span(est).subspan(i, 5), std::span(gt).subspan(i, 5));
  }
  mean /= 96.0;
  double var = 0.0;
  for (std::size_t i = 0; i + 5 <= est.size(); ++i) {
    const double x = ate_snippet(std::span(est).subspan(i, 5), std::span(gt).subspan(i, 5));
    var += (x - mean) * (x - mean);
  }
  CHECK(std::abs(r.mean - mean) < 1e-12);
  CHECK(std::abs(r.std - std::sqrt(var / 96.0)) < 1e-12);
  CHECK_THROWS_AS(ate_sequence(straight_line(10), straight_line(11)), LengthError);
  CHECK_THROWS_AS(ate_sequence(straight_line(4), straight_line(4), 5), LengthError);
}

TEST_CASE("path_length") {
  CHECK(path_length(straight_line(11, 0.5)) == doctest::Approx(5.0));
}

TEST_CASE("depth_metrics") {
  Image g(2, 3);
  g << 1, 2, 3, 4, 5, 6;
  const DepthReport same = depth_metrics(g, g);
  CHECK(same.abs_rel == 0.0);
  CHECK(same.sq_rel == 0.0);
  CHECK(same.rmse == 0.0);
  CHECK(same.rmse_log == 0.0);
  const DepthReport twice = depth_metrics(2.0 * g, g);
  CHECK(twice.abs_rel < 1e-15);
  CHECK(twice.rmse_log < 1e-15);

  Image p1(1, 2), g1(1, 2);
  p1 << 1, 1;
  g1 << 1, 2;
  const DepthReport r = depth_metrics(p1, g1);
  CHECK(r.abs_rel == 0.375);
  CHECK(r.sq_rel == (0.25 / 1 + 0.25 / 2) / 2);
  CHECK(r.rmse == 0.5);
  CHECK(r.rmse_log == std::sqrt((std::pow(std::log(1.5), 2) + std::pow(std::log(1.5 / 2), 2)) / 2));
  CHECK(r.pixels == 2);

  // pixels outside (0, cap] are ignored
  Image gc(1, 3), pc(1, 3);
  gc << 0, 100, 4;
  pc << 7, 7, 2;
  const DepthReport capped = depth_metrics(pc, gc);
  CHECK(capped.pixels == 1);
  CHECK(capped.abs_rel == 0.0);

  CHECK_THROWS_AS(depth_metrics(g, p1), DimensionError);
  CHECK_THROWS_AS(depth_metrics(p1, Image::Zero(1, 2)), DomainError);
  CHECK_THROWS_AS(depth_metrics(Image::Zero(1, 2), g1), DomainError);
}

TEST_CASE("depth average matches a naive loop") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.5, 60.0);
  std::vector<DepthReport> reports;
  for (int k = 0; k < 7; ++k) {
    Image p(4, 6), g(4, 6);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      p.data()[i] = u(rng);
      g.data()[i] = u(rng);
    }
    reports.push_back(depth_metrics(p, g));
  }
  const DepthReport m = average(reports);
  double abs_rel = 0.0, rmse = 0.0;
  std::size_t pixels = 0;
  for (const DepthReport& r : reports) {
    abs_rel += r.abs_rel;
    rmse += r.rmse;
    pixels += r.pixels;
  }
  CHECK(std::abs(m.abs_rel - abs_rel / 7.0) < 1e-12);
  CHECK(std::abs(m.rmse - rmse / 7.0) < 1e-12);
  CHECK(m.pixels == pixels);
}

TEST_CASE("smoothness") {
  const SmoothnessReport cv = smoothness(straight_line(8, 0.5));
  CHECK(cv.mean_abs_accel == 0.0);
  CHECK(cv.mean_abs_jerk == 0.0);
  CHECK(cv.sawtooth_index == 0.0);
  CHECK(cv.mean_velocity == 0.5);

  std::vector<Pose6DoF> alt;
  double z = 0.0;
  for (int i = 0; i < 9; ++i) {
    alt.emplace_back(Eigen::Vector3d(0, 0, z), Eigen::Vector3d::Zero());
    z += (i % 2 == 0) ? 1.0 : 2.0;
  }
  const SmoothnessReport a = smoothness(alt);
  CHECK(a.mean_abs_accel == 1.0);
  CHECK(a.mean_abs_jerk == 2.0);
  CHECK(a.max_abs_jerk == 2.0);
  CHECK(a.sawtooth_index == doctest::Approx(2.0 / 1.5));
  CHECK_THROWS_AS(smoothness(straight_line(3)), LengthError);
}

TEST_CASE("format_mean_std") {
  CHECK(format_mean_std(0.012, 0.011) == "0.012\xC2\xB1" "0.011");
  CHECK(format_mean_std(0.0, 0.0) == "0.000\xC2\xB1" "0.000");
}
