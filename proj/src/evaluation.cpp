#include "idvo/evaluation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>

#include "idvo/objective.hpp"

namespace idvo {

namespace {

void check_lengths(std::size_t est, std::size_t gt, std::size_t min, const char* who) {
  if (est != gt) {
    throw LengthError(std::string(who) + ": estimate has " + std::to_string(est) +
                      " poses, ground truth " + std::to_string(gt));
  }
  if (est < min) {
    throw LengthError(std::string(who) + ": need at least " + std::to_string(min) + " poses, got " +
                      std::to_string(est));
  }
}

// Positions relative to the first pose, expressed in its frame.
Eigen::Matrix3Xd rebased_positions(std::span<const Pose6DoF> traj) {
  const Pose6DoF inv0 = invert(traj.front());
  Eigen::Matrix3Xd out(3, Eigen::Index(traj.size()));
  for (std::size_t i = 0; i < traj.size(); ++i) out.col(Eigen::Index(i)) = compose(inv0, traj[i]).translation();
  return out;
}

double scale_of(const Eigen::Matrix3Xd& e, const Eigen::Matrix3Xd& g) {
  const double den = e.squaredNorm();
  return den > 0.0 ? (e.array() * g.array()).sum() / den : 0.0;
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + std::ptrdiff_t(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

}  // namespace

double ate_scale(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt) {
  check_lengths(est.size(), gt.size(), 2, "ate_scale");
  return scale_of(rebased_positions(est), rebased_positions(gt));
}

double ate_snippet(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt, AteAlignment alignment) {
  check_lengths(est.size(), gt.size(), 2, "ate_snippet");
  const Eigen::Matrix3Xd e = rebased_positions(est);
  const Eigen::Matrix3Xd g = rebased_positions(gt);
  Eigen::Matrix3Xd aligned;
  if (alignment == AteAlignment::scale) {
    aligned = scale_of(e, g) * e;
  } else {
    const Eigen::Matrix4d t = Eigen::umeyama(e, g, true);
    aligned = (t.topLeftCorner<3, 3>() * e).colwise() + t.topRightCorner<3, 1>();
  }
  return std::sqrt((aligned - g).colwise().squaredNorm().mean());
}

AteReport ate_sequence(std::span<const Pose6DoF> est, std::span<const Pose6DoF> gt, int snippet_len,
                       AteAlignment alignment) {
  if (snippet_len < 2) throw LengthError("ate_sequence: snippet_len must be >= 2");
  check_lengths(est.size(), gt.size(), std::size_t(snippet_len), "ate_sequence");
  AteReport r;
  const std::size_t len = std::size_t(snippet_len);
  for (std::size_t i = 0; i + len <= est.size(); ++i) {
    r.per_snippet.push_back(ate_snippet(est.subspan(i, len), gt.subspan(i, len), alignment));
  }
  r.count = r.per_snippet.size();
  double sum = 0.0;
  for (double x : r.per_snippet) sum += x;
  r.mean = sum / double(r.count);
  double var = 0.0;
  for (double x : r.per_snippet) var += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(var / double(r.count));
  return r;
}

double path_length(std::span<const Pose6DoF> traj) {
  double sum = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) sum += (traj[i].translation() - traj[i - 1].translation()).norm();
  return sum;
}

DepthReport depth_metrics(const Image& pred, const Image& gt, double cap) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw DimensionError("depth_metrics: prediction is " + std::to_string(pred.cols()) + "x" +
                         std::to_string(pred.rows()) + ", ground truth " + std::to_string(gt.cols()) +
                         "x" + std::to_string(gt.rows()));
  }
  if (!(cap > 0.0)) throw DomainError("depth_metrics: cap must be positive");
  std::vector<double> p;
  std::vector<double> g;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    const double gv = gt.data()[i];
    if (gv > 0.0 && gv <= cap) {
      p.push_back(pred.data()[i]);
      g.push_back(gv);
    }
  }
  if (g.empty()) throw DomainError("depth_metrics: no ground-truth pixel in (0, cap]");
  const double med_pred = median(p);
  if (!(med_pred > 0.0) || !std::isfinite(med_pred)) {
    throw DomainError("depth_metrics: prediction median is not positive");
  }
  const double s = median(g) / med_pred;
  DepthReport r;
  r.cap = cap;
  r.pixels = g.size();
  double sq = 0.0;
  double sq_log = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double pv = std::clamp(p[i] * s, 1e-3, cap);
    const double d = pv - g[i];
    r.abs_rel += std::abs(d) / g[i];
    r.sq_rel += d * d / g[i];
    sq += d * d;
    const double dl = std::log(pv) - std::log(g[i]);
    sq_log += dl * dl;
  }
  const double n = double(g.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq / n);
  r.rmse_log = std::sqrt(sq_log / n);
  return r;
}

DepthReport average(const std::vector<DepthReport>& reports) {
  DepthReport r;
  if (reports.empty()) return r;
  r.cap = reports.front().cap;
  for (const DepthReport& x : reports) {
    r.abs_rel += x.abs_rel;
    r.sq_rel += x.sq_rel;
    r.rmse += x.rmse;
    r.rmse_log += x.rmse_log;
    r.pixels += x.pixels;
  }
  const double n = double(reports.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse /= n;
  r.rmse_log /= n;
  return r;
}

SmoothnessReport smoothness(std::span<const Pose6DoF> traj, double chi) {
  if (traj.size() < 4) {
    throw LengthError("smoothness: need at least 4 poses, got " + std::to_string(traj.size()));
  }
  const MotionSeries m = motion_series(traj, chi);
  SmoothnessReport r;
  r.velocity = m.v;
  r.accel = m.a;
  r.jerk = m.j;
  for (double v : m.v) r.mean_velocity += v;
  r.mean_velocity /= double(m.v.size());
  for (double a : m.a) r.mean_abs_accel += std::abs(a);
  r.mean_abs_accel /= double(m.a.size());
  for (double j : m.j) {
    r.mean_abs_jerk += std::abs(j);
    r.max_abs_jerk = std::max(r.max_abs_jerk, std::abs(j));
  }
  r.mean_abs_jerk /= double(m.j.size());
  r.sawtooth_index = r.mean_velocity > 0.0 ? r.mean_abs_jerk / r.mean_velocity : 0.0;
  return r;
}

std::string format_mean_std(double mean, double std, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f\xC2\xB1%.*f", decimals, mean, decimals, std);
  return buf;
}

void write_ate_csv(const std::string& path, const AteReport& report) {
  std::ofstream out = open_csv(path);
  out << "window,ate\n";
  for (std::size_t i = 0; i < report.per_snippet.size(); ++i) out << i << ',' << report.per_snippet[i] << '\n';
  out << "mean," << report.mean << "\nstd," << report.std << '\n';
  if (!out) throw LoadError("failed writing '" + path + "'");
}

void write_depth_csv(const std::string& path, const std::vector<DepthReport>& per_image) {
  std::ofstream out = open_csv(path);
  out << "image,abs_rel,sq_rel,rmse,rmse_log,pixels\n";
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    const DepthReport& r = per_image[i];
    out << i << ',' << r.abs_rel << ',' << r.sq_rel << ',' << r.rmse << ',' << r.rmse_log << ','
        << r.pixels << '\n';
  }
  const DepthReport m = average(per_image);
  out << "mean," << m.abs_rel << ',' << m.sq_rel << ',' << m.rmse << ',' << m.rmse_log << ',' << m.pixels << '\n';
  if (!out) throw LoadError("failed writing '" + path + "'");
}

void write_smoothness_csv(const std::string& path, const SmoothnessReport& report) {
  std::ofstream out = open_csv(path);
  out << "t,velocity,accel,jerk\n";
  for (std::size_t t = 0; t < report.velocity.size(); ++t) {
    out << t << ',' << report.velocity[t] << ',';
    if (t < report.accel.size()) out << report.accel[t];
    out << ',';
    if (t < report.jerk.size()) out << report.jerk[t];
    out << '\n';
  }
  if (!out) throw LoadError("failed writing '" + path + "'");
}

}  // namespace idvo
