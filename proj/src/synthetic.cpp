#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "idvo/dataset_io.hpp"
#include "idvo/png_io.hpp"

namespace fs = std::filesystem;

namespace idvo {

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw DomainError("synth config: " + what);
  };
  require(width >= 8 && height >= 8, "resolution must be at least 8x8");
  require(width % 8 == 0 && height % 8 == 0, "resolution must be divisible by 8");
  require(frames >= 2, "need at least 2 frames");
  require(focal > 0.0, "focal must be positive");
  require(base_depth > 0.0, "base_depth must be positive");
  require(bumps >= 0, "bumps must be >= 0");
  require(std::abs(tilt) + std::abs(bump_amplitude) * bumps < 0.9,
          "|tilt| + bumps * |bump_amplitude| must be below 0.9");
  require(texture_waves >= 1, "texture_waves must be >= 1");
  require(texture_period_min > 0.0 && texture_period_max >= texture_period_min,
          "texture periods must satisfy 0 < min <= max");
  require(canvas_margin >= 0, "canvas_margin must be >= 0");
  require(speed >= 0.0, "speed must be >= 0");
  require(speed_variation >= 0.0 && speed_variation < 1.0, "speed_variation must be in [0, 1)");
  require(jitter_translation >= 0.0 && jitter_rotation >= 0.0, "jitter must be >= 0");
  require(stop_at >= 0 && stop_length >= 0, "stop_at and stop_length must be >= 0");
  require(noise >= 0.0, "noise must be >= 0");
  require(frame_interval > 0.0, "frame_interval must be positive");
}

std::string SynthConfig::serialize() const {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "width=" << width << '\n'
      << "height=" << height << '\n'
      << "frames=" << frames << '\n'
      << "seed=" << seed << '\n'
      << "focal=" << focal << '\n'
      << "base_depth=" << base_depth << '\n'
      << "tilt=" << tilt << '\n'
      << "bumps=" << bumps << '\n'
      << "bump_amplitude=" << bump_amplitude << '\n'
      << "texture_waves=" << texture_waves << '\n'
      << "texture_period_min=" << texture_period_min << '\n'
      << "texture_period_max=" << texture_period_max << '\n'
      << "canvas_margin=" << canvas_margin << '\n'
      << "speed=" << speed << '\n'
      << "speed_variation=" << speed_variation << '\n'
      << "yaw_rate=" << yaw_rate << '\n'
      << "heading_offset=" << heading_offset << '\n'
      << "jitter_translation=" << jitter_translation << '\n'
      << "jitter_rotation=" << jitter_rotation << '\n'
      << "stop_at=" << stop_at << '\n'
      << "stop_length=" << stop_length << '\n'
      << "noise=" << noise << '\n'
      << "frame_interval=" << frame_interval << '\n';
  return out.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

struct Bump {
  double u = 0.0;
  double v = 0.0;
  double sigma = 1.0;
  double amplitude = 0.0;
};

// Depth of the scene surface along the ray through reference pixel (u, v).
struct DepthField {
  double base = 10.0;
  double tilt = 0.0;
  double cy = 0.0;
  double height = 1.0;
  std::vector<Bump> bumps;

  double operator()(double u, double v) const {
    double rel = 1.0 + tilt * std::tanh((v - cy) / height);
    for (const Bump& b : bumps) {
      const double du = u - b.u;
      const double dv = v - b.v;
      rel += b.amplitude * std::exp(-(du * du + dv * dv) / (2.0 * b.sigma * b.sigma));
    }
    return base * rel;
  }
};

// Texture on the integer lattice around the reference image, sampled bilinearly in between.
struct Canvas {
  Image values;
  int margin = 0;

  double sample(double u, double v) const {
    const double x = std::clamp(u + margin, 0.0, double(values.cols() - 1));
    const double y = std::clamp(v + margin, 0.0, double(values.rows() - 1));
    return bilinear_sample(values, x, y).value;
  }
};

Canvas make_canvas(const SynthConfig& cfg, int margin, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  struct Wave {
    double kx, ky, phase, amplitude;
  };
  std::vector<Wave> waves;
  const double log_min = std::log(cfg.texture_period_min);
  const double log_max = std::log(cfg.texture_period_max);
  for (int i = 0; i < cfg.texture_waves; ++i) {
    const double period = std::exp(log_min + (log_max - log_min) * unit(rng));
    const double angle = two_pi * unit(rng);
    waves.push_back({std::cos(angle) * two_pi / period, std::sin(angle) * two_pi / period,
                     two_pi * unit(rng), 0.5 + unit(rng)});
  }
  Canvas canvas;
  canvas.margin = margin;
  canvas.values.resize(cfg.height + 2 * margin, cfg.width + 2 * margin);
  for (Eigen::Index r = 0; r < canvas.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < canvas.values.cols(); ++c) {
      double s = 0.0;
      for (const Wave& w : waves) s += w.amplitude * std::sin(w.kx * double(c) + w.ky * double(r) + w.phase);
      canvas.values(r, c) = s;
    }
  }
  const double lo = canvas.values.minCoeff();
  const double hi = canvas.values.maxCoeff();
  canvas.values = 0.1 + 0.8 * (canvas.values - lo) / std::max(hi - lo, 1e-12);
  return canvas;
}

DepthField make_depth_field(const SynthConfig& cfg, const CameraIntrinsics& k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DepthField field;
  field.base = cfg.base_depth;
  field.tilt = cfg.tilt;
  field.cy = k.cy;
  field.height = cfg.height;
  const double m = cfg.canvas_margin;
  for (int i = 0; i < cfg.bumps; ++i) {
    Bump b;
    b.u = -m + (cfg.width + 2 * m) * unit(rng);
    b.v = -m + (cfg.height + 2 * m) * unit(rng);
    b.sigma = cfg.height * (0.25 + 0.5 * unit(rng));
    b.amplitude = cfg.bump_amplitude * (unit(rng) < 0.5 ? -1.0 : 1.0);
    field.bumps.push_back(b);
  }
  return field;
}

std::vector<Pose6DoF> make_trajectory(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double speed_period = cfg.frames * (0.75 + unit(rng));
  const double speed_phase = two_pi * unit(rng);
  const double yaw_period = cfg.frames * (0.75 + unit(rng));
  const double yaw_phase = two_pi * unit(rng);

  std::vector<Pose6DoF> poses{Pose6DoF::identity()};
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double heading = 0.0;  // rotation of the camera about its y axis
  for (int t = 1; t < cfg.frames; ++t) {
    const bool stopped = cfg.stop_length > 0 && t > cfg.stop_at && t <= cfg.stop_at + cfg.stop_length;
    const double step =
        stopped ? 0.0 : cfg.speed * (1.0 + cfg.speed_variation * std::sin(two_pi * t / speed_period + speed_phase));
    if (!stopped) heading += cfg.yaw_rate * (1.0 + 0.5 * std::sin(two_pi * t / yaw_period + yaw_phase));
    const double travel = heading + cfg.heading_offset;
    position += step * Eigen::Vector3d(std::sin(travel), 0.0, std::cos(travel));
    poses.emplace_back(position, Eigen::Vector3d(0.0, heading, 0.0));
  }

  if (cfg.jitter_translation > 0.0 || cfg.jitter_rotation > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t t = 1; t < poses.size(); ++t) {
      Eigen::Vector3d dt;
      Eigen::Vector3d dr;
      for (int i = 0; i < 3; ++i) dt(i) = cfg.jitter_translation * gauss(rng);
      for (int i = 0; i < 3; ++i) dr(i) = cfg.jitter_rotation * gauss(rng);
      poses[t] = Pose6DoF(poses[t].translation() + dt, poses[t].orientation() + dr);
    }
  }
  return poses;
}

// Distance along the ray direction (whose camera-frame z is 1) to the first surface crossing.
double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const DepthField& field,
                 const CameraIntrinsics& k) {
  auto gap = [&](double s) {
    const Eigen::Vector3d p = origin + s * dir;
    if (p.z() <= 1e-6) return -std::numeric_limits<double>::infinity();
    const double u = k.fx * p.x() / p.z() + k.cx;
    const double v = k.fy * p.y() / p.z() + k.cy;
    return p.z() - field(u, v);
  };
  const double step = field.base / 40.0;
  const double limit = field.base * 50.0;
  double lo = 0.0;
  double hi = step;
  while (gap(hi) < 0.0) {
    lo = hi;
    hi += step;
    if (hi > limit) throw DomainError("synth_generate: camera ray does not reach the surface");
  }
  for (int i = 0; i < 80 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Sequence synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Sequence seq;
  CameraIntrinsics& k = seq.intrinsics;
  k.fx = k.fy = cfg.focal * cfg.width;
  k.cx = 0.5 * cfg.width - 0.5;
  k.cy = 0.5 * cfg.height - 0.5;
  k.width = cfg.width;
  k.height = cfg.height;

  const DepthField field = make_depth_field(cfg, k, rng);
  seq.gt_poses = make_trajectory(cfg, rng);

  // Reference-image coordinates seen by every pixel of every frame.
  std::vector<Image> us;
  std::vector<Image> vs;
  double reach = cfg.canvas_margin;
  for (int t = 0; t < cfg.frames; ++t) {
    const Pose6DoF& pose = seq.gt_poses[std::size_t(t)];
    const Eigen::Matrix3d r = pose.rotation();
    Image u(cfg.height, cfg.width);
    Image v(cfg.height, cfg.width);
    Image depth(cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        if (t == 0) {
          depth(y, x) = field(x, y);
          u(y, x) = x;
          v(y, x) = y;
          continue;
        }
        const Eigen::Vector3d dir = r * Eigen::Vector3d((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        const double s = intersect(pose.translation(), dir, field, k);
        const Eigen::Vector3d p = pose.translation() + s * dir;
        depth(y, x) = s;
        u(y, x) = k.fx * p.x() / p.z() + k.cx;
        v(y, x) = k.fy * p.y() / p.z() + k.cy;
        reach = std::max({reach, -u(y, x), u(y, x) - (cfg.width - 1), -v(y, x), v(y, x) - (cfg.height - 1)});
      }
    }
    us.push_back(std::move(u));
    vs.push_back(std::move(v));
    seq.gt_depths.push_back(std::move(depth));
  }

  const Canvas canvas = make_canvas(cfg, int(std::ceil(reach)) + 2, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < cfg.frames; ++t) {
    Frame frame;
    frame.timestamp = t * cfg.frame_interval;
    frame.intensity.resize(cfg.height, cfg.width);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        double value = canvas.sample(us[std::size_t(t)](y, x), vs[std::size_t(t)](y, x));
        if (cfg.noise > 0.0) value = std::clamp(value + cfg.noise * gauss(rng), 0.0, 1.0);
        frame.intensity(y, x) = value;
      }
    }
    seq.timestamps.push_back(frame.timestamp);
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void write_synthetic_dataset(const std::string& dir, const Sequence& seq, const SynthConfig& cfg) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "image_2", ec);
  if (!ec) fs::create_directories(root / "depth", ec);
  if (ec) throw LoadError("cannot create '" + dir + "': " + ec.message());
  char name[32];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06zu", i);
    write_png_gray((root / "image_2" / (std::string(name) + ".png")).string(), seq.frames[i].intensity);
    if (i < seq.gt_depths.size()) {
      pfm_write((root / "depth" / (std::string(name) + ".pfm")).string(), seq.gt_depths[i]);
    }
  }
  write_times((root / "times.txt").string(), seq.timestamps);
  write_kitti_poses((root / "poses.txt").string(), seq.gt_poses);
  {
    std::ofstream calib(root / "calib.txt");
    calib << format_kitti_calib(seq.intrinsics);
    if (!calib) throw LoadError("failed writing '" + (root / "calib.txt").string() + "'");
  }
  const std::string listing = cfg.serialize();
  std::ofstream manifest(root / "manifest.txt");
  manifest << std::setprecision(std::numeric_limits<double>::max_digits10);
  manifest << "seed=" << cfg.seed << '\n'
           << "jitter_translation=" << cfg.jitter_translation << '\n'
           << "jitter_rotation=" << cfg.jitter_rotation << '\n'
           << "config_hash=" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(listing)
           << std::dec << '\n'
           << "# config\n"
           << listing;
  if (!manifest) throw LoadError("failed writing '" + (root / "manifest.txt").string() + "'");
}

}  // namespace idvo
