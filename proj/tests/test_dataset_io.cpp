#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "idvo/dataset_io.hpp"
#include "idvo/objective.hpp"
#include "idvo/evaluation.hpp"
#include "idvo/png_io.hpp"
#include "test_util.hpp"

using namespace idvo;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = IDVO_FIXTURE_DIR;

std::string fixture(const std::string& name) { return kFixtures + "/" + name; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

// ParseError whose message contains `needle`.
template <typename F>
void check_diagnostic(F&& f, const std::string& needle) {
  try {
    f();
    FAIL("expected a diagnostic containing " << needle);
  } catch (const std::runtime_error& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
  }
}

}  // namespace

TEST_CASE("kitti pose lines") {
  const Pose6DoF id = parse_kitti_pose_line("1 0 0 0 0 1 0 0 0 0 1 0");
  CHECK(id.translation() == Eigen::Vector3d::Zero());
  CHECK(id.orientation() == Eigen::Vector3d::Zero());
  CHECK(id.matrix() == Eigen::Matrix4d::Identity());

  const Pose6DoF t = parse_kitti_pose_line("1 0 0 5 0 1 0 0 0 0 1 0");
  CHECK(t.translation() == Eigen::Vector3d(5, 0, 0));
  CHECK(t.orientation() == Eigen::Vector3d::Zero());

  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const Pose6DoF p = test::random_pose(rng);
    const std::string line = format_kitti_pose_line(p);
    std::istringstream a(line), b(format_kitti_pose_line(parse_kitti_pose_line(line)));
    double x = 0, y = 0;
    int n = 0;
    while (a >> x && b >> y) {
      CHECK(std::abs(x - y) < 1e-9);
      ++n;
    }
    CHECK(n == 12);
  }

  // slightly drifted rotation is projected back onto SO(3)
  const Pose6DoF drift = parse_kitti_pose_line("1.00001 0 0 0 0 1 0 0 0 0 0.99999 0");
  CHECK((drift.rotation().transpose() * drift.rotation() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
}

TEST_CASE("malformed pose files produce diagnostics") {
  check_diagnostic([] { read_kitti_poses(fixture("poses_bad_count.txt")); }, "poses_bad_count.txt:2");
  check_diagnostic([] { read_kitti_poses(fixture("poses_bad_number.txt")); }, "poses_bad_number.txt:2");
  check_diagnostic([] { read_kitti_poses(fixture("poses_singular.txt")); }, "poses_singular.txt:1");
  check_diagnostic([] { read_kitti_poses(fixture("poses_reflection.txt")); }, "poses_reflection.txt:1");
  CHECK_THROWS_AS(read_kitti_poses(fixture("poses_bad_count.txt")), ParseError);
  CHECK_THROWS_AS(read_kitti_poses(fixture("missing.txt")), LoadError);
  CHECK_THROWS_AS(parse_kitti_pose_line("1 0 0 0 0 1 0 0 0 0 1 0 7"), ParseError);
  CHECK_THROWS_AS(parse_kitti_pose_line("1 0 0 0 0 1 0 0 0 0 1 inf"), ParseError);
}

TEST_CASE("kitti poses file round trip") {
  const std::string dir = test::scratch_dir("poses");
  std::mt19937_64 rng(32);
  std::vector<Pose6DoF> poses;
  for (int i = 0; i < 20; ++i) poses.push_back(test::random_pose(rng));
  write_kitti_poses(dir + "/p.txt", poses);
  const std::vector<Pose6DoF> back = read_kitti_poses(dir + "/p.txt");
  REQUIRE(back.size() == poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) CHECK((back[i].matrix() - poses[i].matrix()).norm() < 1e-12);
}

TEST_CASE("kitti calibration") {
  const std::string text = read_file(fixture("calib.txt"));
  const CameraIntrinsics k = parse_kitti_calib(text, 1241, 376);
  CHECK(k.fx == 718.856);
  CHECK(k.fy == 718.856);
  CHECK(k.cx == doctest::Approx(607.193).epsilon(1e-6));
  CHECK(k.cy == doctest::Approx(185.2157).epsilon(1e-9));

  const CameraIntrinsics r = parse_kitti_calib(text, 1241, 376, "calib.txt", Size2{416, 128});
  CHECK(r.fx == doctest::Approx(718.856 * 416.0 / 1241.0).epsilon(1e-12));
  CHECK(r.width == 416);

  check_diagnostic([] { parse_kitti_calib(read_file(fixture("calib_no_p2.txt")), 1241, 376, "calib_no_p2.txt"); },
                   "calib_no_p2.txt");
  check_diagnostic([] { parse_kitti_calib(read_file(fixture("calib_short_p2.txt")), 1241, 376, "calib_short_p2.txt"); },
                   "calib_short_p2.txt:1");

  const CameraIntrinsics again = parse_kitti_calib(format_kitti_calib(k), 1241, 376);
  CHECK(again == k);
}

TEST_CASE("parse_size") {
  const Size2 s = parse_size("416x128");
  CHECK(s.width == 416);
  CHECK(s.height == 128);
  CHECK_THROWS_AS(parse_size("416"), ParseError);
  CHECK_THROWS_AS(parse_size("0x8"), ParseError);
  CHECK_THROWS_AS(parse_size("12xq"), ParseError);
}

TEST_CASE("pfm") {
  const std::string dir = test::scratch_dir("pfm");
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<float> u(0.1f, 80.0f);
  Image depth(5, 7);
  for (Eigen::Index i = 0; i < depth.size(); ++i) depth.data()[i] = double(u(rng));
  pfm_write(dir + "/a.pfm", depth);
  CHECK((pfm_read(dir + "/a.pfm") == depth).all());

  // rows are stored bottom-up
  const std::string bytes = read_file(dir + "/a.pfm");
  const std::string header = "Pf\n7 5\n-1.0\n";
  REQUIRE(bytes.substr(0, header.size()) == header);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  CHECK(double(first) == depth(4, 0));

  pfm_write(dir + "/b.pfm", Image::Constant(2, 2, 3.0));
  CHECK(fs::file_size(dir + "/b.pfm") == std::string("Pf\n2 2\n-1.0\n").size() + 16);

  std::string big = read_file(dir + "/b.pfm");
  big.replace(big.find("-1.0"), 4, "1.0");
  write_file(dir + "/big.pfm", big);
  check_diagnostic([&] { pfm_read(dir + "/big.pfm"); }, "big-endian");
  CHECK_THROWS_AS(pfm_read(dir + "/big.pfm"), FormatError);

  write_file(dir + "/magic.pfm", "P6\n2 2\n255\n");
  CHECK_THROWS_AS(pfm_read(dir + "/magic.pfm"), FormatError);
  write_file(dir + "/color.pfm", "PF\n2 2\n-1.0\n");
  CHECK_THROWS_AS(pfm_read(dir + "/color.pfm"), FormatError);
  write_file(dir + "/dims.pfm", "Pf\n-2 x\n-1.0\n");
  CHECK_THROWS_AS(pfm_read(dir + "/dims.pfm"), FormatError);
  write_file(dir + "/short.pfm", read_file(dir + "/b.pfm").substr(0, 20));
  CHECK_THROWS_AS(pfm_read(dir + "/short.pfm"), FormatError);
  write_file(dir + "/empty.pfm", "");
  CHECK_THROWS_AS(pfm_read(dir + "/empty.pfm"), FormatError);
  CHECK_THROWS_AS(pfm_read(dir + "/none.pfm"), LoadError);

  Image bad = Image::Constant(2, 2, 1.0);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(pfm_write(dir + "/nan.pfm", bad), DomainError);
}

TEST_CASE("load_sequence on the mini fixture") {
  const std::string dir = fixture("mini_seq");
  const Sequence seq = load_sequence(dir, std::nullopt, dir + "/poses.txt", true);
  REQUIRE(seq.size() == 10);
  const std::vector<double> times = read_times(dir + "/times.txt");
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(seq.frames[i].timestamp == times[i]);
    CHECK(seq.frames[i].width() == 64);
    CHECK(seq.frames[i].height() == 32);
  }
  CHECK(seq.gt_poses.size() == 10);
  CHECK(seq.gt_depths.size() == 10);
  CHECK(seq.intrinsics.fx == doctest::Approx(51.2));

  // frames are stored as 8-bit PNG and regenerate from the manifest seed
  SynthConfig cfg;
  cfg.frames = 10;
  const Sequence fresh = synth_generate(cfg);
  CHECK((seq.frames[3].intensity - fresh.frames[3].intensity).abs().maxCoeff() <= 0.5 / 255 + 1e-12);
  CHECK((seq.gt_depths[3] - fresh.gt_depths[3]).abs().maxCoeff() < 1e-5);

  const Sequence big = load_sequence(dir, Size2{416, 128});
  for (const Frame& f : big.frames) {
    CHECK(f.width() == 416);
    CHECK(f.height() == 128);
  }
  CHECK(big.intrinsics.fx == doctest::Approx(51.2 * 416 / 64));
}

TEST_CASE("load_sequence diagnostics") {
  const std::string dir = test::scratch_dir("broken_seq");
  fs::copy(fixture("mini_seq"), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  std::vector<Pose6DoF> poses = read_kitti_poses(dir + "/poses.txt");
  poses.pop_back();
  write_kitti_poses(dir + "/short_poses.txt", poses);
  check_diagnostic([&] { load_sequence(dir, std::nullopt, dir + "/short_poses.txt"); }, "9");
  CHECK_THROWS_AS(load_sequence(dir, std::nullopt, dir + "/short_poses.txt"), LoadError);

  fs::remove(dir + "/times.txt");
  check_diagnostic([&] { load_sequence(dir); }, "times.txt");
  CHECK_THROWS_AS(load_sequence(test::scratch_dir("empty_seq")), LoadError);
}

TEST_CASE("make_snippets") {
  Sequence seq;
  for (int i = 0; i < 10; ++i) seq.frames.push_back(Frame{Image::Constant(8, 8, 0.1 * i), 0.1 * i});
  CHECK(make_snippets(seq, 5, 5).size() == 2);
  const std::vector<Snippet> s = make_snippets(seq, 5, 1);
  REQUIRE(s.size() == 6);
  CHECK(s[3].first_index == 3);
  CHECK(s[3].frames[0].timestamp == seq.frames[3].timestamp);
  CHECK(s[3].frames[4].timestamp == seq.frames[7].timestamp);
  CHECK(make_snippets(seq, 11, 1).empty());
  CHECK_THROWS_AS(make_snippets(seq, 1, 1), DomainError);
  CHECK_THROWS_AS(make_snippets(seq, 5, 0), DomainError);
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.frames = 6;
  const Sequence a = synth_generate(cfg);
  const Sequence b = synth_generate(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a.frames[i].intensity == b.frames[i].intensity).all());
    CHECK(a.gt_poses[i].vector() == b.gt_poses[i].vector());
  }

  SynthConfig still = cfg;
  still.speed = 0.0;
  still.yaw_rate = 0.0;
  const Sequence s = synth_generate(still);
  for (const Frame& f : s.frames) CHECK((f.intensity - s.frames[0].intensity).abs().maxCoeff() < 1e-9);

  SynthConfig cv = cfg;
  cv.frames = 12;
  cv.speed_variation = 0.0;
  cv.yaw_rate = 0.0;
  const MotionSeries m = motion_series(synth_generate(cv).gt_poses);
  for (double x : m.a) CHECK(std::abs(x) < 1e-12);

  SynthConfig longer = cfg;
  longer.frames = 20;
  const Sequence clean = synth_generate(longer);
  CHECK(inertia_loss(clean.gt_poses, InertiaParams{}).value == 0.0);
  SynthConfig jit = longer;
  jit.jitter_translation = 0.01;
  jit.jitter_rotation = 0.002;
  const Sequence jittered = synth_generate(jit);
  CHECK(smoothness(jittered.gt_poses).mean_abs_jerk > smoothness(clean.gt_poses).mean_abs_jerk);
  CHECK(smoothness(jittered.gt_poses).sawtooth_index > smoothness(clean.gt_poses).sawtooth_index);

  SynthConfig bad = cfg;
  bad.width = 60;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = cfg;
  bad.bump_amplitude = 0.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("synthetic dataset on disk") {
  SynthConfig cfg;
  cfg.frames = 6;
  const std::string a = test::scratch_dir("synth_a");
  const std::string b = test::scratch_dir("synth_b");
  write_synthetic_dataset(a, synth_generate(cfg), cfg);
  write_synthetic_dataset(b, synth_generate(cfg), cfg);
  CHECK(read_file(a + "/manifest.txt") == read_file(b + "/manifest.txt"));
  const Sequence seq = load_sequence(a, std::nullopt, a + "/poses.txt", true);
  CHECK(seq.size() == 6);

  cfg.jitter_translation = 0.02;
  const std::string c = test::scratch_dir("synth_c");
  write_synthetic_dataset(c, synth_generate(cfg), cfg);
  CHECK(read_file(c + "/manifest.txt").find("jitter_translation=0.02") != std::string::npos);
  CHECK(read_file(c + "/manifest.txt") != read_file(a + "/manifest.txt"));
}
