#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "idvo/dataset_io.hpp"
#include "idvo/png_io.hpp"

namespace fs = std::filesystem;

namespace idvo {

namespace {

std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& tok, double& value) {
  if (tok.empty()) return false;
  char* end = nullptr;
  errno = 0;
  value = std::strtod(tok.c_str(), &end);
  return end == tok.c_str() + tok.size() && errno != ERANGE && std::isfinite(value);
}

std::vector<double> parse_numbers(const std::vector<std::string>& tokens, std::size_t expected,
                                  const std::string& source, int line) {
  if (tokens.size() != expected) {
    throw ParseError(where(source, line) + "expected " + std::to_string(expected) +
                     " numbers, found " + std::to_string(tokens.size()));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!parse_double(tokens[i], values[i])) {
      throw ParseError(where(source, line) + "token " + std::to_string(i + 1) + " ('" + tokens[i] +
                       "') is not a finite number");
    }
  }
  return values;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw LoadError("cannot write '" + path + "'");
  return out;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Size2 parse_size(const std::string& text) {
  const auto x = text.find_first_of("xX");
  Size2 s;
  try {
    std::size_t used_w = 0;
    std::size_t used_h = 0;
    if (x == std::string::npos) throw std::invalid_argument("no separator");
    s.width = std::stoi(text.substr(0, x), &used_w);
    s.height = std::stoi(text.substr(x + 1), &used_h);
    if (used_w != x || used_h != text.size() - x - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("size '" + text + "' is not of the form WxH");
  }
  if (s.width <= 0 || s.height <= 0) throw ParseError("size '" + text + "' must be positive");
  return s;
}

Pose6DoF parse_kitti_pose_line(const std::string& line, const std::string& source, int line_number) {
  const std::vector<double> v = parse_numbers(split_ws(line), 12, source, line_number);
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = v[std::size_t(4 * i + j)];
    t(i) = v[std::size_t(4 * i + 3)];
  }
  const double det = r.determinant();
  if (!(std::abs(det) > 1e-9)) {
    throw ParseError(where(source, line_number) + "rotation block is not invertible");
  }
  if (det < 0.0) throw ParseError(where(source, line_number) + "rotation block is a reflection");
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() > 1e-6) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
  }
  return Pose6DoF::from_rotation(r, t);
}

std::string format_kitti_pose_line(const Pose6DoF& pose) {
  const Eigen::Matrix3d r = pose.rotation();
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out << r(i, j) << ' ';
    out << pose.translation()(i) << (i < 2 ? " " : "");
  }
  return out.str();
}

std::vector<Pose6DoF> read_kitti_poses(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<Pose6DoF> poses;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (blank(line)) continue;
    poses.push_back(parse_kitti_pose_line(line, path, n));
  }
  return poses;
}

void write_kitti_poses(const std::string& path, const std::vector<Pose6DoF>& poses) {
  std::ofstream out = open_out(path);
  for (const Pose6DoF& p : poses) out << format_kitti_pose_line(p) << '\n';
  if (!out) throw LoadError("failed writing '" + path + "'");
}

CameraIntrinsics parse_kitti_calib(const std::string& text, int width, int height,
                                   const std::string& source, std::optional<Size2> resize_to) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::vector<std::string> tokens = split_ws(line);
    if (tokens.empty() || tokens.front() != "P2:") continue;
    tokens.erase(tokens.begin());
    const std::vector<double> p = parse_numbers(tokens, 12, source, n);
    CameraIntrinsics k;
    k.fx = p[0];
    k.cx = p[2];
    k.fy = p[5];
    k.cy = p[6];
    k.width = width;
    k.height = height;
    try {
      k.validate();
    } catch (const DomainError& e) {
      throw ParseError(where(source, n) + e.what());
    }
    if (resize_to) k = k.resized(resize_to->width, resize_to->height);
    return k;
  }
  throw ParseError(source + ": no 'P2:' line");
}

std::string format_kitti_calib(const CameraIntrinsics& k) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < 4; ++i) {
    out << 'P' << i << ": " << k.fx << " 0 " << k.cx << " 0 0 " << k.fy << ' ' << k.cy
        << " 0 0 0 1 0\n";
  }
  return out.str();
}

std::vector<double> read_times(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<double> times;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (blank(line)) continue;
    times.push_back(parse_numbers(split_ws(line), 1, path, n).front());
  }
  return times;
}

void write_times(const std::string& path, const std::vector<double>& times) {
  std::ofstream out = open_out(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (double t : times) out << t << '\n';
  if (!out) throw LoadError("failed writing '" + path + "'");
}

void pfm_write(const std::string& path, const Image& depth) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
  if (!depth.allFinite()) throw DomainError("pfm_write: depth map has non-finite values");
  std::ofstream out = open_out(path, true);
  out << "Pf\n" << depth.cols() << ' ' << depth.rows() << "\n-1.0\n";
  std::vector<float> row(std::size_t(depth.cols()));
  for (Eigen::Index r = depth.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < depth.cols(); ++c) row[std::size_t(c)] = float(depth(r, c));
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
  }
  if (!out) throw LoadError("failed writing '" + path + "'");
}

Image pfm_read(const std::string& path) {
  const std::string data = read_text(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic == "PF") throw FormatError(path + ": 3-channel PFM is not supported");
  if (magic != "Pf") throw FormatError(path + ": bad magic '" + magic.substr(0, 8) + "'");
  const std::string ws = next_token();
  const std::string hs = next_token();
  const std::string ss = next_token();
  double w = 0.0;
  double h = 0.0;
  double scale = 0.0;
  if (!parse_double(ws, w) || !parse_double(hs, h) || w < 1 || h < 1 || w != std::floor(w) ||
      h != std::floor(h)) {
    throw FormatError(path + ": bad dimensions '" + ws + " " + hs + "'");
  }
  if (!parse_double(ss, scale) || scale == 0.0) throw FormatError(path + ": bad scale '" + ss + "'");
  if (scale > 0.0) throw FormatError(path + ": big-endian PFM is not supported");
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos]))) {
    throw FormatError(path + ": header is not terminated");
  }
  ++pos;
  const auto cols = Eigen::Index(w);
  const auto rows = Eigen::Index(h);
  const std::size_t need = std::size_t(rows * cols) * sizeof(float);
  if (data.size() - pos != need) {
    throw FormatError(path + ": payload is " + std::to_string(data.size() - pos) + " bytes, expected " +
                      std::to_string(need));
  }
  Image out(rows, cols);
  const char* p = data.data() + pos;
  for (Eigen::Index r = rows - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      float f;
      std::memcpy(&f, p, sizeof(float));
      p += sizeof(float);
      out(r, c) = f;
    }
  }
  return out;
}

namespace {

std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Sequence load_sequence(const std::string& dir, std::optional<Size2> resize,
                       const std::string& pose_file, bool load_depth) {
  const fs::path root(dir);
  std::vector<std::string> problems;
  fs::path image_dir;
  for (const char* name : {"image_2", "image_0"}) {
    if (fs::is_directory(root / name)) {
      image_dir = root / name;
      break;
    }
  }
  if (image_dir.empty()) problems.push_back("no image_2/ or image_0/ directory");
  if (!fs::is_regular_file(root / "times.txt")) problems.push_back("missing times.txt");
  if (!fs::is_regular_file(root / "calib.txt")) problems.push_back("missing calib.txt");
  if (!pose_file.empty() && !fs::is_regular_file(pose_file)) {
    problems.push_back("missing pose file '" + pose_file + "'");
  }
  auto fail = [&] {
    std::string msg = "cannot load sequence '" + dir + "':";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw LoadError(msg);
  };
  if (!problems.empty()) fail();

  const std::vector<fs::path> images = numbered_files(image_dir, ".png");
  if (images.empty()) {
    problems.push_back("no numbered PNG files in " + image_dir.string());
    fail();
  }
  Sequence seq;
  try {
    seq.timestamps = read_times((root / "times.txt").string());
  } catch (const ParseError& e) {
    problems.push_back(e.what());
    fail();
  }
  if (seq.timestamps.size() != images.size()) {
    problems.push_back(std::to_string(images.size()) + " images but " +
                       std::to_string(seq.timestamps.size()) + " timestamps");
  }
  for (std::size_t i = 1; i < seq.timestamps.size(); ++i) {
    if (!(seq.timestamps[i] > seq.timestamps[i - 1])) {
      problems.push_back("timestamps not strictly increasing at line " + std::to_string(i + 1));
      break;
    }
  }
  if (!pose_file.empty()) {
    try {
      seq.gt_poses = read_kitti_poses(pose_file);
    } catch (const ParseError& e) {
      problems.push_back(e.what());
    }
    if (problems.empty() && seq.gt_poses.size() != images.size()) {
      problems.push_back(std::to_string(images.size()) + " images but " +
                         std::to_string(seq.gt_poses.size()) + " poses in " + pose_file);
    }
  }
  if (!problems.empty()) fail();

  for (std::size_t i = 0; i < images.size(); ++i) {
    Frame f;
    f.intensity = read_png_gray(images[i].string());
    f.timestamp = seq.timestamps[i];
    if (i > 0 && (f.width() != seq.frames[0].width() || f.height() != seq.frames[0].height())) {
      problems.push_back(images[i].filename().string() + " is " + std::to_string(f.width()) + "x" +
                         std::to_string(f.height()) + ", first frame is " +
                         std::to_string(seq.frames[0].width()) + "x" +
                         std::to_string(seq.frames[0].height()));
      fail();
    }
    seq.frames.push_back(std::move(f));
  }
  const int w0 = seq.frames[0].width();
  const int h0 = seq.frames[0].height();
  try {
    seq.intrinsics = parse_kitti_calib(read_text((root / "calib.txt").string()), w0, h0,
                                       (root / "calib.txt").string(), resize);
  } catch (const ParseError& e) {
    problems.push_back(e.what());
    fail();
  }
  if (resize && (resize->width != w0 || resize->height != h0)) {
    for (Frame& f : seq.frames) f.intensity = resize_area(f.intensity, resize->width, resize->height);
  }

  if (load_depth) {
    const fs::path depth_dir = root / "depth";
    std::vector<fs::path> depth_files;
    if (fs::is_directory(depth_dir)) depth_files = numbered_files(depth_dir, ".pfm");
    if (depth_files.size() != images.size()) {
      problems.push_back(std::to_string(images.size()) + " images but " +
                         std::to_string(depth_files.size()) + " depth maps in " + depth_dir.string());
      fail();
    }
    for (const fs::path& p : depth_files) {
      Image d = pfm_read(p.string());
      if (d.cols() != seq.intrinsics.width || d.rows() != seq.intrinsics.height) {
        d = resize_area(d, seq.intrinsics.width, seq.intrinsics.height);
      }
      seq.gt_depths.push_back(std::move(d));
    }
  }
  return seq;
}

std::vector<Snippet> make_snippets(const Sequence& seq, int len, int stride) {
  if (len < 2) throw DomainError("make_snippets: len must be >= 2");
  if (stride < 1) throw DomainError("make_snippets: stride must be >= 1");
  std::vector<Snippet> out;
  for (std::size_t i = 0; i + std::size_t(len) <= seq.frames.size(); i += std::size_t(stride)) {
    Snippet s;
    s.intrinsics = seq.intrinsics;
    s.first_index = int(i);
    s.frames.assign(seq.frames.begin() + std::ptrdiff_t(i), seq.frames.begin() + std::ptrdiff_t(i) + len);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace idvo
