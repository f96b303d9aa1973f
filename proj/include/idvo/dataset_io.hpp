#ifndef IDVO_DATASET_IO_HPP
#define IDVO_DATASET_IO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "idvo/geometry.hpp"
#include "idvo/image.hpp"
#include "idvo/synthesis.hpp"

namespace idvo {

struct Size2 {
  int width = 0;
  int height = 0;
};

// Parses "WxH", e.g. "416x128". Throws ParseError.
Size2 parse_size(const std::string& text);

// ---------------------------------------------------------------------------------------------
// KITTI text formats
// ---------------------------------------------------------------------------------------------

// 12 numbers, row-major 3x4 [R|t], camera-to-world. The rotation block is replaced by its
// nearest rotation when it deviates from orthonormal by more than 1e-6. Errors are reported as
// "<source>:<line>: ..." ParseErrors.
Pose6DoF parse_kitti_pose_line(const std::string& line, const std::string& source = "<input>",
                               int line_number = 1);
std::string format_kitti_pose_line(const Pose6DoF& pose);

std::vector<Pose6DoF> read_kitti_poses(const std::string& path);
void write_kitti_poses(const std::string& path, const std::vector<Pose6DoF>& poses);

// Intrinsics from the "P2:" projection line. width/height are the image size the calibration
// refers to; resize_to, if given, rescales to that size. Throws ParseError naming the source.
CameraIntrinsics parse_kitti_calib(const std::string& text, int width, int height,
                                   const std::string& source = "calib.txt",
                                   std::optional<Size2> resize_to = std::nullopt);
std::string format_kitti_calib(const CameraIntrinsics& k);

std::vector<double> read_times(const std::string& path);
void write_times(const std::string& path, const std::vector<double>& times);

// ---------------------------------------------------------------------------------------------
// PFM (single channel, little-endian, bottom-up rows)
// ---------------------------------------------------------------------------------------------

void pfm_write(const std::string& path, const Image& depth);
// Throws FormatError for a bad header, a big-endian scale or a short payload; LoadError if the
// file cannot be opened.
Image pfm_read(const std::string& path);

// ---------------------------------------------------------------------------------------------
// Sequences and snippets
// ---------------------------------------------------------------------------------------------

struct Sequence {
  std::vector<Frame> frames;
  CameraIntrinsics intrinsics;
  std::vector<double> timestamps;
  std::vector<Pose6DoF> gt_poses;   // camera-to-world; empty if unknown
  std::vector<Image> gt_depths;     // empty if unknown

  std::size_t size() const { return frames.size(); }
};

// Expects <dir>/image_2 (or image_0) with zero-padded numbered PNGs, <dir>/times.txt and
// <dir>/calib.txt. Images are area-resized when resize is given. pose_file, if non-empty, is
// attached as ground truth; <dir>/depth/*.pfm likewise when load_depth is set. Throws LoadError
// listing what is missing or inconsistent.
Sequence load_sequence(const std::string& dir, std::optional<Size2> resize = std::nullopt,
                       const std::string& pose_file = "", bool load_depth = false);

struct Snippet {
  std::vector<Frame> frames;
  CameraIntrinsics intrinsics;
  int first_index = 0;  // index of frames[0] in the sequence
};

// Windows [i, i + len) for i = 0, stride, 2 * stride, ... that fit inside the sequence.
std::vector<Snippet> make_snippets(const Sequence& seq, int len, int stride);

// ---------------------------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------------------------

struct SynthConfig {
  int width = 64;
  int height = 32;
  int frames = 20;
  std::uint64_t seed = 1;
  double focal = 0.8;          // fx = fy = focal * width
  // Scene: reference depth field seen from frame 0, plane plus smooth bumps.
  double base_depth = 1.0;
  double tilt = 0.3;           // depth change over one image height, fraction of base (saturating)
  int bumps = 3;
  double bump_amplitude = 0.19;  // fraction of base depth
  int texture_waves = 24;        // sinusoids in the texture
  double texture_period_min = 12.0;  // pixels
  double texture_period_max = 48.0;
  int canvas_margin = 64;        // bump placement region and minimum texture padding, pixels
  // Trajectory: travel direction rotated by heading_offset about the camera y axis.
  double speed = 0.1;            // scene units per frame
  double speed_variation = 0.15; // relative amplitude of a slow speed oscillation
  double yaw_rate = 0.004;       // radians per frame, slowly varying
  double heading_offset = 1.5708;  // radians; about pi/2 moves sideways
  // Zero-mean per-frame pose noise added before rendering.
  double jitter_translation = 0.0;
  double jitter_rotation = 0.0;
  // Camera holds still for stop_length frames after frame stop_at (0 length: no stop).
  int stop_at = 0;
  int stop_length = 0;
  double noise = 0.0;  // additive Gaussian intensity noise, standard deviation
  double frame_interval = 0.1;  // seconds

  void validate() const;
  // Stable key=value listing, used for the manifest and its hash.
  std::string serialize() const;
};

// Deterministic per seed. Frame 0 is the centre crop of a textured canvas; every other frame
// samples that canvas bilinearly through ground-truth depth and pose, so synthesis from frame 0
// with ground truth reproduces it exactly. Fills gt_poses and gt_depths.
Sequence synth_generate(const SynthConfig& cfg);

// FNV-1a 64-bit over bytes.
std::uint64_t fnv1a64(const std::string& bytes);

// Writes a KITTI-style tree: image_2/NNNNNN.png, times.txt, calib.txt, poses.txt,
// depth/NNNNNN.pfm and manifest.txt (seed, jitter, config hash, config listing).
void write_synthetic_dataset(const std::string& dir, const Sequence& seq, const SynthConfig& cfg);

}  // namespace idvo

#endif  // IDVO_DATASET_IO_HPP
