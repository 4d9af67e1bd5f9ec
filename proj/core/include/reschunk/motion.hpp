#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "reschunk/random.hpp"

namespace reschunk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Representation { positions3d, angle_axis };

std::string to_string(Representation rep);
Representation representation_from_string(const std::string& s);

/// Static description of a skeleton. K = joint_count * per_joint_dim is the
/// flattened per-frame pose width used everywhere else.
struct SkeletonSpec {
  int joint_count = 0;
  int per_joint_dim = 3;
  std::vector<std::string> joint_names;
  std::optional<std::vector<int>> parent_index;       // -1 marks the root
  std::optional<std::vector<Eigen::Vector3d>> bone_offsets;  // millimeters
  Representation representation = Representation::positions3d;

  int K() const { return joint_count * per_joint_dim; }
  void validate() const;
};

struct MotionSequence {
  SkeletonSpec skeleton;
  double fps = 0.0;
  Matrix frames;  // [T_total x K]
  std::string name;
  // Planted grouping for synthetic data; empty for real captures.
  std::vector<int> planted_groups;

  int total_frames() const { return static_cast<int>(frames.rows()); }
  void validate() const;
};

struct WindowSample {
  Matrix input;   // x0, [T x K]
  Matrix target;  // y0, [p x K]
  std::string source_id;
  int start_frame = 0;
};

struct WindowingConfig {
  double window_seconds = 3.0;
  int stride_frames = 10;
  double crop_seconds = 2.0;
  double input_fraction = 0.5;
};

struct FrameRange {
  int begin = 0;
  int end = 0;  // exclusive
  int length() const { return end - begin; }
};

// MTF (Motion Text Format): line 1 is a one-line JSON header, every further
// line is one frame of K whitespace-separated decimal floats.
MotionSequence load_sequence(const std::string& path);
MotionSequence load_sequence(const std::string& path, const SkeletonSpec& skeleton);
void save_sequence(const MotionSequence& seq, const std::string& path);

std::vector<FrameRange> slide_windows(const MotionSequence& seq, const WindowingConfig& cfg);

WindowSample crop_sample(const MotionSequence& seq, const FrameRange& range,
                         const WindowingConfig& cfg, Rng& rng);

/// 3D joint positions in millimeters, one row per frame, laid out as
/// [x_0 y_0 z_0 x_1 y_1 z_1 ...]. positions3d sequences pass through
/// unchanged; angle_axis sequences run forward kinematics over the skeleton
/// tree with the root pinned at the origin.
Matrix to_positions(const MotionSequence& seq);
Matrix to_positions(const Matrix& frames, const SkeletonSpec& skeleton);

struct SynthConfig {
  int n_sequences = 1;
  int joints = 8;
  double fps = 25.0;
  double seconds = 10.0;
  int n_groups = 2;
  double base_hz = 0.4;       // group g oscillates at base_hz * (1 + g)
  double amplitude = 100.0;   // mm
  double jitter = 0.0;        // per-frame observation noise, mm
};

/// Synthetic positions3d sequences whose joints ride superposed sinusoids.
/// Joints inside a planted group share frequency and phase, so groups are
/// correlated by construction; the planted partition is recorded on each
/// sequence for grouping diagnostics.
std::vector<MotionSequence> synth_dataset(const SynthConfig& cfg, Rng& rng);

SkeletonSpec make_synth_skeleton(int joints);

}  // namespace reschunk
