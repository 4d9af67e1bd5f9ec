#include "reschunk/motion.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "reschunk/errors.hpp"

namespace reschunk {

using nlohmann::json;

std::string to_string(Representation rep) {
  return rep == Representation::positions3d ? "positions3d" : "angle_axis";
}

Representation representation_from_string(const std::string& s) {
  if (s == "positions3d") return Representation::positions3d;
  if (s == "angle_axis") return Representation::angle_axis;
  throw FormatError("unknown representation: " + s);
}

void SkeletonSpec::validate() const {
  if (joint_count <= 0) throw ConfigError("joint_count must be positive");
  if (per_joint_dim <= 0) throw ConfigError("per_joint_dim must be positive");
  if (!joint_names.empty() && static_cast<int>(joint_names.size()) != joint_count)
    throw ConfigError("joint_names size does not match joint_count");
  if (representation == Representation::angle_axis) {
    if (!parent_index || !bone_offsets)
      throw ConfigError("angle_axis representation requires parent_index and bone_offsets");
  }
  if (parent_index) {
    if (static_cast<int>(parent_index->size()) != joint_count)
      throw ConfigError("parent_index size does not match joint_count");
    int roots = 0;
    for (int j = 0; j < joint_count; ++j) {
      int p = (*parent_index)[j];
      if (p == -1) {
        ++roots;
      } else if (p < 0 || p >= joint_count) {
        throw ConfigError("parent_index out of range at joint " + std::to_string(j));
      }
    }
    if (roots != 1) throw ConfigError("parent graph must have exactly one root");
    // Tree check: every joint must reach the root without cycles.
    for (int j = 0; j < joint_count; ++j) {
      int cur = j, hops = 0;
      while (cur != -1) {
        cur = (*parent_index)[cur];
        if (++hops > joint_count) throw ConfigError("parent graph contains a cycle");
      }
    }
  }
  if (bone_offsets && static_cast<int>(bone_offsets->size()) != joint_count)
    throw ConfigError("bone_offsets size does not match joint_count");
}

void MotionSequence::validate() const {
  skeleton.validate();
  if (fps <= 0.0) throw ConfigError("fps must be positive");
  if (frames.rows() < 1) throw DataError("sequence must contain at least one frame");
  if (frames.cols() != skeleton.K())
    throw ShapeError("frame width " + std::to_string(frames.cols()) +
                     " does not match skeleton K=" + std::to_string(skeleton.K()));
  if (!frames.allFinite()) throw DataError("sequence contains non-finite values");
}

namespace {

json skeleton_header(const MotionSequence& seq) {
  json h;
  h["name"] = seq.name;
  h["fps"] = seq.fps;
  h["J"] = seq.skeleton.joint_count;
  h["D"] = seq.skeleton.per_joint_dim;
  h["representation"] = to_string(seq.skeleton.representation);
  h["joint_names"] = seq.skeleton.joint_names;
  if (seq.skeleton.parent_index) h["parents"] = *seq.skeleton.parent_index;
  if (seq.skeleton.bone_offsets) {
    json offs = json::array();
    for (const auto& o : *seq.skeleton.bone_offsets) offs.push_back({o.x(), o.y(), o.z()});
    h["offsets"] = offs;
  }
  if (!seq.planted_groups.empty()) h["groups"] = seq.planted_groups;
  return h;
}

MotionSequence parse_mtf(std::istream& in, const std::string& path) {
  std::string header_line;
  if (!std::getline(in, header_line))
    throw FormatError(path + ": empty file, missing MTF header");
  json h;
  try {
    h = json::parse(header_line);
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed MTF header: " + e.what());
  }
  if (!h.is_object() || !h.contains("fps") || !h.contains("J") || !h.contains("D") ||
      !h.contains("representation"))
    throw FormatError(path + ": MTF header must declare fps, J, D, representation");

  MotionSequence seq;
  seq.name = h.value("name", std::string{});
  seq.fps = h.at("fps").get<double>();
  seq.skeleton.joint_count = h.at("J").get<int>();
  seq.skeleton.per_joint_dim = h.at("D").get<int>();
  seq.skeleton.representation = representation_from_string(h.at("representation").get<std::string>());
  if (h.contains("joint_names"))
    seq.skeleton.joint_names = h.at("joint_names").get<std::vector<std::string>>();
  if (h.contains("parents"))
    seq.skeleton.parent_index = h.at("parents").get<std::vector<int>>();
  if (h.contains("offsets")) {
    std::vector<Eigen::Vector3d> offs;
    for (const auto& o : h.at("offsets")) {
      if (!o.is_array() || o.size() != 3)
        throw FormatError(path + ": each bone offset must be a 3-vector");
      offs.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
    }
    seq.skeleton.bone_offsets = std::move(offs);
  }
  if (h.contains("groups")) seq.planted_groups = h.at("groups").get<std::vector<int>>();

  const int K = seq.skeleton.K();
  std::vector<double> values;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int count = 0;
    double v;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (!ls.eof())
      throw DataError(path + ": row " + std::to_string(row) + " contains a non-numeric token");
    if (count != K)
      throw ShapeError(path + ": row " + std::to_string(row) + " has " + std::to_string(count) +
                       " values, expected K=" + std::to_string(K));
    for (int c = 0; c < K; ++c) {
      if (!std::isfinite(values[values.size() - K + c]))
        throw DataError(path + ": non-finite value at row " + std::to_string(row));
    }
    ++row;
  }
  if (row == 0) throw DataError(path + ": no frames");
  seq.frames.resize(row, K);
  for (int r = 0; r < row; ++r)
    for (int c = 0; c < K; ++c) seq.frames(r, c) = values[static_cast<size_t>(r) * K + c];
  seq.validate();
  return seq;
}

}  // namespace

MotionSequence load_sequence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_mtf(in, path);
}

MotionSequence load_sequence(const std::string& path, const SkeletonSpec& skeleton) {
  MotionSequence seq = load_sequence(path);
  if (seq.skeleton.joint_count != skeleton.joint_count ||
      seq.skeleton.per_joint_dim != skeleton.per_joint_dim)
    throw FormatError(path + ": declared J/D do not match the expected skeleton");
  if (seq.skeleton.representation != skeleton.representation)
    throw FormatError(path + ": representation does not match the expected skeleton");
  return seq;
}

void save_sequence(const MotionSequence& seq, const std::string& path) {
  seq.validate();
  std::ofstream out(path, std::ios::binary);  // binary: force LF line endings
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << skeleton_header(seq).dump() << "\n";
  char buf[40];
  for (Eigen::Index r = 0; r < seq.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < seq.frames.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", seq.frames(r, c));
      if (c) out << ' ';
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw FormatError("failed writing " + path);
}

std::vector<FrameRange> slide_windows(const MotionSequence& seq, const WindowingConfig& cfg) {
  const int W = static_cast<int>(std::llround(cfg.window_seconds * seq.fps));
  if (W < 2) throw ConfigError("window shorter than 2 frames");
  if (cfg.stride_frames <= 0) throw ConfigError("stride_frames must be positive");
  std::vector<FrameRange> ranges;
  const int T = seq.total_frames();
  for (int s = 0; s + W <= T; s += cfg.stride_frames) ranges.push_back({s, s + W});
  return ranges;
}

WindowSample crop_sample(const MotionSequence& seq, const FrameRange& range,
                         const WindowingConfig& cfg, Rng& rng) {
  const int W = range.length();
  const int L = static_cast<int>(std::llround(cfg.crop_seconds * seq.fps));
  if (L < 2) throw ConfigError("crop shorter than 2 frames");
  if (L > W) throw ConfigError("crop_seconds longer than window_seconds");
  if (cfg.input_fraction <= 0.0 || cfg.input_fraction >= 1.0)
    throw ConfigError("input_fraction must lie in (0,1)");
  const int slack = W - L;
  int offset = 0;
  if (slack > 0) offset = std::uniform_int_distribution<int>(0, slack)(rng);
  const int start = range.begin + offset;
  int n_in = static_cast<int>(std::llround(L * cfg.input_fraction));
  n_in = std::max(1, std::min(L - 1, n_in));
  WindowSample sample;
  sample.input = seq.frames.middleRows(start, n_in);
  sample.target = seq.frames.middleRows(start + n_in, L - n_in);
  sample.source_id = seq.name;
  sample.start_frame = start;
  return sample;
}

namespace {

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& aa) {
  const double theta = aa.norm();
  if (theta < 1e-12) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, aa / theta).toRotationMatrix();
}

}  // namespace

Matrix to_positions(const Matrix& frames, const SkeletonSpec& skeleton) {
  if (frames.cols() != skeleton.K())
    throw ShapeError("frame width does not match skeleton K");
  if (skeleton.representation == Representation::positions3d) return frames;

  if (!skeleton.parent_index || !skeleton.bone_offsets)
    throw ConfigError("angle_axis conversion requires parent_index and bone_offsets");
  const auto& parents = *skeleton.parent_index;
  const auto& offsets = *skeleton.bone_offsets;
  const int J = skeleton.joint_count;
  const int T = static_cast<int>(frames.rows());

  // Topological order: parents always precede children.
  std::vector<int> order;
  order.reserve(J);
  std::vector<bool> placed(J, false);
  while (static_cast<int>(order.size()) < J) {
    for (int j = 0; j < J; ++j) {
      if (placed[j]) continue;
      if (parents[j] == -1 || placed[parents[j]]) {
        order.push_back(j);
        placed[j] = true;
      }
    }
  }

  Matrix out(T, 3 * J);
  std::vector<Eigen::Matrix3d> rot(J);
  std::vector<Eigen::Vector3d> pos(J);
  for (int t = 0; t < T; ++t) {
    for (int j : order) {
      const Eigen::Vector3d aa = frames.block<1, 3>(t, 3 * j).transpose();
      const Eigen::Matrix3d local = rodrigues(aa);
      if (parents[j] == -1) {
        rot[j] = local;
        pos[j] = Eigen::Vector3d::Zero();  // root translation fixed at origin
      } else {
        const int p = parents[j];
        pos[j] = pos[p] + rot[p] * offsets[j];
        rot[j] = rot[p] * local;
      }
      out.block<1, 3>(t, 3 * j) = pos[j].transpose();
    }
  }
  return out;
}

Matrix to_positions(const MotionSequence& seq) {
  return to_positions(seq.frames, seq.skeleton);
}

SkeletonSpec make_synth_skeleton(int joints) {
  SkeletonSpec sk;
  sk.joint_count = joints;
  sk.per_joint_dim = 3;
  sk.representation = Representation::positions3d;
  sk.joint_names.reserve(joints);
  for (int j = 0; j < joints; ++j) sk.joint_names.push_back("joint" + std::to_string(j));
  return sk;
}

std::vector<MotionSequence> synth_dataset(const SynthConfig& cfg, Rng& rng) {
  if (cfg.n_sequences <= 0 || cfg.joints <= 0 || cfg.fps <= 0.0 || cfg.seconds <= 0.0 ||
      cfg.n_groups <= 0 || cfg.n_groups > cfg.joints)
    throw ConfigError("synth_dataset arguments must be positive and n_groups <= joints");

  const int J = cfg.joints;
  const int T = std::max(2, static_cast<int>(std::llround(cfg.fps * cfg.seconds)));
  // Contiguous blocks; group ids are already ordered by lowest member.
  std::vector<int> groups(J);
  for (int j = 0; j < J; ++j) groups[j] = std::min(cfg.n_groups - 1, j * cfg.n_groups / J);

  std::vector<MotionSequence> out;
  out.reserve(cfg.n_sequences);
  for (int s = 0; s < cfg.n_sequences; ++s) {
    MotionSequence seq;
    seq.skeleton = make_synth_skeleton(J);
    seq.fps = cfg.fps;
    seq.name = "synth" + std::to_string(s);
    seq.planted_groups = groups;
    seq.frames.resize(T, 3 * J);

    // One base and one overtone oscillation per group; well-separated
    // frequencies keep the groups dynamically distinct.
    std::vector<double> freq(cfg.n_groups), phase(cfg.n_groups), phase2(cfg.n_groups);
    for (int g = 0; g < cfg.n_groups; ++g) {
      freq[g] = cfg.base_hz * (1.0 + g);
      phase[g] = 2.0 * M_PI * uniform01(rng);
      phase2[g] = 2.0 * M_PI * uniform01(rng);
    }
    std::vector<Eigen::Vector3d> center(J);
    for (int j = 0; j < J; ++j)
      center[j] = Eigen::Vector3d(normal01(rng), normal01(rng), normal01(rng)) * 2.5 * cfg.amplitude;

    for (int t = 0; t < T; ++t) {
      const double tt = t / cfg.fps;
      for (int j = 0; j < J; ++j) {
        const int g = groups[j];
        for (int d = 0; d < 3; ++d) {
          const double w = 2.0 * M_PI * freq[g];
          double v = center[j][d] +
                     cfg.amplitude * std::sin(w * tt + phase[g] + 0.7 * d) +
                     0.4 * cfg.amplitude * std::sin(2.0 * w * tt + phase2[g] + 0.3 * d);
          if (cfg.jitter > 0.0) v += cfg.jitter * normal01(rng);
          seq.frames(t, 3 * j + d) = v;
        }
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace reschunk
