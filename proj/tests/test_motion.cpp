#include <doctest.h>
#include <cmath>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reschunk/errors.hpp"
#include "reschunk/motion.hpp"

using namespace reschunk;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

MotionSequence tiny_sequence() {
  MotionSequence seq;
  seq.skeleton = make_synth_skeleton(2);
  seq.fps = 10.0;
  seq.name = "tiny";
  seq.frames.resize(4, 6);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) seq.frames(r, c) = 0.1 * r + 0.01 * c + 1.0 / 3.0;
  return seq;
}

}  // namespace

TEST_CASE("mtf round trip preserves header fields and exact frame values") {
  MotionSequence seq = tiny_sequence();
  seq.planted_groups = {0, 1};
  const std::string path = temp_path("roundtrip.mtf");
  save_sequence(seq, path);
  MotionSequence back = load_sequence(path);
  CHECK(back.name == "tiny");
  CHECK(back.fps == 10.0);
  CHECK(back.skeleton.joint_count == 2);
  CHECK(back.skeleton.per_joint_dim == 3);
  CHECK(back.planted_groups == seq.planted_groups);
  CHECK(back.frames.rows() == 4);
  // %.17g round-trips doubles exactly.
  CHECK((back.frames.array() == seq.frames.array()).all());
  fs::remove(path);
}

TEST_CASE("mtf rejects malformed input naming the offending row") {
  const std::string path = temp_path("bad.mtf");

  SUBCASE("short row") {
    std::ofstream out(path);
    out << R"({"fps":10,"J":2,"D":3,"representation":"positions3d"})" << "\n";
    out << "1 2 3 4 5 6\n1 2 3\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_sequence(path), doctest::Contains("row 1"), ShapeError);
  }
  SUBCASE("non-numeric token") {
    std::ofstream out(path);
    out << R"({"fps":10,"J":2,"D":3,"representation":"positions3d"})" << "\n";
    out << "1 2 x 4 5 6\n";
    out.close();
    CHECK_THROWS_AS(load_sequence(path), DataError);
  }
  SUBCASE("non-finite value") {
    std::ofstream out(path);
    out << R"({"fps":10,"J":2,"D":3,"representation":"positions3d"})" << "\n";
    out << "1 2 inf 4 5 6\n";
    out.close();
    CHECK_THROWS_AS(load_sequence(path), DataError);
  }
  SUBCASE("missing header key") {
    std::ofstream out(path);
    out << R"({"fps":10,"J":2})" << "\n1 2 3 4 5 6\n";
    out.close();
    CHECK_THROWS_AS(load_sequence(path), FormatError);
  }
  SUBCASE("header not json") {
    std::ofstream out(path);
    out << "not json\n";
    out.close();
    CHECK_THROWS_AS(load_sequence(path), FormatError);
  }
  fs::remove(path);
}

TEST_CASE("skeleton validation catches broken parent graphs") {
  SkeletonSpec sk = make_synth_skeleton(3);
  SUBCASE("two roots") {
    sk.parent_index = std::vector<int>{-1, -1, 1};
    CHECK_THROWS_AS(sk.validate(), ConfigError);
  }
  SUBCASE("cycle") {
    sk.parent_index = std::vector<int>{-1, 2, 1};
    CHECK_THROWS_AS(sk.validate(), ConfigError);
  }
  SUBCASE("angle_axis needs offsets") {
    sk.representation = Representation::angle_axis;
    sk.parent_index = std::vector<int>{-1, 0, 1};
    CHECK_THROWS_AS(sk.validate(), ConfigError);
  }
}

TEST_CASE("slide_windows covers the sequence with the configured stride") {
  MotionSequence seq;
  seq.skeleton = make_synth_skeleton(1);
  seq.fps = 10.0;
  seq.frames = Matrix::Zero(55, 3);
  WindowingConfig cfg;
  cfg.window_seconds = 3.0;  // 30 frames
  cfg.stride_frames = 10;
  auto windows = slide_windows(seq, cfg);
  REQUIRE(windows.size() == 3);
  CHECK(windows[0].begin == 0);
  CHECK(windows[1].begin == 10);
  CHECK(windows[2].begin == 20);
  for (const auto& w : windows) CHECK(w.length() == 30);

  SUBCASE("window longer than sequence yields nothing") {
    seq.frames = Matrix::Zero(20, 3);
    CHECK(slide_windows(seq, cfg).empty());
  }
}

TEST_CASE("crop_sample splits a contiguous crop into input and target") {
  MotionSequence seq;
  seq.skeleton = make_synth_skeleton(1);
  seq.fps = 10.0;
  seq.frames.resize(40, 3);
  for (int r = 0; r < 40; ++r) seq.frames.row(r).setConstant(r);

  WindowingConfig cfg;
  cfg.window_seconds = 3.0;  // 30 frames
  cfg.crop_seconds = 2.0;    // 20 frames
  cfg.input_fraction = 0.5;
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    WindowSample s = crop_sample(seq, {5, 35}, cfg, rng);
    REQUIRE(s.input.rows() == 10);
    REQUIRE(s.target.rows() == 10);
    CHECK(s.start_frame >= 5);
    CHECK(s.start_frame + 20 <= 35);
    // y0 immediately follows x0 in the source.
    CHECK(s.input(0, 0) == s.start_frame);
    CHECK(s.target(0, 0) == s.input(9, 0) + 1);
  }

  SUBCASE("crop longer than window is rejected") {
    cfg.crop_seconds = 4.0;
    CHECK_THROWS_AS(crop_sample(seq, {5, 35}, cfg, rng), ConfigError);
  }
}

TEST_CASE("forward kinematics matches a hand-computed two-bone chain") {
  SkeletonSpec sk;
  sk.joint_count = 3;
  sk.per_joint_dim = 3;
  sk.representation = Representation::angle_axis;
  sk.parent_index = std::vector<int>{-1, 0, 1};
  sk.bone_offsets = std::vector<Eigen::Vector3d>{
      {0, 0, 0}, {10, 0, 0}, {10, 0, 0}};
  sk.joint_names = {"root", "a", "b"};

  // Root rotates 90 degrees about z; middle joint another 90 degrees.
  const double half_pi = std::acos(0.0);
  Matrix frames(1, 9);
  frames << 0, 0, half_pi, 0, 0, half_pi, 0, 0, 0;
  Matrix pos = to_positions(frames, sk);
  CHECK(pos(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  // Joint a: root rotation sends (10,0,0) to (0,10,0).
  CHECK(pos(0, 3) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(pos(0, 4) == doctest::Approx(10.0));
  // Joint b: accumulated 180 degrees sends its offset to (-10,0,0) from a.
  CHECK(pos(0, 6) == doctest::Approx(-10.0));
  CHECK(pos(0, 7) == doctest::Approx(10.0));

  SUBCASE("zero angles reduce to cumulative offsets") {
    Matrix rest = Matrix::Zero(1, 9);
    Matrix p = to_positions(rest, sk);
    CHECK(p(0, 3) == doctest::Approx(10.0));
    CHECK(p(0, 6) == doctest::Approx(20.0));
  }
  SUBCASE("positions3d passes through unchanged") {
    MotionSequence seq = tiny_sequence();
    CHECK((to_positions(seq).array() == seq.frames.array()).all());
  }
}

TEST_CASE("synth_dataset plants contiguous groups with shared dynamics") {
  SynthConfig cfg;
  cfg.n_sequences = 3;
  cfg.joints = 8;
  cfg.n_groups = 2;
  cfg.fps = 25.0;
  cfg.seconds = 2.0;
  Rng rng = make_rng(11);
  auto seqs = synth_dataset(cfg, rng);
  REQUIRE(seqs.size() == 3);
  for (const auto& seq : seqs) {
    CHECK(seq.total_frames() == 50);
    CHECK(seq.planted_groups == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});
    seq.validate();
    // Joints in one group share frequency and phase, so their values differ
    // only by the per-joint constant center: the difference is constant in t.
    Vector diff = seq.frames.col(0) - seq.frames.col(3);
    CHECK((diff.array() - diff(0)).abs().maxCoeff() < 1e-9);
    // Across groups the difference oscillates.
    Vector cross = seq.frames.col(0) - seq.frames.col(21);
    CHECK((cross.array() - cross(0)).abs().maxCoeff() > 1.0);
  }

  SUBCASE("seeded generation is reproducible") {
    Rng a = make_rng(11), b = make_rng(11);
    auto s1 = synth_dataset(cfg, a);
    auto s2 = synth_dataset(cfg, b);
    CHECK((s1[2].frames.array() == s2[2].frames.array()).all());
  }
  SUBCASE("more groups than joints is rejected") {
    cfg.n_groups = 9;
    CHECK_THROWS_AS(synth_dataset(cfg, rng), ConfigError);
  }
}
