#include <doctest.h>
#include <cmath>

#include "reschunk/errors.hpp"
#include "reschunk/eval.hpp"

using namespace reschunk;

TEST_CASE("horizon milliseconds map to 1-based frames by ceiling") {
  HorizonSpec spec;
  spec.fps = 50.0;
  CHECK(spec.frame_for(80) == 4);
  CHECK(spec.frame_for(160) == 8);
  CHECK(spec.frame_for(320) == 16);
  CHECK(spec.frame_for(400) == 20);
  CHECK(spec.frame_for(1000) == 50);
  spec.fps = 25.0;
  CHECK(spec.frame_for(80) == 2);   // 2.0 exactly
  CHECK(spec.frame_for(90) == 3);   // 2.25 rounds up
  CHECK(spec.frame_for(1000) == 25);

  SUBCASE("validate rejects horizons past the prediction length") {
    spec.horizons_ms = {80, 1000};
    CHECK_THROWS_AS(spec.validate(24), ConfigError);
    CHECK_NOTHROW(spec.validate(25));
  }
  SUBCASE("empty horizons rejected") {
    spec.horizons_ms.clear();
    CHECK_THROWS_AS(spec.validate(25), ConfigError);
  }
}

TEST_CASE("mpjpe matches a naive per-joint loop") {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int J = 2 + static_cast<int>(rng() % 4);
    const int p = 2 + static_cast<int>(rng() % 8);
    SkeletonSpec sk = make_synth_skeleton(J);
    Matrix pred(p, 3 * J), gt(p, 3 * J);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      pred.data()[i] = 100.0 * normal01(rng);
      gt.data()[i] = 100.0 * normal01(rng);
    }
    const int h = 1 + static_cast<int>(rng() % p);
    double naive = 0.0;
    for (int j = 0; j < J; ++j) {
      double sq = 0.0;
      for (int d = 0; d < 3; ++d) {
        const double diff = pred(h - 1, 3 * j + d) - gt(h - 1, 3 * j + d);
        sq += diff * diff;
      }
      naive += std::sqrt(sq);
    }
    naive /= J;
    CHECK(std::abs(mpjpe(pred, gt, sk, h) - naive) < 1e-9);
  }

  SUBCASE("3-4-0 displacement on one of two joints is 2.5 mm") {
    SkeletonSpec sk = make_synth_skeleton(2);
    Matrix gt = Matrix::Zero(1, 6);
    Matrix pred = Matrix::Zero(1, 6);
    pred(0, 0) = 3.0;
    pred(0, 1) = 4.0;
    CHECK(mpjpe(pred, gt, sk, 1) == doctest::Approx(2.5).epsilon(1e-15));
  }
  SUBCASE("horizon out of range") {
    SkeletonSpec sk = make_synth_skeleton(2);
    Matrix m = Matrix::Zero(3, 6);
    CHECK_THROWS_AS(mpjpe(m, m, sk, 4), DomainError);
    CHECK_THROWS_AS(mpjpe(m, m, sk, 0), DomainError);
  }
}

TEST_CASE("zero velocity baseline repeats the last frame") {
  Matrix x0(3, 2);
  x0 << 1, 2, 3, 4, 5, 6;
  Matrix out = zero_velocity_baseline(x0, 4);
  REQUIRE(out.rows() == 4);
  for (int r = 0; r < 4; ++r) {
    CHECK(out(r, 0) == 5.0);
    CHECK(out(r, 1) == 6.0);
  }
}

TEST_CASE("emit_table renders byte-deterministic csv with half-even cells") {
  ResultsTable table;
  table.horizons_ms = {160, 80};  // emitted sorted
  table.rows.push_back({"full", "walking", {0.125, 0.375}});
  table.rows.push_back({"1L", "walking", {12.3456, 7.0}});
  const std::string csv = emit_table(table, TableFormat::csv);
  CHECK(csv ==
        "model,subject,80,160\n"
        "full,walking,0.12,0.38\n"
        "1L,walking,12.35,7.00\n");
  CHECK(emit_table(table, TableFormat::csv) == csv);

  SUBCASE("markdown mirrors the same column order") {
    const std::string md = emit_table(table, TableFormat::markdown);
    CHECK(md.find("| model | subject | 80 | 160 |") == 0);
    CHECK(md.find("| full | walking | 0.12 | 0.38 |") != std::string::npos);
  }
}

TEST_CASE("plot_prediction places joints at the affine-projected coordinates") {
  SkeletonSpec sk = make_synth_skeleton(2);
  sk.parent_index = std::vector<int>{-1, 0};
  Matrix gt(1, 6), pred(1, 6);
  gt << 0, 0, 0, 10, 5, 0;
  pred << 0, 0, 0, 10, 0, 0;

  const std::string svg = plot_prediction(gt, pred, sk, {0});
  CHECK(svg.rfind("<svg", 0) == 0);
  // Shared bbox: x in [0,10], y in [0,5]; scale (200-40)/10 = 16.
  // Ground truth joint 1 projects to (20 + 160, 20 + 0) in the top row.
  CHECK(svg.find("<circle cx=\"180\" cy=\"20\"") != std::string::npos);
  // Root projects to (20, 20 + 5*16) = (20, 100).
  CHECK(svg.find("<circle cx=\"20\" cy=\"100\"") != std::string::npos);
  // Prediction row is offset one cell down; its joint 1 sits at y = 220+80.
  CHECK(svg.find("<circle cx=\"180\" cy=\"300\"") != std::string::npos);
  // One bone line per figure.
  CHECK(svg.find("<line x1=\"20\" y1=\"100\" x2=\"180\" y2=\"20\"") != std::string::npos);

  SUBCASE("no frames still yields a valid svg") {
    const std::string empty = plot_prediction(gt, pred, sk, {});
    CHECK(empty.rfind("<svg", 0) == 0);
    CHECK(empty.find("</svg>") != std::string::npos);
    CHECK(empty.find("<circle") == std::string::npos);
  }
  SUBCASE("frame index out of range") {
    CHECK_THROWS_AS(plot_prediction(gt, pred, sk, {3}), DomainError);
  }
}
