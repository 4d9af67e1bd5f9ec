#pragma once

#include <string>
#include <vector>

#include "reschunk/motion.hpp"

namespace reschunk {

struct HorizonSpec {
  std::vector<int> horizons_ms = {80, 160, 320, 400, 1000};
  double fps = 50.0;

  // 1-based frame count reached at the given horizon.
  int frame_for(int ms) const;
  void validate(int p) const;
};

/// Mean per-joint position error (millimeters) at 1-based prediction frame h.
double mpjpe(const Matrix& pred, const Matrix& gt, const SkeletonSpec& skeleton, int h);

/// Repeats the last observed frame p times.
Matrix zero_velocity_baseline(const Matrix& x0, int p);

struct ResultsTable {
  struct Row {
    std::string key;               // variant or model name
    std::string subject;           // action / dataset tag
    std::vector<double> cells;     // one MPJPE per horizon, mm
  };
  std::vector<int> horizons_ms;
  std::vector<Row> rows;
};

enum class TableFormat { csv, markdown };

/// Deterministic text rendering; cells use 2-decimal round-half-even.
std::string emit_table(const ResultsTable& table, TableFormat format);

/// Stick-figure overlay: one SVG row of figures per sequence at the
/// requested frames, ground truth stroked green and prediction red, bones
/// drawn along the skeleton tree, orthographic x-y projection.
std::string plot_prediction(const Matrix& gt_frames, const Matrix& pred_frames,
                            const SkeletonSpec& skeleton, const std::vector<int>& frame_indices);

}  // namespace reschunk
