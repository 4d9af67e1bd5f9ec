#include "reschunk/eval.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <sstream>

#include "reschunk/errors.hpp"

namespace reschunk {

int HorizonSpec::frame_for(int ms) const {
  return static_cast<int>(std::ceil(ms * fps / 1000.0 - 1e-9));
}

void HorizonSpec::validate(int p) const {
  if (fps <= 0.0) throw ConfigError("horizon fps must be positive");
  if (horizons_ms.empty()) throw ConfigError("at least one horizon is required");
  for (int ms : horizons_ms) {
    const int h = frame_for(ms);
    if (h < 1 || h > p)
      throw ConfigError("horizon " + std::to_string(ms) + " ms maps to frame " +
                        std::to_string(h) + ", outside [1, " + std::to_string(p) + "]");
  }
}

double mpjpe(const Matrix& pred, const Matrix& gt, const SkeletonSpec& skeleton, int h) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw ShapeError("mpjpe: prediction and ground truth shapes differ");
  if (h < 1 || h > pred.rows()) throw DomainError("mpjpe: horizon frame out of range");
  const Matrix pp = to_positions(pred, skeleton);
  const Matrix gp = to_positions(gt, skeleton);
  const int J = skeleton.joint_count;
  double sum = 0.0;
  for (int j = 0; j < J; ++j) {
    const Eigen::Vector3d d = (pp.block<1, 3>(h - 1, 3 * j) - gp.block<1, 3>(h - 1, 3 * j)).transpose();
    sum += d.norm();
  }
  return sum / J;
}

Matrix zero_velocity_baseline(const Matrix& x0, int p) {
  if (x0.rows() < 1) throw DataError("zero_velocity_baseline: empty input");
  Matrix out(p, x0.cols());
  for (int r = 0; r < p; ++r) out.row(r) = x0.row(x0.rows() - 1);
  return out;
}

namespace {

// 2-decimal fixed formatting with round-half-even.
std::string format_cell(double v) {
  const int old_mode = std::fegetround();
  std::fesetround(FE_TONEAREST);  // nearbyint: round-half-even
  const double scaled = std::nearbyint(v * 100.0);
  std::fesetround(old_mode);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", scaled / 100.0);
  return buf;
}

}  // namespace

std::string emit_table(const ResultsTable& table, TableFormat format) {
  std::vector<int> horizons = table.horizons_ms;
  std::sort(horizons.begin(), horizons.end());
  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "model,subject";
    for (int h : horizons) out << "," << h;
    out << "\n";
    for (const auto& row : table.rows) {
      out << row.key << "," << row.subject;
      for (double c : row.cells) out << "," << format_cell(c);
      out << "\n";
    }
  } else {
    out << "| model | subject |";
    for (int h : horizons) out << " " << h << " |";
    out << "\n|---|---|";
    for (size_t i = 0; i < horizons.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& row : table.rows) {
      out << "| " << row.key << " | " << row.subject << " |";
      for (double c : row.cells) out << " " << format_cell(c) << " |";
      out << "\n";
    }
  }
  return out.str();
}

std::string plot_prediction(const Matrix& gt_frames, const Matrix& pred_frames,
                            const SkeletonSpec& skeleton, const std::vector<int>& frame_indices) {
  if (skeleton.representation == Representation::angle_axis &&
      (!skeleton.parent_index || !skeleton.bone_offsets))
    throw ConfigError("plot_prediction: angle_axis skeleton needs parents and offsets");
  const Matrix gp = to_positions(gt_frames, skeleton);
  const Matrix pp = to_positions(pred_frames, skeleton);
  const int J = skeleton.joint_count;

  // Shared bounding box over both sequences at the requested frames.
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  bool first = true;
  for (int f : frame_indices) {
    for (const Matrix* m : {&gp, &pp}) {
      if (f < 0 || f >= m->rows()) throw DomainError("plot_prediction: frame index out of range");
      for (int j = 0; j < J; ++j) {
        const double x = (*m)(f, 3 * j), y = (*m)(f, 3 * j + 1);
        if (first) {
          min_x = max_x = x;
          min_y = max_y = y;
          first = false;
        } else {
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
      }
    }
  }
  const double cell = 200.0, pad = 20.0;
  const double span_x = std::max(max_x - min_x, 1e-9);
  const double span_y = std::max(max_y - min_y, 1e-9);
  const double scale = (cell - 2 * pad) / std::max(span_x, span_y);
  const int n = static_cast<int>(frame_indices.size());
  const double width = std::max(cell * n, cell);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << 2 * cell << "\" viewBox=\"0 0 " << width << " " << 2 * cell << "\">\n";

  auto draw_figure = [&](const Matrix& pos, int f, int col, int row_idx, const char* color) {
    const double ox = col * cell + pad, oy = row_idx * cell + pad;
    auto px = [&](int j) { return ox + (pos(f, 3 * j) - min_x) * scale; };
    // SVG y axis points down; flip so larger world-y is higher on screen.
    auto py = [&](int j) { return oy + (max_y - pos(f, 3 * j + 1)) * scale; };
    svg << "<g stroke=\"" << color << "\" fill=\"" << color << "\">\n";
    if (skeleton.parent_index) {
      for (int j = 0; j < J; ++j) {
        const int par = (*skeleton.parent_index)[j];
        if (par < 0) continue;
        svg << "<line x1=\"" << px(par) << "\" y1=\"" << py(par) << "\" x2=\"" << px(j)
            << "\" y2=\"" << py(j) << "\" stroke-width=\"2\"/>\n";
      }
    }
    for (int j = 0; j < J; ++j)
      svg << "<circle cx=\"" << px(j) << "\" cy=\"" << py(j) << "\" r=\"2\"/>\n";
    svg << "</g>\n";
  };

  for (int c = 0; c < n; ++c) {
    draw_figure(gp, frame_indices[c], c, 0, "green");
    draw_figure(pp, frame_indices[c], c, 1, "red");
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace reschunk
