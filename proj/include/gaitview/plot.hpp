#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gaitview/dataset.hpp"
#include "gaitview/hgc.hpp"

namespace gaitview {

// Static figure emitters: accuracy curves, adjacency heatmaps and skeleton
// strips as SVG (deterministic text output), adjacency matrices also as
// CSV.

namespace svg {

inline std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string footer() { return "</svg>\n"; }

inline std::string text(double x, double y, const std::string& s,
                        int size = 12) {
  return "<text x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) +
         "\" font-family=\"monospace\" font-size=\"" + std::to_string(size) +
         "\">" + s + "</text>\n";
}

}  // namespace svg

struct CurveSeries {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

// Simple line chart; axes scaled to the data envelope.
inline std::string plot_curves_svg(const std::string& title,
                                   const std::vector<CurveSeries>& series) {
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (ymax == ymin) ymax = ymin + 1;
  if (xmax == xmin) xmax = xmin + 1;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  std::string out = svg::header(w, h);
  out += svg::text(ml, mt - 16, title, 14);
  out += "<rect x=\"" + fmt_double(ml) + "\" y=\"" + fmt_double(mt) +
         "\" width=\"" + fmt_double(w - ml - mr) + "\" height=\"" +
         fmt_double(h - mt - mb) +
         "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out += svg::text(ml - 50, py(ymin) + 4, fmt_double(ymin), 10);
  out += svg::text(ml - 50, py(ymax) + 4, fmt_double(ymax), 10);
  out += svg::text(px(xmin) - 4, h - mb + 16, fmt_double(xmin), 10);
  out += svg::text(px(xmax) - 12, h - mb + 16, fmt_double(xmax), 10);
  int li = 0;
  for (const auto& s : series) {
    if (s.x.empty()) continue;
    out += "<polyline fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out += fmt_double(px(s.x[i])) + "," + fmt_double(py(s.y[i])) + " ";
    out += "\"/>\n";
    out += "<rect x=\"" + fmt_double(w - mr - 150) + "\" y=\"" +
           fmt_double(mt + 8 + 16 * li) + "\" width=\"10\" height=\"10\" fill=\"" +
           s.color + "\"/>\n";
    out += svg::text(w - mr - 135, mt + 17 + 16 * li, s.label, 11);
    ++li;
  }
  return out + svg::footer();
}

// Heatmap of a matrix in [0, 1]; darker is larger.
inline std::string plot_heatmap_svg(const std::string& title,
                                    const Eigen::MatrixXd& m) {
  const int cell = 22, ml = 40, mt = 40;
  const int w = ml + cell * static_cast<int>(m.cols()) + 20;
  const int h = mt + cell * static_cast<int>(m.rows()) + 20;
  const double vmax = std::max(1e-12, m.maxCoeff());
  std::string out = svg::header(w, h);
  out += svg::text(ml, mt - 16, title, 14);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const int shade =
          255 - static_cast<int>(std::lround(255.0 * m(i, j) / vmax));
      out += "<rect x=\"" + std::to_string(ml + cell * static_cast<int>(j)) +
             "\" y=\"" + std::to_string(mt + cell * static_cast<int>(i)) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" +
             std::to_string(cell) + "\" fill=\"rgb(" + std::to_string(shade) +
             "," + std::to_string(shade) + ",255)\" stroke=\"#ccc\" " +
             "stroke-width=\"0.5\"/>\n";
    }
  return out + svg::footer();
}

inline std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out += (j ? "," : "") + fmt_double(m(i, j));
    out += "\n";
  }
  return out;
}

// Strip of rendered skeleton frames.
inline std::string plot_pose_strip_svg(const GaitSample& sample,
                                       const SkeletonTopology& topo,
                                       int max_frames = 8) {
  const auto& seq = sample.sequence;
  const int frames = std::min(seq.frames(), max_frames);
  const int cell_w = 140, cell_h = 200;
  const int w = cell_w * frames + 20, h = cell_h + 60;
  // data envelope over the drawn frames
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  const int step = std::max(1, seq.frames() / frames);
  for (int f = 0; f < frames; ++f) {
    const auto& fr = seq.coords[static_cast<std::size_t>(f * step)];
    xmin = std::min(xmin, fr.col(0).minCoeff());
    xmax = std::max(xmax, fr.col(0).maxCoeff());
    ymin = std::min(ymin, fr.col(1).minCoeff());
    ymax = std::max(ymax, fr.col(1).maxCoeff());
  }
  const double sx = (cell_w - 30) / std::max(1e-9, xmax - xmin);
  const double sy = (cell_h - 30) / std::max(1e-9, ymax - ymin);
  const double s = std::min(sx, sy);

  std::string out = svg::header(w, h);
  out += svg::text(10, 20, sample.identity + " view " +
                               fmt_double(sample.view_degrees) + " " +
                               condition_name(sample.condition),
                   13);
  for (int f = 0; f < frames; ++f) {
    const auto& fr = seq.coords[static_cast<std::size_t>(f * step)];
    const double ox = 10 + cell_w * f + 5;
    auto tx = [&](double x) { return ox + (x - xmin) * s; };
    auto ty = [&](double y) { return 40 + (y - ymin) * s; };
    for (auto [a, b] : topo.bones)
      out += "<line x1=\"" + fmt_double(tx(fr(a, 0))) + "\" y1=\"" +
             fmt_double(ty(fr(a, 1))) + "\" x2=\"" + fmt_double(tx(fr(b, 0))) +
             "\" y2=\"" + fmt_double(ty(fr(b, 1))) +
             "\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
    for (Eigen::Index i = 0; i < fr.rows(); ++i)
      out += "<circle cx=\"" + fmt_double(tx(fr(i, 0))) + "\" cy=\"" +
             fmt_double(ty(fr(i, 1))) + "\" r=\"2\" fill=\"crimson\"/>\n";
  }
  return out + svg::footer();
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << body;
}

}  // namespace gaitview
