#include "cfm/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cfm {

namespace {

constexpr double kWidth = 480, kHeight = 360;
constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void pad_range(double& lo, double& hi) {
  if (hi <= lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

void frame(std::ostringstream& svg, const Axis& x, const Axis& y, const std::string& title, const std::string& xl,
           const std::string& yl) {
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight << "\" height=\""
      << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x.lo + (x.hi - x.lo) * k / 4.0, yv = y.lo + (y.hi - y.lo) * k / 4.0;
    svg << "<text x=\"" << x(xv) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(xl) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 14 " << kHeight / 2
      << ")\" text-anchor=\"middle\" font-size=\"12\">" << escape(yl) << "</text>\n";
}

std::string band(const std::vector<DemoPoint>& pts, const Axis& x, const Axis& y, double DemoPoint::*lo,
                 double DemoPoint::*hi) {
  std::ostringstream d;
  for (std::size_t i = 0; i < pts.size(); ++i) d << (i ? " L" : "M") << x(pts[i].t) << ',' << y(pts[i].*hi);
  for (std::size_t i = pts.size(); i-- > 0;) d << " L" << x(pts[i].t) << ',' << y(pts[i].*lo);
  d << " Z";
  return d.str();
}

}  // namespace

std::string posterior_fan_svg(const DemoResult& r, const std::string& title) {
  require(!r.points.empty(), "posterior fan needs at least one grid point");
  auto pts = r.points;
  std::sort(pts.begin(), pts.end(), [](const DemoPoint& a, const DemoPoint& b) { return a.t < b.t; });
  double xlo = pts.front().t, xhi = pts.back().t, ylo = pts.front().q05, yhi = pts.front().q95;
  for (const auto& p : pts) {
    ylo = std::min(ylo, p.q05);
    yhi = std::max(yhi, p.q95);
  }
  for (Eigen::Index i = 0; i < r.observational.rows(); ++i) {
    const double t = r.observational(i, 0), v = r.observational(i, 1);
    if (t < xlo || t > xhi) continue;
    ylo = std::min(ylo, v);
    yhi = std::max(yhi, v);
  }
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);
  const Axis x{xlo, xhi, kLeft, kWidth - kRight};
  const Axis y{ylo, yhi, kHeight - kBottom, kTop};

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  frame(svg, x, y, title, "do(t)", "y");
  svg << "<path d=\"" << band(pts, x, y, &DemoPoint::q05, &DemoPoint::q95)
      << "\" fill=\"#4c72b0\" fill-opacity=\"0.2\"/>\n";
  svg << "<path d=\"" << band(pts, x, y, &DemoPoint::q25, &DemoPoint::q75)
      << "\" fill=\"#4c72b0\" fill-opacity=\"0.35\"/>\n";
  for (Eigen::Index i = 0; i < r.observational.rows(); ++i) {
    const double t = r.observational(i, 0), v = r.observational(i, 1);
    if (t < xlo || t > xhi || v < ylo || v > yhi) continue;
    svg << "<circle cx=\"" << x(t) << "\" cy=\"" << y(v) << "\" r=\"1.8\" fill=\"#333\" fill-opacity=\"0.5\"/>\n";
  }
  svg << "<polyline fill=\"none\" stroke=\"#1f3b73\" stroke-width=\"2\" points=\"";
  for (const auto& p : pts) svg << x(p.t) << ',' << y(p.q50) << ' ';
  svg << "\"/>\n";
  svg << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 14
      << "\" text-anchor=\"end\" font-size=\"11\">PAM: " << escape(to_string(r.mode)) << " ("
      << escape(r.asserted_direction) << ")</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string delta_bars_svg(const std::vector<std::string>& labels, const std::vector<ConfidenceInterval>& deltas,
                           const std::string& title, const std::string& y_label) {
  require(labels.size() == deltas.size() && !labels.empty(), "delta bars need one label per interval");
  double lo = 0.0, hi = 0.0;
  for (const auto& d : deltas) {
    lo = std::min({lo, d.lower, d.estimate});
    hi = std::max({hi, d.upper, d.estimate});
  }
  pad_range(lo, hi);
  const double n = static_cast<double>(labels.size());
  const Axis x{0.0, n, kLeft, kWidth - kRight};
  const Axis y{lo, hi, kHeight - kBottom, kTop};

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  svg << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << y(0.0) << "\" y2=\"" << y(0.0)
      << "\" stroke=\"#333\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double cx = x(i + 0.5), w = 0.6 * (x(1.0) - x(0.0));
    const double top = y(std::max(0.0, deltas[i].estimate)), bottom = y(std::min(0.0, deltas[i].estimate));
    svg << "<rect x=\"" << cx - w / 2 << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << bottom - top
        << "\" fill=\"#55a868\"/>\n";
    svg << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << y(deltas[i].lower) << "\" y2=\""
        << y(deltas[i].upper) << "\" stroke=\"#222\" stroke-width=\"1.5\"/>\n";
    for (double v : {deltas[i].lower, deltas[i].upper})
      svg << "<line x1=\"" << cx - w / 6 << "\" x2=\"" << cx + w / 6 << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
          << "\" stroke=\"#222\" stroke-width=\"1.5\"/>\n";
    svg << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << escape(labels[i]) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt(v) << "</text>\n";
  }
  svg << "<text x=\"14\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 14 " << kHeight / 2
      << ")\" text-anchor=\"middle\" font-size=\"12\">" << escape(y_label) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

DemoResult demo_result_from_json(const nlohmann::json& m) {
  DemoResult r;
  try {
    r.mode = pam_mode_from_string(m.at("mode").get<std::string>());
    r.asserted_direction = m.at("asserted_direction").get<std::string>();
    for (const auto& p : m.at("points")) {
      DemoPoint pt;
      pt.t = p.at("t");
      pt.mean = p.at("mean");
      pt.stddev = p.at("std");
      pt.q05 = p.at("q05");
      pt.q25 = p.at("q25");
      pt.q50 = p.at("q50");
      pt.q75 = p.at("q75");
      pt.q95 = p.at("q95");
      r.points.push_back(pt);
    }
    if (m.contains("observational")) {
      const auto& obs = m.at("observational");
      r.observational.resize(static_cast<Eigen::Index>(obs.size()), 2);
      for (std::size_t i = 0; i < obs.size(); ++i) {
        r.observational(static_cast<Eigen::Index>(i), 0) = obs[i].at(0);
        r.observational(static_cast<Eigen::Index>(i), 1) = obs[i].at(1);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("demo summary: ") + e.what());
  }
  return r;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("short write to " + path.string());
}

}  // namespace cfm
