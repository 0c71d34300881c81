#pragma once

// Static SVG rendering of reachtube files: segment boxes shaded by time,
// initial box and unsafe sets outlined, numeric axes. Output bytes are
// deterministic (shortest round-trip floats, fixed palette).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expr.hpp"
#include "polyhedron.hpp"

namespace veripc::svg {

namespace detail {

inline std::string fmt(double v) {
  // canonical zero avoids "-0" jitter in output
  if (v == 0.0) return "0";
  return expr::detail::format_double(v);
}

struct Frame {
  double wx0, wx1, wy0, wy1;  // world window
  double px, py, pw, ph;      // plot rectangle in svg coordinates

  double sx(double wx) const { return px + (wx - wx0) / (wx1 - wx0) * pw; }
  double sy(double wy) const { return py + ph - (wy - wy0) / (wy1 - wy0) * ph; }
};

inline std::string rgb(double t) {
  // light to dark blue as time advances
  const int r = static_cast<int>(std::lround(166 + (31 - 166) * t));
  const int g = static_cast<int>(std::lround(206 + (120 - 206) * t));
  const int b = static_cast<int>(std::lround(227 + (180 - 227) * t));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

inline double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double mult : {1.0, 2.0, 5.0})
    if (raw <= mult * mag) return mult * mag;
  return 10.0 * mag;
}

// tick values are integer multiples of a 1/2/5 step, so a fixed decimal
// count prints them exactly
inline std::string tick_label(double v, double step) {
  const int decimals = std::max(0, -static_cast<int>(std::floor(std::log10(step))));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline void draw_axes(std::string& out, const Frame& f, int di, int dj) {
  out += "<rect x='" + fmt(f.px) + "' y='" + fmt(f.py) + "' width='" + fmt(f.pw) +
         "' height='" + fmt(f.ph) + "' fill='none' stroke='#444' stroke-width='1'/>\n";
  const double xstep = nice_step(f.wx1 - f.wx0);
  for (long k = std::lround(std::ceil(f.wx0 / xstep));
       k * xstep <= f.wx1 + 1e-12; ++k) {
    const double x = f.sx(k * xstep);
    out += "<line x1='" + fmt(x) + "' y1='" + fmt(f.py + f.ph) + "' x2='" + fmt(x) +
           "' y2='" + fmt(f.py + f.ph + 5) + "' stroke='#444'/>\n";
    out += "<text x='" + fmt(x) + "' y='" + fmt(f.py + f.ph + 18) +
           "' font-size='11' text-anchor='middle' fill='#222'>" +
           tick_label(k * xstep, xstep) + "</text>\n";
  }
  const double ystep = nice_step(f.wy1 - f.wy0);
  for (long k = std::lround(std::ceil(f.wy0 / ystep));
       k * ystep <= f.wy1 + 1e-12; ++k) {
    const double y = f.sy(k * ystep);
    out += "<line x1='" + fmt(f.px - 5) + "' y1='" + fmt(y) + "' x2='" + fmt(f.px) +
           "' y2='" + fmt(y) + "' stroke='#444'/>\n";
    out += "<text x='" + fmt(f.px - 8) + "' y='" + fmt(y + 4) +
           "' font-size='11' text-anchor='end' fill='#222'>" +
           tick_label(k * ystep, ystep) + "</text>\n";
  }
  out += "<text x='" + fmt(f.px + f.pw / 2) + "' y='" + fmt(f.py + f.ph + 36) +
         "' font-size='13' text-anchor='middle' fill='#222'>x" + std::to_string(di + 1) +
         "</text>\n";
  out += "<text x='" + fmt(f.px - 44) + "' y='" + fmt(f.py + f.ph / 2) +
         "' font-size='13' text-anchor='middle' fill='#222' transform='rotate(-90 " +
         fmt(f.px - 44) + " " + fmt(f.py + f.ph / 2) + ")'>x" + std::to_string(dj + 1) +
         "</text>\n";
}

// projected outline of a polyhedron clipped to the world window
inline std::string polygon_points(const poly::Polyhedron& P, int di, int dj,
                                  const Frame& f) {
  const int n = P.dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -poly::kWorldExtent);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, poly::kWorldExtent);
  lo[di] = f.wx0;
  hi[di] = f.wx1;
  lo[dj] = f.wy0;
  hi[dj] = f.wy1;
  auto clipped = poly::intersect(P, poly::Polyhedron::from_box({lo, hi}));
  if (poly::is_empty(clipped)) return {};
  auto flat = n == 2 && di == 0 && dj == 1 ? clipped
                                           : poly::project(clipped, {di, dj});
  auto verts = poly::vertices(flat);
  if (verts.size() < 3) return {};
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& v : verts) c += v;
  c /= static_cast<double>(verts.size());
  std::sort(verts.begin(), verts.end(),
            [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
              return std::atan2(a[1] - c[1], a[0] - c[0]) <
                     std::atan2(b[1] - c[1], b[0] - c[0]);
            });
  std::string pts;
  for (const auto& v : verts) {
    if (!pts.empty()) pts += " ";
    pts += fmt(f.sx(v[0])) + "," + fmt(f.sy(v[1]));
  }
  return pts;
}

}  // namespace detail

inline std::string render_tube(const nlohmann::json& tube, int di, int dj) {
  using detail::fmt;
  if (!tube.contains("initial"))
    throw ValidationError("tube file: missing initial box");
  const auto read_vec = [](const nlohmann::json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
  };
  const poly::Box initial{read_vec(tube["initial"]["lo"]),
                          read_vec(tube["initial"]["hi"])};
  const int n = initial.dim();
  if (di < 0 || dj < 0 || di >= n || dj >= n || di == dj)
    throw BadDims("plot: dims must be two distinct state indices below " +
                  std::to_string(n));

  struct Seg {
    double t0;
    double x0, x1, y0, y1;
    int mode;
  };
  std::vector<Seg> segs;
  double Tv = tube.value("Tv", 1.0);
  if (tube.contains("segments"))
    for (const auto& s : tube["segments"]) {
      const auto lo = read_vec(s["lo"]);
      const auto hi = read_vec(s["hi"]);
      segs.push_back({s["t0"].get<double>(), lo[di], hi[di], lo[dj], hi[dj],
                      s.value("mode", 0)});
    }

  double wx0 = initial.lo[di], wx1 = initial.hi[di];
  double wy0 = initial.lo[dj], wy1 = initial.hi[dj];
  for (const auto& s : segs) {
    wx0 = std::min(wx0, s.x0);
    wx1 = std::max(wx1, s.x1);
    wy0 = std::min(wy0, s.y0);
    wy1 = std::max(wy1, s.y1);
  }

  std::vector<poly::Polyhedron> unsafe_sets;
  if (tube.contains("unsafe"))
    for (const auto& uj : tube["unsafe"]) {
      Eigen::MatrixXd A(uj["A"].size(), n);
      Eigen::VectorXd b(uj["A"].size());
      for (std::size_t r = 0; r < uj["A"].size(); ++r) {
        b[static_cast<Eigen::Index>(r)] = uj["b"][r].get<double>();
        for (int c = 0; c < n; ++c)
          A(static_cast<Eigen::Index>(r), c) = uj["A"][r][c].get<double>();
      }
      unsafe_sets.emplace_back(std::move(A), std::move(b));
    }

  // pull nearby unsafe boundaries into view: extend the window to each unsafe
  // set's near face plus a sliver of its interior
  for (const auto& U : unsafe_sets) {
    if (poly::is_empty(U)) continue;
    const auto bb = poly::bounding_box(U);
    if (bb.lo[di] > wx1) wx1 = bb.lo[di] + 0.15 * (bb.lo[di] - wx0);
    if (bb.hi[di] < wx0) wx0 = bb.hi[di] - 0.15 * (wx1 - bb.hi[di]);
    if (bb.lo[dj] > wy1) wy1 = bb.lo[dj] + 0.15 * (bb.lo[dj] - wy0);
    if (bb.hi[dj] < wy0) wy0 = bb.hi[dj] - 0.15 * (wy1 - bb.hi[dj]);
  }

  const double padx = std::max(0.08 * (wx1 - wx0), 1e-3);
  const double pady = std::max(0.08 * (wy1 - wy0), 1e-3);
  detail::Frame f{wx0 - padx, wx1 + padx, wy0 - pady, wy1 + pady,
                  70.0,       30.0,       670.0,      480.0};

  std::string out =
      "<svg xmlns='http://www.w3.org/2000/svg' width='780' height='580' "
      "viewBox='0 0 780 580'>\n<rect width='780' height='580' fill='white'/>\n";

  for (const auto& s : segs) {
    const double shade = Tv > 0 ? std::clamp(s.t0 / Tv, 0.0, 1.0) : 0.0;
    out += "<rect x='" + fmt(f.sx(s.x0)) + "' y='" + fmt(f.sy(s.y1)) + "' width='" +
           fmt(f.sx(s.x1) - f.sx(s.x0)) + "' height='" + fmt(f.sy(s.y0) - f.sy(s.y1)) +
           "' fill='" + detail::rgb(shade) + "' fill-opacity='0.3'/>\n";
  }

  for (const auto& U : unsafe_sets) {
    const auto pts = detail::polygon_points(U, di, dj, f);
    if (!pts.empty())
      out += "<polygon points='" + pts +
             "' fill='#e31a1c' fill-opacity='0.15' stroke='#e31a1c' "
             "stroke-width='1.5'/>\n";
  }

  out += "<rect x='" + fmt(f.sx(initial.lo[di])) + "' y='" + fmt(f.sy(initial.hi[dj])) +
         "' width='" + fmt(f.sx(initial.hi[di]) - f.sx(initial.lo[di])) + "' height='" +
         fmt(f.sy(initial.lo[dj]) - f.sy(initial.hi[dj])) +
         "' fill='none' stroke='#33a02c' stroke-width='1.5'/>\n";

  detail::draw_axes(out, f, di, dj);

  const std::string kind = tube.value("kind", std::string("unknown"));
  std::string caption = kind;
  if (segs.empty())
    caption += " (no reachtube)";
  else
    caption += ", " + std::to_string(segs.size()) + " segments";
  out += "<text x='390' y='20' font-size='14' text-anchor='middle' fill='#111'>" +
         caption + "</text>\n</svg>\n";
  return out;
}

}  // namespace veripc::svg
