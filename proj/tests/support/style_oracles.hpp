#pragma once

// Delaunay audit and random style embeddings.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "decor/style_space.hpp"

namespace decor::oracle {

inline double cross(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

// Circumcentre and squared radius straight from the perpendicular bisectors.
inline std::pair<Vec2, double> circumcircle(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
  const double a2 = a[0] * a[0] + a[1] * a[1], b2 = b[0] * b[0] + b[1] * b[1], c2 = c[0] * c[0] + c[1] * c[1];
  const Vec2 o{(a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
               (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d};
  return {o, (a[0] - o[0]) * (a[0] - o[0]) + (a[1] - o[1]) * (a[1] - o[1])};
}

struct Audit {
  bool ccw = true;            // every triangle counter-clockwise and non-degenerate
  long circle_violations = 0; // points strictly inside a circumcircle
  double hull_area = 0.0;
  double tri_area = 0.0;
  bool covers = true;         // every distinct point is a vertex

  bool ok() const {
    return ccw && circle_violations == 0 && covers && std::fabs(tri_area - hull_area) <= 1e-9 * std::max(1.0, hull_area);
  }
};

// Exhaustive: every triangle against every point, plus the hull area from
// Andrew's monotone chain.
inline Audit audit(const std::vector<Vec2>& pts, const std::vector<Triangle>& tris) {
  Audit r;
  for (const auto& t : tris) {
    if (!(cross(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0)) {
      r.ccw = false;
      continue;
    }
    const auto [o, r2] = circumcircle(pts[t[0]], pts[t[1]], pts[t[2]]);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (int(i) == t[0] || int(i) == t[1] || int(i) == t[2]) continue;
      const double d2 = (pts[i][0] - o[0]) * (pts[i][0] - o[0]) + (pts[i][1] - o[1]) * (pts[i][1] - o[1]);
      r.circle_violations += d2 < r2 * (1.0 - 1e-9);
    }
  }
  auto sorted = pts;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Vec2> hull(2 * sorted.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], sorted[i]) <= 0) --k;
    hull[k++] = sorted[i];
  }
  for (std::size_t i = sorted.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], sorted[i]) <= 0) --k;
    hull[k++] = sorted[i];
  }
  for (std::size_t i = 1; i + 1 < k - 1; ++i) r.hull_area += cross(hull[0], hull[i], hull[i + 1]) / 2.0;
  for (const auto& t : tris) r.tri_area += cross(pts[t[0]], pts[t[1]], pts[t[2]]) / 2.0;
  std::set<Vec2> covered;
  for (const auto& t : tris)
    for (int i : t) covered.insert(pts[i]);
  r.covers = covered.size() == sorted.size();
  return r;
}

inline std::vector<Vec2> random_points(std::mt19937_64& rng, int n, int kind) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec2> p;
  for (int i = 0; i < n; ++i) {
    if (kind == 0) p.push_back({u(rng), u(rng)});
    else if (kind == 1) p.push_back({std::round(u(rng) * 4), std::round(u(rng) * 4)});  // lattice, many cocircular
    else {
      const double a = u(rng) * M_PI;  // on a circle plus its centre
      p.push_back(i == 0 ? Vec2{0, 0} : Vec2{std::cos(a), std::sin(a)});
    }
  }
  return p;
}

inline StyleEmbedding random_embedding(std::mt19937_64& rng, int n) {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> codes;
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (int i = 0; i < n; ++i) {
    ids.push_back("s" + std::to_string(i));
    std::vector<float> c(8);
    for (auto& x : c) x = g(rng);
    codes.push_back(c);
  }
  return build_embedding(ids, codes);
}

}  // namespace decor::oracle
