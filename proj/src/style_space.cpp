#include "decor/style_space.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "decor/errors.hpp"

namespace decor {
namespace {

constexpr long double kOrientEps = 1e-12L;
constexpr long double kCircleEps = 1e-12L;
constexpr double kWeightEps = 1e-9;

using LVec = std::array<long double, 2>;

long double orient(const LVec& a, const LVec& b, const LVec& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

// > 0 when d lies inside the circumcircle of counter-clockwise (a, b, c).
long double incircle(const LVec& a, const LVec& b, const LVec& c, const LVec& d) {
  const long double ax = a[0] - d[0], ay = a[1] - d[1];
  const long double bx = b[0] - d[0], by = b[1] - d[1];
  const long double cx = c[0] - d[0], cy = c[1] - d[1];
  const long double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
}

std::uint64_t edge_key(int u, int v) { return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v); }

class Triangulator {
 public:
  explicit Triangulator(const std::vector<Vec2>& pts) {
    double lo[2] = {pts[0][0], pts[0][1]}, hi[2] = {pts[0][0], pts[0][1]};
    for (const auto& p : pts)
      for (int k = 0; k < 2; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    const double scale = std::max({hi[0] - lo[0], hi[1] - lo[1], std::numeric_limits<double>::min()});
    for (const auto& p : pts) p_.push_back({(p[0] - lo[0]) / static_cast<long double>(scale), (p[1] - lo[1]) / static_cast<long double>(scale)});
  }

  std::vector<Triangle> run(const std::vector<Vec2>& pts) {
    std::vector<int> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pts[a] < pts[b]; });
    std::vector<int> uniq;
    for (int i : order)
      if (uniq.empty() || pts[uniq.back()] != pts[i]) uniq.push_back(i);
    if (uniq.size() < 3) throw DegeneracyError("fewer than three distinct points");

    std::size_t k = 2;
    while (k < uniq.size() && std::fabs(static_cast<double>(orient(p_[uniq[0]], p_[uniq[1]], p_[uniq[k]]))) <= kOrientEps) ++k;
    if (k == uniq.size()) throw DegeneracyError("all points are collinear");

    const int apex = uniq[k];
    const bool left = orient(p_[uniq[0]], p_[uniq[1]], p_[apex]) > 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (left) add(uniq[i], uniq[i + 1], apex);
      else add(uniq[i + 1], uniq[i], apex);
    }
    std::vector<int> hull;
    if (left) {
      hull.assign(uniq.begin(), uniq.begin() + k);
      hull.push_back(apex);
    } else {
      hull = {uniq[0], apex};
      for (std::size_t i = k - 1; i >= 1; --i) hull.push_back(uniq[i]);
    }
    for (std::size_t n = k + 1; n < uniq.size(); ++n) insert(hull, uniq[n]);
    legalize();
    return std::move(tris_);
  }

 private:
  void add(int a, int b, int c) { tris_.push_back({a, b, c}); }

  // p lies outside the hull; fan it to every edge it sees.
  void insert(std::vector<int>& hull, int p) {
    const std::size_t m = hull.size();
    std::vector<long double> o(m);
    for (std::size_t i = 0; i < m; ++i) o[i] = orient(p_[hull[i]], p_[hull[(i + 1) % m]], p_[p]);
    std::vector<bool> vis(m);
    bool any = false;
    for (std::size_t i = 0; i < m; ++i) {
      vis[i] = o[i] < -kOrientEps;
      any = any || vis[i];
    }
    if (!any) vis[std::min_element(o.begin(), o.end()) - o.begin()] = true;
    std::size_t start = 0;
    while (!(vis[start] && !vis[(start + m - 1) % m])) ++start;
    std::size_t len = 0;
    while (len < m && vis[(start + len) % m]) {
      const std::size_t i = (start + len) % m;
      add(hull[i], p, hull[(i + 1) % m]);
      ++len;
    }
    // Vertices strictly inside the visible chain leave the hull.
    std::vector<int> next;
    next.reserve(m + 1);
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t i = (start + len + s) % m;  // begins at the chain's last vertex
      next.push_back(hull[i]);
      if (i == start) break;
    }
    next.push_back(p);
    hull = std::move(next);
  }

  void legalize() {
    std::unordered_map<std::uint64_t, int> owner;
    for (std::size_t t = 0; t < tris_.size(); ++t)
      for (int k = 0; k < 3; ++k) owner[edge_key(tris_[t][k], tris_[t][(k + 1) % 3])] = static_cast<int>(t);
    std::vector<std::pair<int, int>> stack;
    for (const auto& [key, t] : owner) {
      const int u = static_cast<int>(key >> 32), v = static_cast<int>(key & 0xffffffffu);
      if (u < v) stack.emplace_back(u, v);
    }
    std::sort(stack.begin(), stack.end());
    const auto third = [&](int t, int u, int v) {
      for (int x : tris_[t])
        if (x != u && x != v) return x;
      return -1;
    };
    while (!stack.empty()) {
      auto [u, v] = stack.back();
      stack.pop_back();
      auto i1 = owner.find(edge_key(u, v)), i2 = owner.find(edge_key(v, u));
      if (i1 == owner.end() || i2 == owner.end()) continue;
      const int t1 = i1->second, t2 = i2->second;
      const int c = third(t1, u, v), d = third(t2, u, v);
      if (incircle(p_[u], p_[v], p_[c], p_[d]) <= kCircleEps) continue;
      // Quad u, d, v, c (counter-clockwise); swap the diagonal u-v for c-d.
      owner.erase(edge_key(u, v));
      owner.erase(edge_key(v, u));
      tris_[t1] = {u, d, c};
      tris_[t2] = {d, v, c};
      for (int t : {t1, t2})
        for (int k = 0; k < 3; ++k) owner[edge_key(tris_[t][k], tris_[t][(k + 1) % 3])] = t;
      for (auto [a, b] : {std::pair{u, d}, std::pair{d, v}, std::pair{v, c}, std::pair{c, u}})
        stack.emplace_back(std::min(a, b), std::max(a, b));
    }
  }

  std::vector<LVec> p_;
  std::vector<Triangle> tris_;
};

Vec2 nearest_on_segment(const Vec2& a, const Vec2& b, const Vec2& q) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return {a[0] + t * dx, a[1] + t * dy};
}

}  // namespace

std::vector<Vec2> embed_2d(const std::vector<std::vector<float>>& codes) {
  if (codes.size() < 3) throw ConfigError("embedding needs at least 3 codes, got " + std::to_string(codes.size()));
  const std::size_t dim = codes[0].size();
  if (dim < 2) throw ConfigError("codes need at least 2 components");
  for (const auto& c : codes)
    if (c.size() != dim) throw ConfigError("codes have differing lengths");
  const Eigen::Index n = static_cast<Eigen::Index>(codes.size()), d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = codes[i][j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::MatrixXd axes(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);  // eigenvalues ascend
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  const Eigen::MatrixXd y = x * axes;
  std::vector<Vec2> out(codes.size());
  for (Eigen::Index i = 0; i < n; ++i) out[i] = {y(i, 0), y(i, 1)};
  return out;
}

std::vector<Triangle> delaunay(const std::vector<Vec2>& points) {
  if (points.size() < 3) throw ConfigError("triangulation needs at least 3 points");
  for (const auto& p : points)
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ConfigError("non-finite embedding point");
  return Triangulator(points).run(points);
}

StyleEmbedding build_embedding(std::vector<std::string> ids, std::vector<std::vector<float>> codes,
                               std::vector<Vec2> points) {
  if (ids.size() != codes.size()) throw ConfigError("ids and codes differ in count");
  if (points.empty()) points = embed_2d(codes);
  if (points.size() != codes.size()) throw ConfigError("points and codes differ in count");
  StyleEmbedding e{std::move(ids), std::move(points), {}, std::move(codes)};
  e.triangles = delaunay(e.points);
  return e;
}

StyleEmbedding embedding_from_model(const DecorModel& model) {
  const auto& book = model.codebook;
  std::vector<std::vector<float>> codes;
  for (std::size_t i = 0; i < book.size(); ++i) codes.push_back(book.code_values(i));
  return build_embedding(book.ids(), std::move(codes));
}

std::array<double, 3> barycentric(const StyleEmbedding& e, int t, const Vec2& q) {
  const auto& tri = e.triangles.at(t);
  const Vec2 &a = e.points[tri[0]], &b = e.points[tri[1]], &c = e.points[tri[2]];
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  const double wb = ((q[0] - a[0]) * (c[1] - a[1]) - (q[1] - a[1]) * (c[0] - a[0])) / det;
  const double wc = ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])) / det;
  return {1.0 - wb - wc, wb, wc};
}

Location locate(const StyleEmbedding& e, const Vec2& q) {
  if (e.triangles.empty()) throw ConfigError("empty style embedding");
  for (std::size_t t = 0; t < e.triangles.size(); ++t) {
    const auto w = barycentric(e, static_cast<int>(t), q);
    if (w[0] >= -kWeightEps && w[1] >= -kWeightEps && w[2] >= -kWeightEps) return {static_cast<int>(t), w, q, false};
  }
  // Outside: nearest point over the boundary edges (edges without a twin).
  std::unordered_map<std::uint64_t, int> owner;
  for (std::size_t t = 0; t < e.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) owner[edge_key(e.triangles[t][k], e.triangles[t][(k + 1) % 3])] = static_cast<int>(t);
  Location best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < e.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) {
      const int u = e.triangles[t][k], v = e.triangles[t][(k + 1) % 3];
      if (owner.contains(edge_key(v, u))) continue;
      const Vec2 p = nearest_on_segment(e.points[u], e.points[v], q);
      const double d2 = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best.triangle = static_cast<int>(t);
        best.point = p;
      }
    }
  auto w = barycentric(e, best.triangle, best.point);
  double sum = 0.0;
  for (auto& x : w) sum += (x = std::max(x, 0.0));
  for (auto& x : w) x /= sum;
  best.weights = w;
  best.clamped = true;
  return best;
}

std::vector<float> blend_codes(const StyleEmbedding& e, int t, const std::array<double, 3>& weights) {
  const auto& tri = e.triangles.at(t);
  std::vector<float> out(e.codes[tri[0]].size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double v = 0.0;
    for (int k = 0; k < 3; ++k) v += weights[k] * static_cast<double>(e.codes[tri[k]][j]);
    out[j] = static_cast<float>(v);
  }
  return out;
}

std::vector<float> interpolate_code(const StyleEmbedding& e, const Vec2& q) {
  const auto loc = locate(e, q);
  return blend_codes(e, loc.triangle, loc.weights);
}

std::string StyleEmbedding::to_json() const {
  nlohmann::ordered_json j;
  j["ids"] = ids;
  j["points"] = points;
  j["triangles"] = triangles;
  j["codes"] = codes;
  return j.dump();
}

StyleEmbedding StyleEmbedding::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    StyleEmbedding e;
    e.ids = j.at("ids").get<std::vector<std::string>>();
    e.points = j.at("points").get<std::vector<Vec2>>();
    e.triangles = j.at("triangles").get<std::vector<Triangle>>();
    e.codes = j.at("codes").get<std::vector<std::vector<float>>>();
    const std::size_t n = e.ids.size();
    if (e.points.size() != n || e.codes.size() != n) throw FormatError("embedding arrays differ in length");
    for (const auto& t : e.triangles)
      for (int i : t)
        if (i < 0 || static_cast<std::size_t>(i) >= n) throw FormatError("embedding triangle index out of range");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("bad embedding JSON: ") + ex.what());
  }
}

}  // namespace decor
