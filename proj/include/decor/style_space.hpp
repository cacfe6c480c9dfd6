#pragma once

#include <array>
#include <string>
#include <vector>

#include "decor/models.hpp"

namespace decor {

using Vec2 = std::array<double, 2>;
using Triangle = std::array<int, 3>;  // counter-clockwise point indices

// Principal-component projection of the codes to 2-D, centred on the mean.
// Each axis is signed so its largest-magnitude loading is positive.
// ConfigError for fewer than 3 codes or ragged input.
std::vector<Vec2> embed_2d(const std::vector<std::vector<float>>& codes);

// Delaunay triangulation covering the convex hull. Exact duplicates are
// triangulated once, through their lowest index. ConfigError for fewer than
// 3 points, DegeneracyError when every point lies on one line.
std::vector<Triangle> delaunay(const std::vector<Vec2>& points);

struct StyleEmbedding {
  std::vector<std::string> ids;
  std::vector<Vec2> points;
  std::vector<Triangle> triangles;
  std::vector<std::vector<float>> codes;

  std::string to_json() const;
  static StyleEmbedding from_json(const std::string& text);
  bool operator==(const StyleEmbedding&) const = default;
};

// Triangulates `points` (or the PCA embedding of the codes when empty).
StyleEmbedding build_embedding(std::vector<std::string> ids, std::vector<std::vector<float>> codes,
                               std::vector<Vec2> points = {});
StyleEmbedding embedding_from_model(const DecorModel& model);

struct Location {
  int triangle = -1;
  std::array<double, 3> weights{};  // barycentric, matching the triangle's vertex order
  Vec2 point{};                      // the query, clamped onto the hull if it was outside
  bool clamped = false;
};

// Barycentric coordinates of q in triangle t (no containment check).
std::array<double, 3> barycentric(const StyleEmbedding& e, int t, const Vec2& q);
// First triangle (in list order) containing q within 1e-9 on every weight;
// queries outside the hull move to the nearest hull point first.
Location locate(const StyleEmbedding& e, const Vec2& q);
std::vector<float> blend_codes(const StyleEmbedding& e, int t, const std::array<double, 3>& weights);
// ConfigError for an empty embedding.
std::vector<float> interpolate_code(const StyleEmbedding& e, const Vec2& q);

}  // namespace decor
