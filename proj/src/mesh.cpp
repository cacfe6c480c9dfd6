#include "decor/mesh.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "decor/errors.hpp"

namespace decor {
namespace {

#include "mc_table.inc"

static_assert(std::endian::native == std::endian::little, "mesh blob codec assumes a little-endian host");

// Corner offsets (dx, dy, dz) and the corner pairs of the twelve edges, in
// the numbering the triangle table uses.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
                               {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

class Extractor {
 public:
  Extractor(const VoxelGrid& f, double iso) : f_(f), d_(f.dims()), iso_(iso) {}

  TriangleMesh run() {
    for (int z = -1; z < d_.z; ++z)
      for (int y = -1; y < d_.y; ++y)
        for (int x = -1; x < d_.x; ++x) cell(x, y, z);
    return std::move(mesh_);
  }

 private:
  double value(int x, int y, int z) const {
    return f_.in_bounds(x, y, z) ? static_cast<double>(f_.at(x, y, z)) : 0.0;
  }

  // Padded-grid index of a lattice point; points range over [-1, d].
  std::uint64_t point_key(int x, int y, int z) const {
    const std::uint64_t px = x + 1, py = y + 1, pz = z + 1;
    return (pz * (d_.y + 2) + py) * (d_.x + 2) + px;
  }

  std::uint32_t vertex(const std::array<int, 3>& p, const std::array<int, 3>& q) {
    const double a = value(p[0], p[1], p[2]), b = value(q[0], q[1], q[2]);
    const double t = (iso_ - a) / (b - a);
    std::uint64_t key;
    std::array<double, 3> pos;
    if (t <= 0.0 || t >= 1.0) {
      const auto& c = t <= 0.0 ? p : q;
      key = point_key(c[0], c[1], c[2]) * 4 + 3;
      pos = {double(c[0]), double(c[1]), double(c[2])};
    } else {
      int axis = 0;
      while (p[axis] == q[axis]) ++axis;
      const auto& lo = p[axis] < q[axis] ? p : q;
      key = point_key(lo[0], lo[1], lo[2]) * 4 + axis;
      for (int k = 0; k < 3; ++k) pos[k] = p[k] + t * (q[k] - p[k]);
    }
    const auto [it, fresh] = index_.try_emplace(key, static_cast<std::uint32_t>(mesh_.vertices.size()));
    if (fresh) mesh_.vertices.push_back({float(pos[0]), float(pos[1]), float(pos[2])});
    return it->second;
  }

  bool degenerate(const std::array<std::uint32_t, 3>& t) const {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
    const auto& a = mesh_.vertices[t[0]];
    const auto& b = mesh_.vertices[t[1]];
    const auto& c = mesh_.vertices[t[2]];
    const double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    return u[1] * v[2] - u[2] * v[1] == 0.0 && u[2] * v[0] - u[0] * v[2] == 0.0 && u[0] * v[1] - u[1] * v[0] == 0.0;
  }

  void cell(int x, int y, int z) {
    int index = 0;
    std::array<std::array<int, 3>, 8> corner;
    for (int c = 0; c < 8; ++c) {
      corner[c] = {x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]};
      if (value(corner[c][0], corner[c][1], corner[c][2]) <= iso_) index |= 1 << c;
    }
    const auto* row = kTriTable[index];
    for (int n = 0; row[n] != -1; n += 3) {
      std::array<std::uint32_t, 3> tri;
      for (int k = 0; k < 3; ++k) {
        const auto& e = kEdge[row[n + k]];
        tri[k] = vertex(corner[e[0]], corner[e[1]]);
      }
      // The table winds the other way round for this corner layout.
      std::swap(tri[1], tri[2]);
      if (!degenerate(tri)) mesh_.triangles.push_back(tri);
    }
  }

  const VoxelGrid& f_;
  Dims d_;
  double iso_;
  TriangleMesh mesh_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + 4);
}

}  // namespace

TriangleMesh marching_cubes(const VoxelGrid& field, double iso) {
  if (!(iso > 0.0 && iso < 1.0)) throw ParameterError("iso level must lie in (0, 1), got " + std::to_string(iso));
  const auto& d = field.dims();
  if (d.x < 2 || d.y < 2 || d.z < 2) throw DimensionError("marching cubes needs >= 2 cells per axis, got " + to_string(d));
  return Extractor(field, iso).run();
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
    out << buf;
  }
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_obj(mesh, out);
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

TriangleMesh read_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    const auto fail = [&](const std::string& why) {
      return FormatError("OBJ line " + std::to_string(lineno) + ": " + why);
    };
    if (tag == "v") {
      std::array<float, 3> v;
      if (!(ss >> v[0] >> v[1] >> v[2])) throw fail("expected three coordinates");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ss >> tok) {
        long long i = 0;
        try {
          i = std::stoll(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw fail("bad face index '" + tok + "'");
        }
        if (i < 0) i += static_cast<long long>(mesh.vertices.size()) + 1;
        if (i < 1 || i > static_cast<long long>(mesh.vertices.size())) throw fail("face index out of range");
        idx.push_back(static_cast<std::uint32_t>(i - 1));
      }
      if (idx.size() < 3) throw fail("face needs three corners");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_obj(in);
}

std::vector<std::uint8_t> encode_mesh_blob(const TriangleMesh& mesh) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + mesh.vertices.size() * 12 + mesh.triangles.size() * 12);
  put_u32(out, static_cast<std::uint32_t>(mesh.vertices.size()));
  put_u32(out, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& v : mesh.vertices) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    out.insert(out.end(), p, p + 12);
  }
  for (const auto& t : mesh.triangles)
    for (auto i : t) put_u32(out, i);
  return out;
}

TriangleMesh decode_mesh_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("mesh blob shorter than its header");
  std::uint32_t nv, nt;
  std::memcpy(&nv, bytes.data(), 4);
  std::memcpy(&nt, bytes.data() + 4, 4);
  if (bytes.size() != 8 + 12ull * nv + 12ull * nt) throw FormatError("mesh blob size does not match its counts");
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  mesh.triangles.resize(nt);
  if (nv) std::memcpy(mesh.vertices.data(), bytes.data() + 8, 12ull * nv);
  if (nt) std::memcpy(mesh.triangles.data(), bytes.data() + 8 + 12ull * nv, 12ull * nt);
  for (const auto& t : mesh.triangles)
    for (auto i : t)
      if (i >= nv) throw FormatError("mesh blob index out of range");
  return mesh;
}

}  // namespace decor
