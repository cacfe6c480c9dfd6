#include "decor/voxel_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "decor/errors.hpp"

namespace decor {
namespace {

static_assert(std::endian::native == std::endian::little, "VXB1 codec assumes a little-endian host");

constexpr char kMagic[4] = {'V', 'X', 'B', '1'};
constexpr std::uint64_t kMaxCells = std::uint64_t{1} << 31;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

bool starts_with(std::span<const std::uint8_t> bytes, std::string_view prefix) {
  return bytes.size() >= prefix.size() && std::memcmp(bytes.data(), prefix.data(), prefix.size()) == 0;
}

}  // namespace

std::vector<std::uint8_t> encode_vxb1(const VoxelGrid& grid) {
  const Dims& d = grid.dims();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(d.x));
  put_u32(out, static_cast<std::uint32_t>(d.y));
  put_u32(out, static_cast<std::uint32_t>(d.z));
  out.push_back(static_cast<std::uint8_t>(grid.kind()));
  out.insert(out.end(), 3, 0);

  const auto values = grid.values();
  if (grid.is_binary()) {
    const std::size_t start = out.size();
    out.resize(start + (values.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] != 0.0f) out[start + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
  } else {
    const std::size_t start = out.size();
    out.resize(start + values.size() * 4);
    std::memcpy(out.data() + start, values.data(), values.size() * 4);
  }
  return out;
}

VoxelGrid decode_vxb1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("missing VXB1 magic");
  if (bytes.size() < kVxb1HeaderSize) throw IoError("truncated VXB1 header");
  const std::uint32_t dx = get_u32(bytes.data() + 4);
  const std::uint32_t dy = get_u32(bytes.data() + 8);
  const std::uint32_t dz = get_u32(bytes.data() + 12);
  const std::uint8_t encoding = bytes[16];
  if (dx == 0 || dy == 0 || dz == 0) throw FormatError("VXB1 dims must be positive");
  const std::uint64_t cells = std::uint64_t{dx} * dy * dz;
  if (cells > kMaxCells || dx > kMaxCells || dy > kMaxCells || dz > kMaxCells) {
    throw FormatError("VXB1 dims too large");
  }
  if (encoding > 1) throw FormatError("unknown VXB1 encoding " + std::to_string(encoding));

  const Dims dims{static_cast<int>(dx), static_cast<int>(dy), static_cast<int>(dz)};
  const auto payload = bytes.subspan(kVxb1HeaderSize);
  std::vector<float> values(cells);
  if (encoding == 0) {
    if (payload.size() < (cells + 7) / 8) throw IoError("truncated VXB1 payload");
    for (std::uint64_t i = 0; i < cells; ++i) values[i] = (payload[i / 8] >> (i % 8)) & 1u ? 1.0f : 0.0f;
    return VoxelGrid(dims, VoxelKind::Binary, std::move(values));
  }
  if (payload.size() < cells * 4) throw IoError("truncated VXB1 payload");
  std::memcpy(values.data(), payload.data(), cells * 4);
  try {
    return VoxelGrid(dims, VoxelKind::Continuous, std::move(values));
  } catch (const KindError& e) {
    throw FormatError(std::string("VXB1 continuous payload: ") + e.what());
  }
}

// binvox: "#binvox 1", "dim d h w", optional translate/scale lines, "data",
// then (value, run length) byte pairs. Voxel (x, y, z) sits at run index
// x * w * h + z * w + y, i.e. y fastest.
VoxelGrid decode_binvox(std::span<const std::uint8_t> bytes) {
  if (!starts_with(bytes, "#binvox")) throw FormatError("missing binvox header");
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw IoError("truncated binvox header");
    std::string line(reinterpret_cast<const char*>(bytes.data() + start), pos - start);
    ++pos;
    return line;
  };

  next_line();
  int d = 0, h = 0, w = 0;
  for (;;) {
    std::istringstream line(next_line());
    std::string key;
    line >> key;
    if (key == "dim") {
      line >> d >> h >> w;
      if (!line) throw FormatError("bad binvox dim line");
    } else if (key == "data") {
      break;
    } else if (key != "translate" && key != "scale" && !key.empty()) {
      throw FormatError("unexpected binvox header key '" + key + "'");
    }
  }
  if (d <= 0 || h <= 0 || w <= 0) throw FormatError("binvox dims must be positive");
  const std::uint64_t cells = std::uint64_t(d) * h * w;
  if (cells > kMaxCells) throw FormatError("binvox dims too large");

  std::vector<std::uint8_t> flat;
  flat.reserve(cells);
  while (flat.size() < cells) {
    if (pos + 1 >= bytes.size()) throw IoError("truncated binvox payload");
    const std::uint8_t value = bytes[pos];
    const std::uint8_t count = bytes[pos + 1];
    pos += 2;
    if (value > 1) throw FormatError("binvox run value must be 0 or 1");
    if (flat.size() + count > cells) throw FormatError("binvox runs overflow the grid");
    flat.insert(flat.end(), count, value);
  }

  VoxelGrid grid = VoxelGrid::binary({d, w, h});
  for (int x = 0; x < d; ++x)
    for (int z = 0; z < h; ++z)
      for (int y = 0; y < w; ++y) {
        const std::size_t i = static_cast<std::size_t>(x) * w * h + static_cast<std::size_t>(z) * w + y;
        if (flat[i]) grid.set(x, y, z, 1.0f);
      }
  return grid;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

VoxelGrid load_voxels(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (starts_with(bytes, "#binvox")) return decode_binvox(bytes);
  return decode_vxb1(bytes);
}

void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path) {
  write_file_bytes(path, encode_vxb1(grid));
}

}  // namespace decor
