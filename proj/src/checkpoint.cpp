#include "decor/checkpoint.hpp"

#include <cstring>
#include <unordered_map>

#include "decor/errors.hpp"
#include "decor/voxel_io.hpp"

namespace decor::ad {
namespace {

constexpr char kMagic[4] = {'D', 'G', 'C', 'K'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("truncated DGCK checkpoint");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name.substr(0, 32) + "...");
    if (t.rank() > 0xFF) throw FormatError("tensor rank too large for '" + name + "'");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    const std::size_t start = out.size();
    out.resize(start + t.numel() * 4);
    std::memcpy(out.data() + start, t.data().data(), t.numel() * 4);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("missing DGCK magic");
  Reader r(bytes.subspan(4));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint16_t>();
    const auto raw = r.take(len);
    std::string name(reinterpret_cast<const char*>(raw.data()), raw.size());
    const auto rank = r.get<std::uint8_t>();
    Shape shape;
    std::uint64_t n = 1;
    for (int i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint32_t>();
      if (d == 0 || d > (1u << 30)) throw FormatError("bad dim in tensor '" + name + "'");
      shape.push_back(static_cast<int>(d));
      n *= d;
      if (n > (std::uint64_t{1} << 32)) throw FormatError("tensor '" + name + "' too large");
    }
    const auto payload = r.take(n * 4);
    std::vector<float> values(n);
    std::memcpy(values.data(), payload.data(), n * 4);
    out.push_back({std::move(name), Tensor::from(shape.empty() ? Shape{} : shape, std::move(values))});
  }
  if (!r.done()) throw FormatError("trailing bytes after DGCK tensors");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_file_bytes(path, encode_checkpoint(tensors));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void assign_parameters(const std::vector<NamedTensor>& stored, std::vector<NamedTensor>& targets,
                       const std::vector<std::string>& ignored_prefixes) {
  std::unordered_map<std::string, NamedTensor*> by_name;
  for (auto& t : targets) by_name[t.name] = &t;
  std::size_t assigned = 0;
  for (const auto& s : stored) {
    bool ignored = false;
    for (const auto& prefix : ignored_prefixes) ignored = ignored || s.name.rfind(prefix, 0) == 0;
    if (ignored) continue;
    auto it = by_name.find(s.name);
    if (it == by_name.end()) throw FormatError("unknown tensor '" + s.name + "' in checkpoint");
    Tensor& dst = it->second->tensor;
    if (dst.shape() != s.tensor.shape()) {
      throw FormatError("tensor '" + s.name + "' has shape " + to_string(s.tensor.shape()) + ", expected " +
                        to_string(dst.shape()));
    }
    std::copy(s.tensor.data().begin(), s.tensor.data().end(), dst.mutable_data().begin());
    ++assigned;
  }
  if (assigned != targets.size()) throw FormatError("checkpoint is missing parameters");
}

}  // namespace decor::ad
