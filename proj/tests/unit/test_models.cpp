#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "decor/checkpoint.hpp"
#include "decor/conv3d.hpp"
#include "decor/errors.hpp"
#include "decor/models.hpp"

using namespace decor;

namespace {

VoxelGrid random_binary(Dims d, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(p);
  auto g = VoxelGrid::binary(d);
  for (auto& v : g.mutable_values()) v = bit(rng) ? 1.0f : 0.0f;
  return g;
}

std::vector<float> code_of(const DecorModel& m, std::size_t i) { return m.codebook.code_values(i); }

}  // namespace

TEST_CASE("generator output is 4x the input on every axis") {
  ad::set_kernel_threads(1);
  const auto m = DecorModel::init(1, {"a"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  for (const Dims d : {Dims{8, 8, 8}, Dims{5, 9, 7}, Dims{4, 4, 4}, Dims{12, 6, 10}}) {
    const auto out = m.generator.raw(random_binary(d, 0.4, 3), code_of(m, 0));
    CHECK(out.dims() == d.scaled(4));
    for (float v : out.values()) {
      REQUIRE(v > 0.0f);
      REQUIRE(v < 1.0f);
    }
  }
}

TEST_CASE("style code reaches the generator output") {
  const auto m = DecorModel::init(2, {"a", "b"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  const auto c = random_binary({6, 6, 6}, 0.5, 9);
  const auto a = m.generator.raw(c, code_of(m, 0));
  const auto b = m.generator.raw(c, code_of(m, 1));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(double(a.values()[i]) - b.values()[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("generator rejects a code of the wrong length") {
  const auto m = DecorModel::init(2, {"a"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  const std::vector<float> bad(7, 0.0f);
  CHECK_THROWS_AS(m.generator.raw(VoxelGrid::binary({4, 4, 4}), bad), ShapeError);
}

TEST_CASE("discriminator output is [N+1, D/2, H/2, W/2] in (0,1)") {
  const auto m = DecorModel::init(3, {"a", "b", "c"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  ad::NoGradGuard ng;
  const auto scores = m.discriminator.forward(to_tensor(random_binary({20, 18, 22}, 0.3, 1).as_continuous()));
  CHECK(scores.shape() == ad::Shape{4, 11, 9, 10});
  for (float v : scores.data()) {
    REQUIRE(v > 0.0f);
    REQUIRE(v < 1.0f);
  }
  CHECK_THROWS_AS(m.discriminator.forward(to_tensor(VoxelGrid::continuous({16, 18, 18}))), DimensionError);
  CHECK_THROWS_AS(m.discriminator.forward(to_tensor(VoxelGrid::continuous({19, 18, 18}))), DimensionError);
}

TEST_CASE("discriminator receptive field is bounded by 18 voxels") {
  // Score cell i sees fine voxels [2i-7, 2i+10] per axis: 18 wide.
  auto m = DecorModel::init(4, {"a"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  ad::NoGradGuard ng;
  const Dims d{36, 36, 36};
  const auto base = random_binary(d, 0.3, 5).as_continuous();
  const auto s0 = m.discriminator.forward(to_tensor(base));
  const int cell = 8;  // score cell (8, 8, 8); preimage centre 16.5
  const auto score_at = [&](const ad::Tensor& s) {
    return s.data()[(static_cast<std::size_t>(cell) * 18 + cell) * 18 + cell];
  };
  std::mt19937_64 rng(6);
  int inside_changed = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto g = base;
    std::uniform_int_distribution<int> pos(0, 35);
    int x = pos(rng), y = pos(rng), z = pos(rng);
    const bool inside = x >= 2 * cell - 7 && x <= 2 * cell + 10 && y >= 2 * cell - 7 && y <= 2 * cell + 10 &&
                        z >= 2 * cell - 7 && z <= 2 * cell + 10;
    g.set(x, y, z, 1.0f - g.at(x, y, z));
    const float s1 = score_at(m.discriminator.forward(to_tensor(g)));
    if (!inside) {
      CHECK(s1 == score_at(s0));
    } else if (s1 != score_at(s0)) {
      ++inside_changed;
    }
  }
  CHECK(inside_changed > 0);
  // Perturbations at distance >= 10 from the centre never matter.
  for (int c : {6, 27}) {
    auto g = base;
    g.set(c, 2 * cell, 2 * cell, 1.0f - g.at(c, 2 * cell, 2 * cell));
    CHECK(score_at(m.discriminator.forward(to_tensor(g))) == score_at(s0));
  }
}

TEST_CASE("same seed gives bitwise-identical checkpoints; different seeds differ") {
  const auto dir = std::filesystem::temp_directory_path() / "decor_models_test";
  std::filesystem::create_directories(dir);
  const auto a = DecorModel::init(11, {"x", "y"});
  const auto b = DecorModel::init(11, {"x", "y"});
  const auto c = DecorModel::init(12, {"x", "y"});
  CHECK(ad::encode_checkpoint(a.tensors()) == ad::encode_checkpoint(b.tensors()));
  CHECK(ad::encode_checkpoint(a.tensors()) != ad::encode_checkpoint(c.tensors()));

  a.save(dir / "a.dgck");
  const auto loaded = DecorModel::load(dir / "a.dgck");
  CHECK(ad::encode_checkpoint(loaded.tensors()) == ad::encode_checkpoint(a.tensors()));
  CHECK(loaded.codebook.ids() == std::vector<std::string>{"x", "y"});
  CHECK_THROWS_AS(DecorModel::load(dir / "missing.dgck"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("codebook norms fall in [0.05, 0.5] under the N(0, 0.1^2) init") {
  std::vector<std::string> ids;
  for (int i = 0; i < 64; ++i) ids.push_back("s" + std::to_string(i));
  const auto m = DecorModel::init(99, ids, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double n2 = 0.0;
    for (float v : code_of(m, i)) n2 += double(v) * v;
    CHECK(std::sqrt(n2) >= 0.05);
    CHECK(std::sqrt(n2) <= 0.5);
  }
  CHECK(m.codebook.index_of("s7") == 7);
  CHECK_THROWS_AS(m.codebook.index_of("nope"), NotFoundError);
}

TEST_CASE("parameter names are stable") {
  const auto m = DecorModel::init(1, {"chair"}, {3, {4, 4, 4, 4}}, {{4, 4, 4}});
  const auto t = m.tensors();
  CHECK(ad::find_tensor(t, "generator/conv0/weight") != nullptr);
  CHECK(ad::find_tensor(t, "generator/conv6/bias") != nullptr);
  CHECK(ad::find_tensor(t, "discriminator/conv3/weight")->tensor.dim(0) == 2);
  CHECK(ad::find_tensor(t, "style_code/chair")->tensor.numel() == 8);
}
