#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ffino/model/checkpoint.hpp"
#include "support/gradcheck.hpp"

using namespace ffino;
using ffino::testing::grad_check;

namespace {

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, bool rg = false, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(u(gen));
  return Tensor<T>(shape, v, rg);
}

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.width = 6;
  c.modes_r = 4;
  c.modes_z = 3;
  c.projection_width = 8;
  c.branch_hidden = {8};
  c.trunk_hidden = {8};
  c.unet_depth = 1;
  c.grid_nr = 12;
  c.grid_nz = 8;
  c.seed = seed;
  return c;
}

void fill(Tensor<double> t, double v) {
  auto d = t.mutable_data();
  std::fill(d.begin(), d.end(), v);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ffino_model_" + name)).string();
}

}  // namespace

TEST(Model, DefaultConfigElementCounts) {
  ModelConfig c;  // width 36, grid 192 x 64, 3 F-Fourier + 3 U-Fourier
  FfinoModel<float> model(c);
  NoGradGuard guard;
  ShapeTrace trace;
  const auto out = model.forward(random_tensor<float>({4, 5, 192, 64}, 1), random_tensor<float>({4, 7}, 2),
                                 random_tensor<float>({4, 1}, 3), &trace);
  const std::vector<std::pair<std::string, std::size_t>> table{
      {"branch1", 4 * 64 * 192 * 36},           {"branch2", 4 * 36},
      {"branch_merger", 4 * 64 * 192 * 36},     {"trunk", 4 * 36},
      {"branch_trunk_merger", 16 * 36 * 192 * 64}, {"projection1", 16 * 192 * 64 * 36},
      {"f_fourier1", 16 * 192 * 64 * 36},       {"f_fourier2", 16 * 192 * 64 * 36},
      {"f_fourier3", 16 * 192 * 64 * 36},       {"u_fourier1", 16 * 192 * 64 * 36},
      {"u_fourier2", 16 * 192 * 64 * 36},       {"u_fourier3", 16 * 192 * 64 * 36},
      {"projection2", 16 * 192 * 64 * 128},     {"projection3", 16 * 192 * 64 * 1},
      {"reshape", 4 * 4 * 192 * 64}};
  ASSERT_EQ(trace.size(), table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    EXPECT_EQ(trace[i].first, table[i].first);
    EXPECT_EQ(shape_numel(trace[i].second), table[i].second) << table[i].first;
  }
  EXPECT_EQ(out.shape(), (Shape{4, 4, 192, 64}));
  EXPECT_EQ(trace[4].second, (Shape{16, 36, 192, 64}));
}

TEST(Model, FullTimeVectorShape) {
  FfinoModel<double> model(small_config());
  NoGradGuard guard;
  const auto out = model.forward(random_tensor({1, 5, 12, 8}, 1), random_tensor({1, 7}, 2), random_tensor({12, 1}, 3));
  EXPECT_EQ(out.shape(), (Shape{1, 12, 12, 8}));
}

TEST(Model, ParamCountMatchesEnumeration) {
  std::mt19937_64 gen(17);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  for (int t = 0; t < 10; ++t) {
    ModelConfig c = small_config(t);
    c.width = pick(2, 10);
    c.grid_nr = 4 * pick(2, 5);
    c.grid_nz = 4 * pick(2, 4);
    c.modes_r = pick(1, c.grid_nr / 2 + 1);
    c.modes_z = pick(1, c.grid_nz / 2 + 1);
    c.n_f_fourier = pick(0, 3);
    c.m_u_fourier = pick(c.n_f_fourier == 0 ? 1 : 0, 3);
    c.unet_depth = pick(0, 2);
    c.projection_width = pick(1, 16);
    c.ff_hidden = pick(0, 12);
    c.branch_hidden = {pick(1, 12)};
    c.trunk_hidden = {pick(1, 12), pick(1, 12)};
    if (t % 3 == 1) c.decoder_preset = "fmionet_like";
    if (t % 3 == 2) {
      c.decoder_preset = "custom";
      c.custom_layers = {LayerKind::fourier, LayerKind::f_fourier, LayerKind::u_fourier};
    }
    FfinoModel<double> model(c);
    EXPECT_EQ(FfinoModel<double>::param_count(c), model.enumerate_params()) << nlohmann::json(c).dump();
  }
  ModelConfig full;
  EXPECT_EQ(FfinoModel<float>::param_count(full), FfinoModel<float>(full).enumerate_params());
}

TEST(Model, SingleLinearLayerCount) { EXPECT_EQ(ConvParams<double>::count(5, 36, 1), 216u); }

TEST(Model, FfinoPresetHasFewerParameters) {
  for (std::size_t width : {8u, 16u, 36u}) {
    ModelConfig a;
    a.width = width;
    ModelConfig b = a;
    b.decoder_preset = "fmionet_like";
    EXPECT_LT(FfinoModel<float>::param_count(a), FfinoModel<float>::param_count(b)) << "width " << width;
  }
}

TEST(Model, InitIsDeterministic) {
  FfinoModel<double> a(small_config(5)), b(small_config(5)), c(small_config(6));
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
    any_diff = any_diff || !std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pc[i].tensor.data().begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, InvalidConfigsRejected) {
  ModelConfig c = small_config();
  c.modes_r = 8;  // capacity of 12 is 7
  EXPECT_THROW(FfinoModel<double>{c}, ConfigError);
  c = small_config();
  c.decoder_preset = "custom";
  EXPECT_THROW(FfinoModel<double>{c}, ConfigError);
  c = small_config();
  c.unet_depth = 3;  // 12 is not divisible by 8
  EXPECT_THROW(FfinoModel<double>{c}, ConfigError);
  c = small_config();
  c.width = 0;
  EXPECT_THROW(FfinoModel<double>{c}, ConfigError);
  EXPECT_THROW(layer_kind_from_string("dense"), ConfigError);
}

TEST(Model, WrongChannelCountsRejected) {
  FfinoModel<double> model(small_config());
  EXPECT_THROW(model.encode(random_tensor({2, 4, 12, 8}, 1), random_tensor({2, 7}, 2), random_tensor({3, 1}, 3)),
               std::invalid_argument);
  EXPECT_THROW(model.encode(random_tensor({2, 5, 12, 8}, 1), random_tensor({2, 6}, 2), random_tensor({3, 1}, 3)),
               std::invalid_argument);
  EXPECT_THROW(model.decode(random_tensor({2, 5, 12, 8}, 1)), std::invalid_argument);
}

TEST(Encode, ZeroScalarBranchGivesSpatialTimesTrunk) {
  FfinoModel<double> model(small_config());
  fill(model.branch2().weights.back(), 0.0);
  fill(model.branch2().biases.back(), 0.0);
  NoGradGuard guard;
  const auto sp = random_tensor({2, 5, 12, 8}, 1), sc = random_tensor({2, 7}, 2), tm = random_tensor({3, 1}, 3);
  const auto z = model.encode(sp, sc, tm);
  const auto b1 = model.branch1()(sp);
  const auto t = fnn_forward(tm, model.trunk());
  const std::size_t w = 6, plane = 12 * 8;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < w; ++c)
        for (std::size_t p = 0; p < plane; ++p)
          ASSERT_EQ(z.data()[((s * 3 + k) * w + c) * plane + p], b1.data()[(s * w + c) * plane + p] * t.data()[k * w + c]);
}

TEST(Encode, UnitTrunkGivesBranchSum) {
  FfinoModel<double> model(small_config());
  fill(model.trunk().weights.back(), 0.0);
  fill(model.trunk().biases.back(), 1.0);
  NoGradGuard guard;
  const auto sp = random_tensor({2, 5, 12, 8}, 1), sc = random_tensor({2, 7}, 2), tm = random_tensor({2, 1}, 3);
  const auto z = model.encode(sp, sc, tm);
  const auto b1 = model.branch1()(sp);
  const auto b2 = fnn_forward(sc, model.branch2());
  const std::size_t w = 6, plane = 12 * 8;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t c = 0; c < w; ++c)
        for (std::size_t p = 0; p < plane; ++p)
          ASSERT_EQ(z.data()[((s * 2 + k) * w + c) * plane + p], b1.data()[(s * w + c) * plane + p] + b2.data()[s * w + c]);
}

TEST(Encode, TimeEntersMultiplicatively) {
  FfinoModel<double> model(small_config(3));
  NoGradGuard guard;
  const auto sp = random_tensor({1, 5, 12, 8}, 4), sc = random_tensor({1, 7}, 5);
  const Tensor<double> tm({2, 1}, std::vector<double>{0.1, 0.7});
  const auto z = model.encode(sp, sc, tm);
  const auto t = fnn_forward(tm, model.trunk());
  const std::size_t w = 6, plane = 96;
  for (std::size_t c = 0; c < w; ++c) {
    if (std::abs(t.data()[w + c]) < 1e-6) continue;
    const double ratio = t.data()[c] / t.data()[w + c];
    for (std::size_t p = 0; p < plane; ++p) {
      const double z2 = z.data()[(w + c) * plane + p];
      if (std::abs(z2) < 1e-9) continue;
      EXPECT_NEAR(z.data()[c * plane + p] / z2, ratio, 1e-9 * std::max(1.0, std::abs(ratio)));
    }
  }
}

TEST(Encode, ScalarPerturbationIsGridConstant) {
  FfinoModel<double> model(small_config(2));
  NoGradGuard guard;
  const auto sp = random_tensor({1, 5, 12, 8}, 4), tm = Tensor<double>({1, 1}, std::vector<double>{1.0});
  auto sc = random_tensor({1, 7}, 5);
  fill(model.trunk().weights.back(), 0.0);
  fill(model.trunk().biases.back(), 1.0);
  const auto z0 = model.encode(sp, sc, tm);
  sc.mutable_data()[3] += 0.25;
  const auto z1 = model.encode(sp, sc, tm);
  for (std::size_t c = 0; c < 6; ++c) {
    const double d0 = z1.data()[c * 96] - z0.data()[c * 96];
    for (std::size_t p = 1; p < 96; ++p) EXPECT_NEAR(z1.data()[c * 96 + p] - z0.data()[c * 96 + p], d0, 1e-12);
  }
}

TEST(Decode, ZeroParametersGiveConstantBias) {
  FfinoModel<double> model(small_config());
  for (auto p : model.parameters()) fill(p.tensor, 0.0);
  fill(model.projection3().bias, 0.375);
  NoGradGuard guard;
  const auto y = model.decode(random_tensor({3, 6, 12, 8}, 9));
  EXPECT_EQ(y.shape(), (Shape{3, 1, 12, 8}));
  for (double v : y.data()) EXPECT_EQ(v, 0.375);
}

TEST(Model, GradientReachesEveryParameterGroup) {
  ModelConfig c = small_config(4);
  c.width = 16;
  FfinoModel<double> model(c);
  const auto out = model.forward(random_tensor({2, 5, 12, 8}, 1), random_tensor({2, 7}, 2), random_tensor({2, 1}, 3));
  backward(sum(square(out)));
  for (const auto& p : model.parameters()) {
    const auto g = p.tensor.grad();
    ASSERT_FALSE(g.empty()) << p.name;
    EXPECT_TRUE(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) << p.name;
  }
}

TEST(Model, SampleAxisPermutationEquivariance) {
  FfinoModel<double> model(small_config(8));
  NoGradGuard guard;
  const auto sp = random_tensor({3, 5, 12, 8}, 1), sc = random_tensor({3, 7}, 2), tm = random_tensor({2, 1}, 3);
  const auto y = model.forward(sp, sc, tm);
  // permute samples (0, 1, 2) -> (2, 0, 1)
  const std::size_t perm[3] = {2, 0, 1};
  std::vector<double> sp2(sp.size()), sc2(sc.size());
  const std::size_t spn = 5 * 96;
  for (std::size_t i = 0; i < 3; ++i) {
    std::copy_n(sp.data().begin() + perm[i] * spn, spn, sp2.begin() + i * spn);
    std::copy_n(sc.data().begin() + perm[i] * 7, 7, sc2.begin() + i * 7);
  }
  const auto y2 = model.forward(Tensor<double>({3, 5, 12, 8}, sp2), Tensor<double>({3, 7}, sc2), tm);
  const std::size_t yn = 2 * 96;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < yn; ++k) EXPECT_EQ(y2.data()[i * yn + k], y.data()[perm[i] * yn + k]);
}

TEST(BranchTrunkMerge, MatchesLoopOracleAndGradCheck) {
  const auto b = random_tensor({2, 3, 4, 5}, 1, true), t = random_tensor({3, 3}, 2, true);
  const auto z = branch_trunk_merge(b, t);
  ASSERT_EQ(z.shape(), (Shape{6, 3, 4, 5}));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 20; ++p)
          EXPECT_EQ(z.data()[((s * 3 + k) * 3 + c) * 20 + p], b.data()[(s * 3 + c) * 20 + p] * t.data()[k * 3 + c]);
  const auto w = random_tensor({6, 3, 4, 5}, 3);
  const auto res = grad_check([&] { return sum(mul(branch_trunk_merge(b, t), w)); }, {b, t});
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
  EXPECT_THROW(branch_trunk_merge(b, random_tensor({3, 4}, 4)), std::invalid_argument);
}

TEST(Model, EndToEndGradCheck) {
  ModelConfig c = small_config(12);
  c.width = 3;
  c.n_f_fourier = 1;
  c.m_u_fourier = 1;
  FfinoModel<double> model(c);
  const auto sp = random_tensor({1, 5, 12, 8}, 1), sc = random_tensor({1, 7}, 2), tm = random_tensor({2, 1}, 3);
  std::vector<Tensor<double>> ps;
  for (const auto& p : model.parameters()) ps.push_back(p.tensor);
  const auto res = grad_check([&] { return mean(square(model.forward(sp, sc, tm))); }, ps, 1e-5, 1e-3, 20);
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig c = small_config(21);
  c.target = "dp";
  c.target_scale = 12.5;
  FfinoModel<double> model(c);
  const auto path = temp_path("rt.fck");
  save_checkpoint(model, path, {{"epoch", 3}});
  const auto back = load_checkpoint<double>(path);
  EXPECT_EQ(nlohmann::json(back.config()), nlohmann::json(model.config()));
  EXPECT_EQ(read_checkpoint_header(path).at("extra").at("epoch"), 3);
  NoGradGuard guard;
  const auto sp = random_tensor({2, 5, 12, 8}, 1), sc = random_tensor({2, 7}, 2), tm = random_tensor({2, 1}, 3);
  // parameters are stored as f32, so compare against a model rounded the same way
  for (auto p : model.parameters())
    for (auto& v : p.tensor.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  const auto a = model.forward(sp, sc, tm), b = back.forward(sp, sc, tm);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_EQ(back.enumerate_params(), FfinoModel<double>::param_count(c));

  FfinoModel<float> fm(c);
  save_checkpoint(fm, path);
  const auto fb = load_checkpoint<float>(path);
  const auto pa = fm.parameters(), pb = fb.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
}

TEST(Checkpoint, DefaultConfigReloadsWithSameCount) {
  FfinoModel<float> model{ModelConfig{}};
  const auto path = temp_path("default.fck");
  save_checkpoint(model, path);
  EXPECT_EQ(load_checkpoint<float>(path).enumerate_params(), model.enumerate_params());
}

TEST(Checkpoint, CorruptionIsReported) {
  FfinoModel<float> model(small_config());
  const auto path = temp_path("bad.fck");
  save_checkpoint(model, path);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint<float>(path), IoError);
  save_checkpoint(model, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
  EXPECT_THROW(load_checkpoint<float>(path), IoError);
  EXPECT_THROW(load_checkpoint<float>(temp_path("missing.fck")), IoError);
}
