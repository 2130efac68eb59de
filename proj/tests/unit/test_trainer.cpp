#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "qsnn/checkpoint.hpp"
#include "qsnn/error.hpp"
#include "qsnn/trainer.hpp"

using namespace qsnn;

namespace {

Dataset blobs(std::size_t n, std::size_t dims, std::size_t classes, std::uint64_t seed) {
  return gen_synthetic({SyntheticKind::blobs, n, classes, seed, dims, 0.1});
}

TrainConfig small_cfg() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 16;
  c.lr_max = 0.05;
  c.p = 2;
  return c;
}

}  // namespace

TEST(CosineLr, Endpoints) {
  EXPECT_EQ(cosine_lr(0, 100, 0.1, 0.01), 0.1);
  EXPECT_NEAR(cosine_lr(100, 100, 0.1, 0.01), 0.01, 1e-17);
  EXPECT_NEAR(cosine_lr(50, 100, 0.1, 0.01), 0.055, 1e-15);
}

TEST(CosineLr, RejectsBadSteps) {
  EXPECT_THROW(cosine_lr(0, 0, 0.1, 0.0), ConfigError);
  EXPECT_THROW(cosine_lr(5, 4, 0.1, 0.0), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.lr_min = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ConfigHash, StableAndSensitive) {
  TrainConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Sgd, ZeroGradientStepIsExactDecay) {
  std::vector<double> w{0.3, -1.7, 2.5e-3}, g(3, 0.0);
  const std::vector<double> before = w;
  std::vector<ParamRef> params{{w, g, true, false}};
  Sgd opt(0.9, 5e-4);
  opt.step(params, 0.1);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], before[i] * (1.0 - 0.1 * 5e-4));
}

TEST(Sgd, MomentumAccumulates) {
  std::vector<double> w{1.0}, g{2.0};
  std::vector<ParamRef> params{{w, g, true, false}};
  Sgd opt(0.5, 0.0);
  opt.step(params, 0.1);
  EXPECT_DOUBLE_EQ(w[0], 1.0 - 0.1 * 2.0);
  opt.step(params, 0.1);
  EXPECT_DOUBLE_EQ(w[0], 0.8 - 0.1 * (0.5 * 2.0 + 2.0));
}

TEST(Sgd, ScalesAreNotDecayedAndStayPositive) {
  std::vector<double> s{0.5}, gs{0.0};
  std::vector<ParamRef> params{{s, gs, false, true}};
  Sgd opt(0.0, 0.1);
  opt.step(params, 0.1);
  EXPECT_EQ(s[0], 0.5);
  gs[0] = 1e6;
  opt.step(params, 0.1);
  EXPECT_EQ(s[0], kMinScale);
}

TEST(Train, ZeroLearningRateLeavesWeightsUnchanged) {
  const Dataset d = blobs(64, 3, 2, 1);
  const std::size_t widths[] = {3, 5, 2};
  QuantNet net = QuantNet::mlp(widths, 2, true, 4);
  const Tensor W = std::get<AffineLayer>(net.blocks()[0]).W();
  const Tensor B2 = std::get<AffineLayer>(net.blocks()[2]).B();
  TrainConfig c = small_cfg();
  c.lr_max = 0.0;
  train(net, d, c);
  EXPECT_EQ(std::get<AffineLayer>(net.blocks()[0]).W(), W);
  EXPECT_EQ(std::get<AffineLayer>(net.blocks()[2]).B(), B2);
}

TEST(Train, SingleSampleStepMatchesHandGradient) {
  // Softmax regression: logits = W·x + B, one sample, one plain SGD step.
  const Tensor W0 = Tensor::matrix({{0.5, -0.25}, {0.1, 0.3}});
  const Tensor B0 = Tensor::vector({0.05, -0.05});
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(W0, B0));
  QuantNet net(std::move(blocks));
  Dataset d{Tensor::matrix({{0.8, 0.4}}), {1}, 2};

  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 1;
  c.lr_max = 0.2;
  c.momentum = 0.0;
  c.weight_decay = 0.0;
  train(net, d, c);

  const double z0 = 0.5 * 0.8 - 0.25 * 0.4 + 0.05, z1 = 0.1 * 0.8 + 0.3 * 0.4 - 0.05;
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1)), p1 = 1.0 - p0;
  const double g[2] = {p0, p1 - 1.0};
  const auto& a = std::get<AffineLayer>(net.blocks()[0]);
  const double x[2] = {0.8, 0.4};
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.W().at(o, i), W0.at(o, i) - 0.2 * g[o] * x[i], 1e-15);
    EXPECT_NEAR(a.B()[o], B0[o] - 0.2 * g[o], 1e-15);
  }
}

TEST(Train, SameSeedGivesBitIdenticalCheckpoints) {
  const Dataset d = blobs(96, 4, 3, 2);
  const std::size_t widths[] = {4, 6, 3};
  std::string dumps[2];
  History hist[2];
  for (int k = 0; k < 2; ++k) {
    QuantNet net = QuantNet::mlp(widths, 2, true, 11);
    TrainConfig c = small_cfg();
    c.noise_adaptor = true;
    hist[k] = train(net, d, c);
    dumps[k] = dump_checkpoint(net, {c.epochs, c.seed, config_hash(c), true});
  }
  EXPECT_EQ(dumps[0], dumps[1]);
  ASSERT_EQ(hist[0].size(), 2u);
  EXPECT_EQ(hist[0][1].train_loss, hist[1][1].train_loss);
}

TEST(Train, DifferentSeedsDiffer) {
  const Dataset d = blobs(96, 4, 3, 2);
  const std::size_t widths[] = {4, 6, 3};
  QuantNet a = QuantNet::mlp(widths, 2, true, 11), b = QuantNet::mlp(widths, 2, true, 11);
  TrainConfig c = small_cfg();
  train(a, d, c);
  c.seed = 1;
  train(b, d, c);
  EXPECT_NE(dump_checkpoint(a, {}), dump_checkpoint(b, {}));
}

TEST(Train, LearnsSeparableBlobs) {
  // Tight blobs: at spread 0.1 in 4 dims the classes overlap (a
  // nearest-mean classifier only reaches ~0.83).
  const Dataset d = gen_synthetic({SyntheticKind::blobs, 400, 3, 3, 4, 0.03});
  const std::size_t widths[] = {4, 16, 3};
  QuantNet net = QuantNet::mlp(widths, 2, false, 1);
  TrainConfig c = small_cfg();
  c.epochs = 15;
  c.lr_max = 0.1;
  const History h = train(net, d, c);
  EXPECT_LT(h.back().train_loss, h.front().train_loss);
  EXPECT_GT(evaluate_ann(net, d), 0.95);
}

TEST(Train, NonFiniteLossNamesTheStep) {
  Dataset d = blobs(32, 3, 2, 1);
  d.features[3 * 20] = std::numeric_limits<double>::quiet_NaN();
  const std::size_t widths[] = {3, 4, 2};
  QuantNet net = QuantNet::mlp(widths, 2, false, 1);
  TrainConfig c = small_cfg();
  c.batch_size = 32;
  try {
    train(net, d, c);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, ShapeMismatchRejected) {
  const Dataset d = blobs(32, 3, 2, 1);
  const std::size_t widths[] = {4, 4, 2};
  QuantNet net = QuantNet::mlp(widths, 2, false, 1);
  EXPECT_THROW(train(net, d, small_cfg()), ShapeError);
}

TEST(Evaluate, PerfectOneHotNet) {
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(Tensor::matrix({{1000, 0, 0}, {0, 1000, 0}, {0, 0, 1000}}), Tensor({3})));
  QuantNet net(std::move(blocks));
  Dataset d{Tensor::matrix({{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}), {0, 2, 1}, 3};
  EXPECT_EQ(evaluate_ann(net, d), 1.0);
}

TEST(Evaluate, ConstantLogitsTieToFirstClass) {
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(Tensor({2, 2}), Tensor({2})));
  QuantNet net(std::move(blocks));
  Dataset d{Tensor::matrix({{1, 0}, {0, 1}, {1, 1}, {0, 0}}), {0, 1, 1, 0}, 2};
  EXPECT_EQ(evaluate_ann(net, d), 0.5);
}

TEST(Evaluate, TinyQuantNetByHand) {
  // 1 → quant(p=2, s=0.5) → head [[1], [-1]] + [-0.6, 0].
  std::vector<Block> blocks;
  blocks.emplace_back(AffineLayer(Tensor::matrix({{1.0}}), Tensor::vector({0.0})));
  blocks.emplace_back(QuantActLayer(2, false, 0.5));
  blocks.emplace_back(AffineLayer(Tensor::matrix({{1.0}, {-1.0}}), Tensor::vector({-0.6, 0.0})));
  QuantNet net(std::move(blocks));
  // v=0.1: a=0   → (-0.6, 0)    → 1
  // v=0.3: a=0.5 → (-0.1, -0.5) → 0
  // v=0.9: a=1   → (0.4, -1)    → 0
  // v=-1:  a=0   → (-0.6, 0)    → 1, labeled 0
  Dataset d{Tensor::matrix({{0.1}, {0.3}, {0.9}, {-1.0}}), {1, 0, 0, 0}, 2};
  const auto pred = predict_ann(net, d.features);
  EXPECT_EQ(pred, (std::vector<std::size_t>{1, 0, 0, 1}));
  EXPECT_EQ(evaluate_ann(net, d), 0.75);
}
