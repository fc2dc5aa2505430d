#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snnadv/attention.hpp"
#include "snnadv/model.hpp"
#include "snnadv/rollout.hpp"

using namespace snnadv;

namespace {

AttentionConfig small_config() {
  AttentionConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.patch = 4;
  cfg.embed = 8;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.mlp_hidden = 8;
  cfg.classes = 3;
  return cfg;
}

TensorD records_tensor(const TensorD& m) {
  return m.reshaped({1, m.dim(0), m.dim(1)});
}

}  // namespace

TEST(AttentionConfig, Validation) {
  auto cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.patch = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(AttentionForward, RecordedMatricesRowStochastic) {
  Rng rng(1);
  auto net = make_attention_net(small_config(), rng);
  Tensor x = oracle::random_tensor({3, 64}, rng, 0, 1);
  auto recs = attention_records(attention_forward(net, x));
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& layer : recs) {
    ASSERT_EQ(layer.size(), 2u);
    for (const auto& head : layer) {
      ASSERT_EQ(head.shape(), (Shape{3, 5, 5}));
      for (std::size_t r = 0; r < 15; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          s += head[r * 5 + c];
          EXPECT_GE(head[r * 5 + c], 0.0f);
        }
        EXPECT_NEAR(s, 1.0, 1e-5);
      }
    }
  }
}

TEST(AttentionForward, UniformQueriesAndKeysGiveUniformAttention) {
  Rng rng(2);
  auto cfg = small_config();
  cfg.depth = 1;
  cfg.heads = 1;
  auto net = make_attention_net(cfg, rng);
  for (auto& v : net.blocks[0].qkv.weight.data()) v = 0;
  for (auto& v : net.blocks[0].qkv.bias.data()) v = 0;
  for (std::size_t j = 2 * cfg.embed; j < 3 * cfg.embed; ++j) net.blocks[0].qkv.bias[j] = 0.3f;
  Tensor x = oracle::random_tensor({2, 64}, rng, 0, 1);
  auto recs = attention_records(attention_forward(net, x));
  for (auto v : recs[0][0].values()) EXPECT_NEAR(v, 1.0 / 5.0, 1e-7);
}

TEST(AttentionBackward, FiniteDifferenceOracle) {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    auto r = oracle::attention_case(rng);
    EXPECT_LE(r.err64, 1e-5);
    EXPECT_LE(r.err32, 1e-3);
  }
}

TEST(AttentionModel, ArchitectureRoundTripAndCast) {
  Rng rng(4);
  AttentionModel m(make_attention_net(small_config(), rng));
  auto rebuilt = model_from_architecture(ModelKind::Attention, m.architecture());
  EXPECT_EQ(rebuilt->architecture(), m.architecture());
  auto d = m.net().cast<double>().cast<float>();
  auto a = m.net().named_parameters();
  auto b = d.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second);
}

TEST(Rollout, MixedLayerAndProductsStayRowStochastic) {
  Rng rng(5);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + uniform_index(rng, 8);
    std::size_t heads = 1 + uniform_index(rng, 3), depth = 1 + uniform_index(rng, 4);
    AttentionRecords<double> recs(depth);
    for (auto& layer : recs) {
      for (std::size_t h = 0; h < heads; ++h) layer.push_back(records_tensor(oracle::random_stochastic(n, rng)));
    }
    worst = std::max(worst, oracle::max_row_sum_error(mix_heads(recs[0], 0)));
    worst = std::max(worst, oracle::max_row_sum_error(rollout_matrix(recs, 0)));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Rollout, MixHeadsHandValues) {
  std::vector<TensorD> heads{records_tensor(TensorD::matrix({{0, 1}, {1, 0}})),
                             records_tensor(TensorD::matrix({{1, 0}, {0, 1}}))};
  EXPECT_EQ(mix_heads(heads, 0), TensorD::matrix({{0.75, 0.25}, {0.25, 0.75}}));
}

TEST(Rollout, DepthProductHandValues) {
  AttentionRecords<double> recs{{records_tensor(TensorD::matrix({{0, 1}, {0, 1}}))},
                                {records_tensor(TensorD::matrix({{1, 0}, {1, 0}}))}};
  // A1 = [[.5,.5],[0,1]], A2 = [[1,0],[.5,.5]], R = A2 A1.
  EXPECT_EQ(rollout_matrix(recs, 0), TensorD::matrix({{0.5, 0.5}, {0.25, 0.75}}));
}

TEST(Rollout, IdentityAttentionFallsBackToUniformMask) {
  AttentionConfig cfg = small_config();
  TensorD eye({5, 5});
  for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1;
  AttentionRecords<double> recs{{records_tensor(eye)}, {records_tensor(eye)}};
  Rng rng(6);
  TensorD x = oracle::random_tensor({1, 64}, rng, 0, 1).cast<double>();
  EXPECT_EQ(attention_rollout(recs, cfg, x), x);
}

TEST(Rollout, ClassRowOnOnePatch) {
  AttentionConfig cfg = small_config();
  TensorD w({5, 5});
  for (std::size_t r = 0; r < 5; ++r) w.at(r, 2) = 1;  // every token attends to patch 1
  AttentionRecords<double> recs{{records_tensor(w)}};
  TensorD x({1, 64}, 1.0);
  auto phi = attention_rollout(recs, cfg, x);
  // Class row of 0.5 W + 0.5 I is [0.5, 0, 0.5, 0, 0]: only patch 1 has mass.
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t c = 0; c < 8; ++c) {
      double expect = (y < 4 && c >= 4) ? 1.0 : 0.0;
      EXPECT_EQ(phi[y * 8 + c], expect);
    }
  }
}

TEST(Rollout, PeakNormalizedPatchWeights) {
  AttentionConfig cfg = small_config();
  TensorD w({5, 5});
  w.at(0, 1) = 0.6;
  w.at(0, 4) = 0.4;
  for (std::size_t r = 1; r < 5; ++r) w.at(r, r) = 1;
  AttentionRecords<double> recs{{records_tensor(w)}};
  TensorD x({1, 64}, 2.0);
  auto phi = attention_rollout(recs, cfg, x);
  EXPECT_DOUBLE_EQ(phi[0], 2.0);
  EXPECT_DOUBLE_EQ(phi[63], 2.0 * 0.4 / 0.6);
  EXPECT_EQ(phi[4], 0.0);
}

TEST(OnesMask, ShapeAndIdentity) {
  Tensor x({3, 32, 32});
  auto j = ones_mask(x);
  EXPECT_EQ(j.shape(), (Shape{3, 32, 32}));
  for (auto v : j.values()) EXPECT_EQ(v, 1.0f);
  Rng rng(7);
  Tensor g = oracle::random_tensor({4, 10}, rng, -3, 3);
  EXPECT_EQ(mul(g, ones_mask(g)), g);
}

TEST(OnesMask, NonAttentionSaliencyIsOnes) {
  Rng rng(8);
  AnnModel m(make_mlp({6}, {4}, 3, rng));
  Tensor x = oracle::random_tensor({2, 6}, rng, 0, 1);
  EXPECT_EQ(m.saliency(*m.forward(x), x), ones_mask(x));
}
