#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snnadv/ann.hpp"
#include "snnadv/model.hpp"

using namespace snnadv;

TEST(Dense, ForwardIsAffine) {
  DenseLayer<double> d(2, 2);
  d.weight = TensorD::matrix({{1, 2}, {3, 4}});
  d.bias = TensorD::vector({0.5, -1});
  auto y = d.forward(TensorD::matrix({{1, 1}}));
  EXPECT_EQ(y, TensorD::matrix({{3.5, 6}}));
}

TEST(Dense, CrossEntropyGradientClosedForm) {
  Rng rng(1);
  AnnNet<double> net;
  net.input_shape = {4};
  DenseLayer<double> d(4, 3);
  for (auto& v : d.weight.data()) v = uniform(rng, -1, 1);
  for (auto& v : d.bias.data()) v = uniform(rng, -1, 1);
  net.layers.push_back(d);
  TensorD x({2, 4});
  for (auto& v : x.data()) v = uniform(rng, 0, 1);
  std::vector<int> labels{1, 2};
  auto tr = ann_forward(net, x);
  auto ce = softmax_cross_entropy(tr.logits, labels, Reduction::Sum);
  auto g = ann_backward(net, tr, ce.dlogits);
  auto p = softmax(tr.logits);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t i = 0; i < 4; ++i) {
      double expect = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        expect += (p.at(n, c) - (static_cast<int>(c) == labels[n] ? 1.0 : 0.0)) * d.weight.at(c, i);
      }
      EXPECT_NEAR(g.dinput.at(n, i), expect, 1e-12);
    }
  }
}

TEST(Relu, NegativePreactivationBlocksGradient) {
  auto x = TensorD::vector({-1.0, 2.0, -0.5, 0.0});
  auto g = relu_backward(x, TensorD::vector({1, 1, 1, 1}));
  EXPECT_EQ(g, TensorD::vector({0, 1, 0, 0}));
  EXPECT_EQ(relu_forward(x), TensorD::vector({0, 2, 0, 0}));
}

TEST(Conv, MatchesDirectConvolution) {
  Rng rng(3);
  Conv2dLayer<double> conv(2, 3, 4, 5);
  for (auto& v : conv.weight.data()) v = uniform(rng, -1, 1);
  for (auto& v : conv.bias.data()) v = uniform(rng, -1, 1);
  TensorD x({1, 2 * 4 * 5});
  for (auto& v : x.data()) v = uniform(rng, -1, 1);
  auto y = conv.forward(x);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        double s = conv.bias[o];
        for (std::size_t i = 0; i < 2; ++i) {
          for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
              int rr = static_cast<int>(r) + dr, cc = static_cast<int>(c) + dc;
              if (rr < 0 || rr >= 4 || cc < 0 || cc >= 5) continue;
              s += conv.weight.at(o, i * 9 + static_cast<std::size_t>((dr + 1) * 3 + dc + 1)) *
                   x[i * 20 + static_cast<std::size_t>(rr) * 5 + static_cast<std::size_t>(cc)];
            }
          }
        }
        EXPECT_NEAR(y[o * 20 + r * 5 + c], s, 1e-12);
      }
    }
  }
}

TEST(Pool, AverageAndMax) {
  PoolGeometry g{1, 2, 4};
  auto x = TensorD::matrix({{1, 2, 5, 6, 3, 4, 7, 9}});
  EXPECT_EQ(avg_pool2_forward(g, x), TensorD::matrix({{2.5, 6.75}}));
  EXPECT_EQ(max_pool2_forward(g, x), TensorD::matrix({{4, 9}}));
  auto dy = TensorD::matrix({{4, 8}});
  EXPECT_EQ(avg_pool2_backward(g, dy), TensorD::matrix({{1, 1, 2, 2, 1, 1, 2, 2}}));
  EXPECT_EQ(max_pool2_backward(g, x, dy), TensorD::matrix({{0, 0, 0, 0, 0, 4, 0, 8}}));
}

TEST(AnnNet, FiniteDifferenceOracle) {
  Rng rng(7);
  for (int i = 0; i < 10; ++i) {
    auto r = oracle::ann_case(rng, i % 2 == 1);
    EXPECT_LE(r.err64, 1e-5);
    EXPECT_LE(r.err32, 1e-3);
  }
}

TEST(AnnNet, ValidateCatchesWidthMismatch) {
  AnnNet<float> net;
  net.input_shape = {3};
  net.layers.push_back(DenseLayer<float>(4, 2));
  EXPECT_THROW(net.validate(), DimensionError);
}

TEST(AnnModel, ArchitectureRoundTrip) {
  Rng rng(9);
  AnnModel m(make_cnn({1, 8, 8}, 2, 3, 4, rng, true));
  auto rebuilt = model_from_architecture(ModelKind::Ann, m.architecture());
  EXPECT_EQ(rebuilt->architecture(), m.architecture());
  auto a = m.parameters();
  auto b = rebuilt->parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second->shape(), b[i].second->shape());
  }
}

TEST(AnnModel, BackwardThroughInterfaceMatchesNet) {
  Rng rng(10);
  AnnModel m(make_mlp({6}, {5}, 3, rng));
  Tensor x = oracle::random_tensor({2, 6}, rng, 0, 1);
  Tensor r = oracle::random_tensor({2, 3}, rng, -1, 1);
  auto pass = m.forward(x);
  auto via_model = pass->backward(r, true);
  auto direct = ann_backward(m.net(), ann_forward(m.net(), x), r);
  EXPECT_EQ(via_model.dinput, direct.dinput);
  ASSERT_EQ(via_model.dparams.size(), m.parameters().size());
  EXPECT_EQ(via_model.dparams[0], direct.dweight[0]);
}
