#include <gtest/gtest.h>

#include "oracles.hpp"
#include "snnadv/attacks.hpp"
#include "snnadv/data.hpp"
#include "snnadv/train.hpp"

using namespace snnadv;

namespace {

struct Fixture {
  Rng rng{42};
  AnnModel ann{make_mlp({16}, {12}, 4, rng)};
  SpikingModel snn{[this] {
    NeuronConfig n;
    n.leak = 0.9;
    return make_snn_mlp({16}, {12}, 4, n, 5, rng, 2.5);
  }()};
  Tensor x = oracle::random_tensor({6, 16}, rng, 0, 1);
  std::vector<int> labels{0, 1, 2, 3, 0, 1};
};

AttackConfig plain(double eps, double step, int steps) {
  AttackConfig c;
  c.eps = eps;
  c.eps_step = step;
  c.steps = steps;
  c.random_start = false;
  return c;
}

}  // namespace

TEST(Project, Fixtures) {
  auto x = Tensor::vector({0.5f, 0.5f, 0.0f});
  auto inside = Tensor::vector({0.55f, 0.45f, 0.05f});
  EXPECT_EQ(project(inside, x, 0.1), inside);
  EXPECT_FLOAT_EQ(project(Tensor::vector({0.9f, 0.5f, 0.0f}), x, 0.1)[0], 0.6f);
  EXPECT_EQ(project(Tensor::vector({0.5f, 0.5f, -0.5f}), x, 0.2)[2], 0.0f);
  auto once = project(Tensor::vector({0.9f, -1.0f, 0.7f}), x, 0.3);
  EXPECT_EQ(project(once, x, 0.3), once);
}

TEST(Fgsm, ZeroBudgetIsIdentity) {
  Fixture f;
  EXPECT_EQ(fgsm(f.ann, f.x, f.labels, 0.0), f.x);
}

TEST(Fgsm, MovesEveryPixelByEps) {
  Fixture f;
  auto g = input_gradient(f.ann, f.x, f.labels);
  auto adv = fgsm(f.ann, f.x, f.labels, 0.05);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    float moved = f.x[i] + 0.05f * (g[i] > 0 ? 1.0f : g[i] < 0 ? -1.0f : 0.0f);
    EXPECT_EQ(adv[i], std::clamp(moved, 0.0f, 1.0f));
  }
}

TEST(Fgsm, LogisticClosedForm) {
  AnnNet<float> net;
  net.input_shape = {2};
  DenseLayer<float> d(2, 2);
  d.weight = Tensor::matrix({{2, -1}, {0, 0}});
  d.bias = Tensor({2});
  net.layers.push_back(d);
  AnnModel m(net);
  // dL/dx = -(1 - p0) w for the true class 0, so the step is -eps * sign(w).
  auto adv = fgsm(m, Tensor::matrix({{0.5f, 0.5f}}), {0}, 0.1);
  EXPECT_FLOAT_EQ(adv[0], 0.4f);
  EXPECT_FLOAT_EQ(adv[1], 0.6f);
}

TEST(Pgd, SingleStepEqualsFgsm) {
  Fixture f;
  for (const Model* m : {static_cast<const Model*>(&f.ann), static_cast<const Model*>(&f.snn)}) {
    AttackTrace tr;
    auto adv = pgd(*m, f.x, f.labels, plain(0.1, 0.1, 1), &tr);
    EXPECT_EQ(adv, fgsm(*m, f.x, f.labels, 0.1));
    ASSERT_EQ(tr.iterates.size(), 1u);
    EXPECT_EQ(tr.iterates[0], adv);
  }
}

TEST(Pgd, RandomStartIsSeeded) {
  Fixture f;
  AttackConfig c = plain(0.1, 0.02, 3);
  c.random_start = true;
  c.seed = 5;
  auto a = pgd(f.ann, f.x, f.labels, c);
  auto b = pgd(f.ann, f.x, f.labels, c);
  EXPECT_EQ(a, b);
  c.seed = 6;
  EXPECT_NE(pgd(f.ann, f.x, f.labels, c), a);
}

TEST(Mim, ZeroMomentumIsIterativeFgsm) {
  Fixture f;
  for (const Model* m : {static_cast<const Model*>(&f.ann), static_cast<const Model*>(&f.snn)}) {
    AttackConfig c = plain(0.08, 0.01, 8);
    c.momentum = 0;
    AttackTrace tr;
    mim(*m, f.x, f.labels, c, &tr);
    auto ref = oracle::iterative_fgsm(*m, f.x, f.labels, static_cast<float>(0.08 / 8), 0.08, 8);
    EXPECT_LE(oracle::trace_diff(tr.iterates, ref), 1e-6);
  }
}

TEST(Mim, ConstantGradientIgnoresMomentum) {
  AnnNet<float> net;
  net.input_shape = {3};
  DenseLayer<float> d(3, 2);
  d.weight = Tensor::matrix({{1, -2, 0.5f}, {0, 0, 0}});
  d.bias = Tensor({2});
  net.layers.push_back(d);
  AnnModel m(net);
  auto x = Tensor::matrix({{0.5f, 0.5f, 0.5f}});
  AttackConfig c = plain(0.3, 0.01, 6);
  c.momentum = 0;
  AttackTrace a, b;
  mim(m, x, {0}, c, &a);
  c.momentum = 1;
  mim(m, x, {0}, c, &b);
  EXPECT_EQ(a.iterates, b.iterates);
}

TEST(Mim, ZeroGradientAccumulatesNothing) {
  oracle::LookupModel m(4, 2, [](std::span<const float>) { return 0; });
  Rng rng(1);
  auto x = oracle::random_tensor({2, 4}, rng, 0, 1);
  EXPECT_EQ(mim(m, x, {0, 1}, plain(0.1, 0.01, 3)), x);
}

TEST(Saga, SingleModelEqualsPgd) {
  Fixture f;
  AttackConfig c = plain(0.1, 0.01, 10);
  AttackTrace s, p;
  saga({&f.snn}, {1.0}, f.x, f.labels, c, &s);
  pgd(f.snn, f.x, f.labels, c, &p);
  EXPECT_EQ(oracle::trace_diff(s.iterates, p.iterates), 0.0);
  EXPECT_EQ(s.directions, p.directions);
}

TEST(Saga, ZeroWeightDropsModel) {
  Fixture f;
  AttackConfig c = plain(0.1, 0.01, 6);
  AttackTrace s, p;
  saga({&f.ann, &f.snn}, {1.0, 0.0}, f.x, f.labels, c, &s);
  pgd(f.ann, f.x, f.labels, c, &p);
  EXPECT_EQ(s.iterates, p.iterates);
}

TEST(Saga, RejectsBadCoefficients) {
  Fixture f;
  EXPECT_THROW(saga({&f.ann}, {-1.0}, f.x, f.labels, plain(0.1, 0.01, 1)), ConfigError);
  EXPECT_THROW(saga({&f.ann, &f.snn}, {1.0}, f.x, f.labels, plain(0.1, 0.01, 1)), ConfigError);
}

TEST(AutoSaga, SingleModelDirectionsEqualPgd) {
  Fixture f;
  for (const Model* m : {static_cast<const Model*>(&f.ann), static_cast<const Model*>(&f.snn)}) {
    AttackConfig c = plain(0.1, 0.01, 10);
    AttackTrace a, p;
    auto r = auto_saga({m}, f.x, f.labels, c, &a);
    pgd(*m, f.x, f.labels, c, &p);
    EXPECT_EQ(a.directions, p.directions);
    EXPECT_EQ(r.x_adv, p.iterates.back());
  }
}

TEST(AutoSaga, DuplicateModelsStayUniform) {
  auto data = synth_blobs(200, 4, 16, 3);
  Rng rng(8);
  AnnModel m(make_mlp({16}, {12}, 4, rng));
  TrainConfig tc;
  tc.optimizer = SgdConfig{};
  tc.epochs = 10;
  train_epochs(m, data, tc);
  AnnModel copy = m;
  auto sub = data.slice(0, 40);
  AttackConfig c = plain(0.2, 0.02, 15);
  auto r = auto_saga({&m, &copy}, sub.images, sub.labels, c);
  for (const auto& it : r.alpha_history)
    for (const auto& row : it)
      for (double a : row) EXPECT_NEAR(a, 0.5, 0.05);
  auto single = pgd(m, sub.images, sub.labels, c);
  auto joint = make_report({&m, &copy}, sub.images, r.x_adv, sub.labels, c.steps).joint_rate;
  auto alone = make_report({&m}, sub.images, single, sub.labels, c.steps).joint_rate;
  EXPECT_EQ(joint, alone);
}

TEST(AutoSaga, CoefficientsStayOnSimplex) {
  Fixture f;
  AttackConfig c = plain(0.1, 0.01, 8);
  auto r = auto_saga({&f.ann, &f.snn}, f.x, f.labels, c);
  ASSERT_EQ(r.alpha_history.size(), 9u);
  for (const auto& it : r.alpha_history) {
    for (const auto& row : it) {
      EXPECT_NEAR(row[0] + row[1], 1.0, 1e-12);
      EXPECT_GE(row[0], 0.0);
      EXPECT_GE(row[1], 0.0);
    }
  }
  auto mean = r.mean_alpha(8);
  EXPECT_NEAR(mean[0] + mean[1], 1.0, 1e-12);
}

TEST(AutoSaga, Deterministic) {
  Fixture f;
  AttackConfig c = plain(0.1, 0.01, 5);
  auto a = auto_saga({&f.ann, &f.snn}, f.x, f.labels, c);
  auto b = auto_saga({&f.ann, &f.snn}, f.x, f.labels, c);
  EXPECT_EQ(a.x_adv, b.x_adv);
  EXPECT_EQ(a.alpha_history, b.alpha_history);
}

TEST(MarginLoss, Algebra) {
  auto logits = Tensor::matrix({{2, 0, 0}, {0, 2, 0}, {1, 1, 0}});
  std::vector<int> labels{0, 0, 0};
  for (double kappa : {0.0, 0.1, 0.5}) {
    auto f = margin_loss(logits, labels, kappa);
    auto p = softmax(logits);
    for (std::size_t s = 0; s < 3; ++s) {
      EXPECT_GE(f[s], -kappa);
      double margin = p.at(s, 0) - std::max(p.at(s, 1), p.at(s, 2));
      EXPECT_NEAR(f[s], std::max(margin, -kappa), 1e-6);
    }
    EXPECT_GT(f[0], 0.0);
    EXPECT_DOUBLE_EQ(f[1], -kappa);
    EXPECT_NEAR(f[2], 0.0, 1e-7);
  }
}

TEST(MarginLoss, GradientMatchesFiniteDifference) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor logits = oracle::random_tensor({3, 4}, rng, -2, 2);
    std::vector<int> labels{0, 2, 3};
    auto g = margin_loss_grad(logits, labels, 1.0);
    auto fd = finite_difference_grad(
        [&](const TensorD& z) {
          double s = 0;
          for (double v : margin_loss(z.cast<float>(), labels, 1.0)) s += v;
          return s;
        },
        logits.cast<double>(), 1e-3);
    EXPECT_LE(relative_error(g, fd), 2e-3);
  }
}

TEST(Report, JointNotAbovePerModel) {
  Fixture f;
  auto adv = pgd(f.ann, f.x, f.labels, plain(0.3, 0.05, 5));
  auto r = make_report({&f.ann, &f.snn}, f.x, adv, f.labels, 5);
  for (double rate : r.success_rate) EXPECT_LE(r.joint_rate, rate);
  for (double d : r.linf) EXPECT_LE(d, 0.3 + 1e-6);
  auto j = to_json(r);
  EXPECT_EQ(j["samples"].size(), 6u);
}

TEST(Pgd, IterativeBeatsSingleStepOnBlobs) {
  auto data = synth_blobs(300, 3, 10, 4);
  Rng rng(9);
  AnnModel m(make_mlp({10}, {16}, 3, rng));
  TrainConfig tc;
  tc.optimizer = SgdConfig{};
  tc.epochs = 15;
  train_epochs(m, data, tc);
  AttackConfig c;
  c.eps = 0.3;
  c.eps_step = 0.03;
  c.steps = 20;
  c.seed = 1;
  auto fg = make_report({&m}, data.images, fgsm(m, data.images, data.labels, 0.3), data.labels, 1);
  auto pg = make_report({&m}, data.images, pgd(m, data.images, data.labels, c), data.labels, 20);
  EXPECT_GE(pg.success_rate[0], fg.success_rate[0]);
}

TEST(Attacks, ProjectionInvariantFuzz) {
  auto r = oracle::projection_fuzz(200, 17);
  EXPECT_EQ(r.configs, 200);
  EXPECT_LE(r.max_excess, 1e-6);
  EXPECT_TRUE(r.in_range);
  EXPECT_TRUE(r.alpha_simplex);
}

TEST(AttackConfig, Validation) {
  AttackConfig c;
  EXPECT_NO_THROW(c.validate());
  c.eps_step = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AttackConfig{};
  c.alpha = {0.5, -0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c = AttackConfig{};
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_attack_kind("autosaga"), AttackKind::AutoSaga);
  EXPECT_THROW(parse_attack_kind("cw"), ConfigError);
}
