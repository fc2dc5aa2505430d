#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "snnadv/checkpoint.hpp"
#include "snnadv/data.hpp"
#include "snnadv/run_config.hpp"

using namespace snnadv;

namespace {

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& px,
                                     std::uint32_t magic = 0x00000803) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, count);
  put_be32(b, rows);
  put_be32(b, cols);
  b.insert(b.end(), px.begin(), px.end());
  return b;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels,
                                     std::uint32_t magic = 0x00000801) {
  std::vector<std::uint8_t> b;
  put_be32(b, magic);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

std::vector<std::unique_ptr<Model>> one_of_each() {
  Rng rng(1);
  std::vector<std::unique_ptr<Model>> out;
  out.push_back(std::make_unique<AnnModel>(make_cnn({1, 8, 8}, 2, 3, 4, rng)));
  NeuronConfig n;
  n.reset = ResetMode::SoftSubtract;
  n.leak = 0.8;
  auto snn = make_snn_mlp({12}, {7}, 3, n, 5, rng);
  snn.surrogate = SurrogateSpec::of(SurrogateKind::PiecewiseExp);
  out.push_back(std::make_unique<SpikingModel>(snn));
  out.push_back(std::make_unique<AttentionModel>(make_attention_net(oracle::tiny_attention_config(rng), rng)));
  out[0]->set_name("cnn");
  return out;
}

}  // namespace

TEST(Idx, ParsesAndScalesPixels) {
  auto d = parse_mnist_idx(idx_images(2, 2, 2, {0, 255, 51, 102, 255, 0, 0, 0}), idx_labels({7, 1}));
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.sample_shape, (Shape{1, 2, 2}));
  EXPECT_EQ(d.labels, (std::vector<int>{7, 1}));
  EXPECT_EQ(d.images[0], 0.0f);
  EXPECT_EQ(d.images[1], 1.0f);
  EXPECT_FLOAT_EQ(d.images[2], 0.2f);
  EXPECT_EQ(d.images[4], 1.0f);
}

TEST(Idx, BadMagicReportsObservedValue) {
  try {
    parse_mnist_idx(idx_images(1, 1, 1, {0}, 0x00000804), idx_labels({0}));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000804"), std::string::npos) << e.what();
  }
  try {
    parse_mnist_idx(idx_images(1, 1, 1, {0}), idx_labels({0}, 0xDEADBEEF));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("0xDEADBEEF"), std::string::npos) << e.what();
  }
}

TEST(Idx, TruncationAndMismatchRejected) {
  EXPECT_THROW(parse_mnist_idx(idx_images(2, 2, 2, {1, 2, 3}), idx_labels({0, 1})), FormatError);
  EXPECT_THROW(parse_mnist_idx(idx_images(1, 1, 1, {1}), idx_labels({0, 1})), FormatError);
  EXPECT_THROW(parse_mnist_idx({0, 0, 8}, idx_labels({0})), FormatError);
  auto labels = idx_labels({0, 1});
  labels.pop_back();
  EXPECT_THROW(parse_mnist_idx(idx_images(2, 1, 1, {1, 2}), labels), FormatError);
  EXPECT_THROW(load_mnist_idx("/nonexistent/images", "/nonexistent/labels"), FormatError);
}

TEST(Idx, BundledFilesLoad) {
  auto d = load_mnist_idx(oracle::data_path("mnist10k-images-idx3-ubyte"),
                          oracle::data_path("mnist10k-labels-idx1-ubyte"));
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.sample_shape, (Shape{1, 28, 28}));
  EXPECT_EQ(d.num_classes, 10u);
  for (int l : d.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LE(l, 9);
  }
  for (auto c : d.class_counts()) EXPECT_GT(c, 500u);
  EXPECT_GE(d.images.values().front(), 0.0f);
  EXPECT_LE(max_abs(d.images), 1.0);
}

TEST(Checkpoint, RoundTripIsByteStable) {
  nlohmann::json cfg = {{"seed", "3"}, {"model.kind", "x"}};
  for (const auto& m : one_of_each()) {
    auto bytes = encode_checkpoint(*m, cfg, 42);
    auto back = decode_checkpoint(bytes);
    EXPECT_EQ(back.model->kind(), m->kind());
    EXPECT_EQ(back.model->name(), m->name());
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(back.config, cfg);
    EXPECT_EQ(back.model->architecture(), m->architecture());
    auto a = m->parameters();
    auto b = std::as_const(*back.model).parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].first, b[i].first);
      EXPECT_EQ(*a[i].second, *b[i].second);
    }
    EXPECT_EQ(encode_checkpoint(*back.model, back.config, back.seed), bytes);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  auto models = one_of_each();
  auto path = (std::filesystem::temp_directory_path() / "snnadv_io_test.snnm").string();
  save_checkpoint(path, *models[1], {}, 5);
  auto back = load_checkpoint(path);
  Rng rng(2);
  Tensor x = oracle::random_tensor({3, 12}, rng, 0, 1);
  EXPECT_EQ(back.model->logits(x), models[1]->logits(x));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptInputRejected) {
  auto models = one_of_each();
  auto bytes = encode_checkpoint(*models[0], {}, 1);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  EXPECT_THROW(decode_checkpoint({}), FormatError);
}

TEST(RunConfig, LayeringOrder) {
  RunConfig c;
  EXPECT_EQ(c.integer("attack.steps"), 40);
  c.merge_text("attack.steps = 10\nattack.eps = 0.1  # budget\n");
  EXPECT_EQ(c.integer("attack.steps"), 10);
  c.merge_env({"SNNADV_ATTACK_STEPS=20", "PATH=/bin", "SNNADV_ATTACK_EPS_STEP=0.02"});
  EXPECT_EQ(c.integer("attack.steps"), 20);
  EXPECT_DOUBLE_EQ(c.real("attack.eps"), 0.1);
  EXPECT_DOUBLE_EQ(c.real("attack.eps_step"), 0.02);
  c.set("attack.steps", "30");
  EXPECT_EQ(c.integer("attack.steps"), 30);
}

TEST(RunConfig, AllProblemsReportedTogether) {
  RunConfig c;
  try {
    c.merge_text("bogus.one = 1\nattack.steps = many\nbogus.two = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("bogus.one"), std::string::npos);
    EXPECT_NE(msg.find("bogus.two"), std::string::npos);
    EXPECT_NE(msg.find("attack.steps"), std::string::npos);
  }
  EXPECT_THROW(c.merge_env({"SNNADV_NOT_A_KEY=1"}), ConfigError);
  EXPECT_THROW(c.set("attack.random_start", "maybe"), ConfigError);
}

TEST(RunConfig, EchoRoundTrip) {
  RunConfig c;
  c.set("attack.alpha", "0.25,0.75");
  c.set("model.name", "net a");
  c.set("sweep.surrogates", "arctan,pwe");
  RunConfig d;
  d.merge_text(c.echo());
  EXPECT_EQ(d.values(), c.values());
  EXPECT_EQ(d.echo(), c.echo());
  EXPECT_EQ(d.reals("attack.alpha"), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(d.strings("sweep.surrogates"), (std::vector<std::string>{"arctan", "pwe"}));
}

TEST(RunConfig, EnvironmentNames) {
  EXPECT_EQ(env_name("attack.eps_step"), "SNNADV_ATTACK_EPS_STEP");
  EXPECT_EQ(env_name("surrogate.literal_pwe"), "SNNADV_SURROGATE_LITERAL_PWE");
  EXPECT_EQ(env_name("seed"), "SNNADV_SEED");
}
