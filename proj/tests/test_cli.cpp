#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "snnadv/cli.hpp"

using namespace snnadv;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("snnadv_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  std::vector<std::string> data_args() const {
    return {"--data.images", oracle::data_path("mnist10k-images-idx3-ubyte"), "--data.labels",
            oracle::data_path("mnist10k-labels-idx1-ubyte")};
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, TrainAttackAndReproduceFromEcho) {
  std::vector<std::string> train{"train", "--model.kind", "ann", "--model.hidden", "16",
                                 "--train.epochs", "1", "--seed", "4", "--out", path("train")};
  for (const auto& a : data_args()) train.push_back(a);
  auto t = cli(train);
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("test_accuracy"), std::string::npos);
  for (const char* f : {"model.snnm", "history.json", "config.txt", "run.json"}) {
    EXPECT_TRUE(fs::exists(root_ / "train" / f)) << f;
  }

  auto i = cli({"inspect", path("train/model.snnm")});
  EXPECT_EQ(i.code, 0) << i.err;
  EXPECT_NE(i.out.find("kind ann"), std::string::npos);
  EXPECT_NE(i.out.find("check roundtrip pass"), std::string::npos);
  EXPECT_NE(i.out.find("seed 4"), std::string::npos);

  std::vector<std::string> attack{"attack", "--model", path("train/model.snnm"), "--attack.kind", "pgd",
                                  "--attack.eps", "0.1", "--attack.steps", "5", "--attack.eps_step",
                                  "0.03", "--eval.n", "20", "--seed", "9", "--out", path("out1")};
  for (const auto& a : data_args()) attack.push_back(a);
  auto a1 = cli(attack);
  ASSERT_EQ(a1.code, 0) << a1.err;
  EXPECT_NE(a1.out.find("joint,"), std::string::npos);

  auto a2 = cli({"attack", "--config", path("out1/config.txt"), "--out", path("out2")});
  ASSERT_EQ(a2.code, 0) << a2.err;
  EXPECT_EQ(a2.out, a1.out);
  for (const char* f : {"report.json", "summary.csv", "run.json"}) {
    EXPECT_EQ(slurp(root_ / "out1" / f), slurp(root_ / "out2" / f)) << f;
  }
  auto c1 = slurp(root_ / "out1" / "config.txt");
  auto c2 = slurp(root_ / "out2" / "config.txt");
  EXPECT_NE(c1, c2);
  EXPECT_EQ(c2.find(path("out1")), std::string::npos);
}

TEST_F(CliTest, ErrorLinesAndExitCodes) {
  auto bad_key = cli({"attack", "--set", "attack.nope=1", "--out", path("x")});
  EXPECT_EQ(bad_key.code, 2);
  EXPECT_EQ(bad_key.err.rfind("error: config: ", 0), 0u) << bad_key.err;
  EXPECT_EQ(std::count(bad_key.err.begin(), bad_key.err.end(), '\n'), 1);

  auto bad_value = cli({"train", "--train.epochs", "lots", "--out", path("x")});
  EXPECT_EQ(bad_value.code, 2);
  EXPECT_NE(bad_value.err.find("train.epochs"), std::string::npos);

  std::ofstream(path("junk.snnm")) << "not a checkpoint";
  auto bad_file = cli({"inspect", path("junk.snnm")});
  EXPECT_EQ(bad_file.code, 3);
  EXPECT_EQ(bad_file.err.rfind("error: format: ", 0), 0u) << bad_file.err;

  auto no_cmd = cli({});
  EXPECT_NE(no_cmd.code, 0);
  auto unknown_cmd = cli({"fly"});
  EXPECT_EQ(unknown_cmd.code, 2);

  auto help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("attack"), std::string::npos);
}
