#include <gtest/gtest.h>

#include <cstdlib>
#include <string>

#include "test_support.hpp"

namespace vcons {
namespace {

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + VCONS_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new testing::TempDir;
    ASSERT_EQ(run("synth --out " + corpus() + " --seed 2 --train 8 --val 2 --test 4"), 0);
    write_text_file(tmp_->file("cfg.json"), R"({"hidden": 8, "embed": 4, "epochs": 1, "arch": "seq2seq"})");
    ASSERT_EQ(run("train --corpus " + corpus() + " --config " + tmp_->file("cfg.json") + " --out " + model()), 0);
  }
  static void TearDownTestSuite() { delete tmp_; }

  static std::string corpus() { return tmp_->file("corpus.jsonl"); }
  static std::string model() { return tmp_->file("model.json"); }
  static std::string file(const std::string& name) { return tmp_->file(name); }

  static testing::TempDir* tmp_;
};

testing::TempDir* Cli::tmp_ = nullptr;

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("synth"), 1);
  EXPECT_EQ(run("train --corpus " + corpus() + " --arch transformer --out " + file("x.json")), 1);
  EXPECT_EQ(run("generate --corpus " + corpus() + " --model " + file("missing.json") + " --out " + file("c.jsonl")), 1);
}

TEST_F(Cli, DataErrorsExitTwo) {
  write_text_file(file("bad.jsonl"), "{\"video_id\": \"a\", \"frames\": [[1], [1, 2]], \"annotations\": [], "
                                     "\"split\": \"train\"}\n");
  EXPECT_EQ(run("human-agreement --corpus " + file("bad.jsonl")), 2);
  write_text_file(file("trunc.json"), testing::read_file(model()).substr(0, 100));
  EXPECT_EQ(run("generate --corpus " + corpus() + " --model " + file("trunc.json") + " --out " + file("c.jsonl")), 2);
  write_text_file(file("orphan.jsonl"), "{\"video_id\": \"nowhere\", \"model_id\": \"m\", \"sentence\": \"a\"}\n");
  EXPECT_EQ(run("score --candidates " + file("orphan.jsonl") + " --corpus " + corpus()), 2);
}

TEST_F(Cli, GenerateScoreAndConsensusAreDeterministic) {
  ASSERT_EQ(run("generate --corpus " + corpus() + " --model a=" + model() + " --model b=" + model() + " --out " +
                file("c1.jsonl") + " --workers 1"),
            0);
  ASSERT_EQ(run("generate --corpus " + corpus() + " --model a=" + model() + " --model b=" + model() + " --out " +
                file("c2.jsonl") + " --workers 3"),
            0);
  EXPECT_EQ(testing::read_file(file("c1.jsonl")), testing::read_file(file("c2.jsonl")));
  ASSERT_EQ(run("consensus --candidates " + file("c1.jsonl") + " --out " + file("k1.jsonl")), 0);
  ASSERT_EQ(run("consensus --candidates " + file("c1.jsonl") + " --out " + file("k2.jsonl") + " --workers 2"), 0);
  EXPECT_EQ(testing::read_file(file("k1.jsonl")), testing::read_file(file("k2.jsonl")));
  ASSERT_EQ(run("score --consensus " + file("k1.jsonl") + " --corpus " + corpus() + " --out " + file("s.json")), 0);
  EXPECT_FALSE(testing::read_file(file("s.json")).empty());
}

TEST_F(Cli, GradcheckPasses) { EXPECT_EQ(run("gradcheck --out " + file("g.json")), 0); }

}  // namespace
}  // namespace vcons
