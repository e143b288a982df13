#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "vcons/error.hpp"
#include "vcons/model_io.hpp"
#include "vcons/models.hpp"
#include "vcons/oracle.hpp"
#include "vcons/vocab.hpp"

namespace vcons {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kUsage;
}

std::unique_ptr<CaptionModel> make_model(Arch arch) {
  const Sentence src[] = {tokenize("a man is riding a bike")};
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.hidden = 6;
  cfg.embed = 4;
  cfg.top_k = 2;
  cfg.tcn = {1, 4};
  cfg.feature_dim = 3;
  return std::make_unique<CaptionModel>(cfg, Vocabulary::build(src),
                                        arch == Arch::kTwoStage ? LabelVocabulary::build(src, 1) : LabelVocabulary{});
}

class ModelIo : public ::testing::TestWithParam<Arch> {};

TEST_P(ModelIo, RoundTripIsBitExact) {
  testing::TempDir tmp;
  auto model = make_model(GetParam());
  model->params().get("dec.out.b")[0] = 0.1 + 0.2;
  save_model(*model, tmp.file("m.json"));
  auto back = load_model(tmp.file("m.json"), GetParam());
  for (const auto& name : model->params().names()) {
    EXPECT_EQ(back->params().get(name), model->params().get(name)) << name;
    EXPECT_EQ(back->params().entry(name).trainable, model->params().entry(name).trainable) << name;
  }
  EXPECT_EQ(back->vocab(), model->vocab());
  EXPECT_EQ(back->labels().labels(), model->labels().labels());
  const VideoRecord v = testing::random_video("v", 6, 3, 1);
  EXPECT_EQ(back->caption(v), model->caption(v));
}

INSTANTIATE_TEST_SUITE_P(AllArchs, ModelIo, ::testing::ValuesIn(all_archs()),
                         [](const auto& info) { return arch_name(info.param); });

TEST(ModelIoErrors, ArchMismatchAndCorruption) {
  testing::TempDir tmp;
  auto model = make_model(Arch::kSeq2Seq);
  save_model(*model, tmp.file("m.json"));
  EXPECT_EQ(kind_of([&] { load_model(tmp.file("m.json"), Arch::kTcn); }), ErrorKind::kCorruptModel);

  const std::string text = testing::read_file(tmp.file("m.json"));
  write_text_file(tmp.file("trunc.json"), text.substr(0, text.size() / 2));
  EXPECT_EQ(kind_of([&] { load_model(tmp.file("trunc.json")); }), ErrorKind::kCorruptModel);

  auto j = model_to_json(*model);
  j["params"].erase("dec.out.b");
  EXPECT_EQ(kind_of([&] { model_from_json(j); }), ErrorKind::kCorruptModel);

  j = model_to_json(*model);
  j["params"]["dec.out.b"]["shape"] = {1, 2};
  EXPECT_EQ(kind_of([&] { model_from_json(j); }), ErrorKind::kCorruptModel);

  j = model_to_json(*model);
  j["params"]["bogus"] = j["params"]["dec.out.b"];
  EXPECT_EQ(kind_of([&] { model_from_json(j); }), ErrorKind::kCorruptModel);

  EXPECT_EQ(kind_of([&] { load_model(tmp.file("missing.json")); }), ErrorKind::kUsage);
}

TEST(ModelIoErrors, MessageNamesParameter) {
  auto model = make_model(Arch::kSeq2Seq);
  auto j = model_to_json(*model);
  j["params"]["dec.lstm.w"]["data"][0] = "x";
  try {
    model_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("dec.lstm.w"), std::string::npos) << e.what();
  }
}

TEST(OracleIo, RoundTrip) {
  testing::TempDir tmp;
  const Sentence src[] = {tokenize("a man is riding a bike"), tokenize("a dog")};
  OracleConfig cfg;
  cfg.embed = 4, cfg.hidden = 4, cfg.video_proj = 4, cfg.fc1 = 4, cfg.fc2 = 3, cfg.feature_dim = 3;
  OracleNet net(cfg, Vocabulary::build(src));
  net.params().get("fc3.w")[0] = 0.7;
  save_oracle(net, tmp.file("o.json"));
  auto back = load_oracle(tmp.file("o.json"));
  const VideoRecord v = testing::random_video("v", 3, 3, 2);
  EXPECT_EQ(back->raw(v, src[0], src[1]), net.raw(v, src[0], src[1]));
  auto j = oracle_to_json(net);
  j["arch"] = "seq2seq";
  EXPECT_EQ(kind_of([&] { oracle_from_json(j); }), ErrorKind::kCorruptModel);
}

}  // namespace
}  // namespace vcons
