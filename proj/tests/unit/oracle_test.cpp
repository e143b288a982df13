#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "vcons/consensus.hpp"
#include "vcons/error.hpp"
#include "vcons/oracle.hpp"
#include "vcons/random.hpp"
#include "vcons/vocab.hpp"

namespace vcons {
namespace {

OracleConfig tiny_config() {
  OracleConfig cfg;
  cfg.embed = 6, cfg.hidden = 6, cfg.video_proj = 6, cfg.fc1 = 8, cfg.fc2 = 4, cfg.feature_dim = 4;
  return cfg;
}

Vocabulary oracle_vocab() {
  const auto s = testing::sentences({"a man is riding a bike", "a dog runs in the park", "the woman cooks pasta"});
  return Vocabulary::build(s);
}

std::vector<PoolCandidate> named(std::size_t n) {
  std::vector<PoolCandidate> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({"m" + std::to_string(i), tokenize("s " + std::to_string(i))});
  return c;
}

TEST(Compare, UntrainedNetworkIsIndifferent) {
  // The output layer starts at zero, so every raw output is exactly 0.5.
  OracleNet net(tiny_config(), oracle_vocab());
  const VideoRecord v = testing::random_video("v", 3, 4, 1);
  EXPECT_EQ(net.raw(v, tokenize("a man"), tokenize("a dog runs")), 0.5);
  EXPECT_EQ(net.compare(v, tokenize("a man"), tokenize("a dog runs")), 0.5);
}

TEST(Compare, ExactlySymmetric) {
  OracleNet net(tiny_config(), oracle_vocab());
  Rng rng(2);
  for (const auto& name : net.params().names())
    for (double& x : net.params().get(name).data()) x = rng.uniform(-1, 1);
  const VideoRecord v = testing::random_video("v", 3, 4, 1);
  const auto s = testing::sentences({"a man is riding", "a dog runs", "the woman cooks pasta in the park", "a",
                                     "unknown words here"});
  bool any_decisive = false;
  for (const auto& a : s)
    for (const auto& b : s) {
      const double p = net.compare(v, a, b), q = net.compare(v, b, a);
      EXPECT_EQ(p + q, 1.0) << a.str() << " | " << b.str();
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      if (a == b) EXPECT_EQ(p, 0.5);
      any_decisive = any_decisive || p != 0.5;
    }
  EXPECT_TRUE(any_decisive);
}

TEST(Tournament, StubTotalOrderIsReproduced) {
  const auto c = named(5);
  const std::vector<double> phase1 = {0.5, 0.4, 0.3, 0.2, 0.1};
  const std::vector<std::size_t> truth = {3, 0, 4, 1, 2};  // best first
  std::map<std::string, int> rank;
  for (std::size_t r = 0; r < truth.size(); ++r) rank[c[truth[r]].model_id] = static_cast<int>(r);
  const Comparator stub = [&](const PoolCandidate& a, const PoolCandidate& b) {
    return rank[a.model_id] < rank[b.model_id] ? 0.8 : 0.2;
  };
  const TournamentResult r = tournament_rank(c, phase1, stub);
  EXPECT_EQ(r.order, truth);
  EXPECT_EQ(r.victories, (std::vector<int>{4, 3, 2, 1, 0}));
}

TEST(Tournament, TiesFallBackToPhase1ThenModelId) {
  const auto c = named(3);
  const Comparator even = [](const PoolCandidate&, const PoolCandidate&) { return 0.5; };
  const std::vector<double> phase1 = {0.1, 0.9, 0.5};
  EXPECT_EQ(tournament_rank(c, phase1, even).order, (std::vector<std::size_t>{1, 2, 0}));
  const std::vector<double> flat = {0.3, 0.3, 0.3};
  EXPECT_EQ(tournament_rank(c, flat, even).order, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Tournament, CondorcetCycleBreaksOnPhase1) {
  const auto c = named(3);
  // 0 beats 1, 1 beats 2, 2 beats 0: one victory each.
  const Comparator cycle = [](const PoolCandidate& a, const PoolCandidate& b) {
    const int i = a.model_id[1] - '0', j = b.model_id[1] - '0';
    return (j - i + 3) % 3 == 1 ? 0.9 : 0.1;
  };
  const std::vector<double> phase1 = {0.2, 0.7, 0.4};
  const TournamentResult r = tournament_rank(c, phase1, cycle);
  EXPECT_EQ(r.victories, (std::vector<int>{1, 1, 1}));
  EXPECT_EQ(r.order, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Tournament, VictoriesSumToPairCount) {
  Rng rng(3);
  for (std::size_t n = 2; n <= 7; ++n) {
    const auto c = named(n);
    std::vector<double> phase1(n);
    for (double& x : phase1) x = rng.uniform();
    const Comparator noisy = [&rng](const PoolCandidate&, const PoolCandidate&) { return rng.uniform(); };
    int total = 0;
    for (int v : tournament_rank(c, phase1, noisy).victories) total += v;
    EXPECT_EQ(total, static_cast<int>(n * (n - 1) / 2));
  }
  EXPECT_THROW(tournament_rank(named(1), std::vector<double>{0.0}, nullptr), Error);
}

Corpus pair_corpus() {
  Corpus corpus;
  const std::vector<std::vector<std::string>> anns = {
      {"a man is riding a bike", "a man rides a bike"},
      {"a woman is cooking pasta", "a woman cooks"},
      {"a dog runs in the park", "the dog runs"}};
  for (std::size_t i = 0; i < anns.size(); ++i) {
    VideoRecord v = testing::random_video("v" + std::to_string(i), 3, 4, i);
    v.annotations = anns[i];
    corpus.push_back(v);
  }
  return corpus;
}

TEST(TrainingPairs, CountsFollowPoolSizes) {
  const Corpus corpus = pair_corpus();
  // Four candidates per video, no two with equal CIDEr.
  const std::vector<CandidateRecord> rows = {
      {"v0", "m1", "a man is riding a bike"}, {"v0", "m2", "a man rides"}, {"v0", "m3", "a man"},
      {"v0", "m4", "bike"},
      {"v1", "m1", "a woman is cooking pasta"}, {"v1", "m2", "a woman cooks"}, {"v1", "m3", "woman"},
      {"v1", "m4", "pasta"},
      {"v2", "m1", "a dog runs in the park"}, {"v2", "m2", "the dog runs"}, {"v2", "m3", "dog"},
      {"v2", "m4", "park"}};
  std::vector<Document> docs;
  for (const auto& v : corpus) docs.push_back(v.references());
  const IdfTable idf = build_idf(docs);
  const auto pairs = make_training_pairs(rows, corpus, idf, 0.5, 1);
  std::size_t same = 0, cross = 0;
  for (const auto& p : pairs) (p.source == PairSource::kSameVideo ? same : cross)++;
  EXPECT_EQ(same, 18u);
  EXPECT_EQ(cross, 9u);
  for (const auto& p : pairs) {
    const auto& refs = corpus[p.video_id[1] - '0'].references();
    const double sa = cider_d(p.a, refs, idf), sb = cider_d(p.b, refs, idf);
    EXPECT_EQ(p.label, sa > sb ? 1 : 0);
    EXPECT_EQ(p.swapped().label, 1 - p.label);
  }
  EXPECT_EQ(make_training_pairs(rows, corpus, idf, 0.0, 1).size(), 18u);
  const std::vector<CandidateRecord> single(rows.begin(), rows.begin() + 4);
  EXPECT_THROW(make_training_pairs(single, corpus, idf, 0.5, 1), Error);
}

TEST(TrainOracle, LearnsSeparablePairs) {
  const Corpus corpus = pair_corpus();
  std::vector<TrainingPair> pairs;
  // Good sentences describe the video, bad ones are unrelated words.
  const std::vector<std::string> good = {"a man is riding a bike", "a woman is cooking pasta", "a dog runs in the park"};
  const std::vector<std::string> bad = {"the park", "a bike", "pasta"};
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t b = 0; b < 3; ++b)
      if (b != v) pairs.push_back({"v" + std::to_string(v), tokenize(good[v]), tokenize(bad[b]), 1});
  OracleConfig cfg = tiny_config();
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.lr = 0.01;
  const TrainedOracle t = train_oracle(pairs, corpus, cfg, 5);
  EXPECT_EQ(t.log.epoch_loss.size(), 60u);
  EXPECT_LT(t.log.epoch_loss.back(), t.log.epoch_loss.front());
  EXPECT_EQ(pair_accuracy(*t.net, pairs, corpus), 1.0);
  const TrainedOracle again = train_oracle(pairs, corpus, cfg, 5);
  EXPECT_EQ(again.log.epoch_loss, t.log.epoch_loss);
}

}  // namespace
}  // namespace vcons
