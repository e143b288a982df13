#include <gtest/gtest.h>

#include <algorithm>

#include "test_support.hpp"
#include "vcons/consensus.hpp"
#include "vcons/error.hpp"
#include "vcons/random.hpp"

namespace vcons {
namespace {

CandidatePool pool_of(const std::string& vid, const std::vector<std::string>& sentences) {
  std::vector<PoolCandidate> c;
  for (std::size_t i = 0; i < sentences.size(); ++i) c.push_back({"m" + std::to_string(i), tokenize(sentences[i])});
  return CandidatePool::make(vid, std::move(c));
}

std::map<std::string, CandidatePool> fixture_pools(const nlohmann::json& fx) {
  std::map<std::string, CandidatePool> pools;
  for (const auto& [vid, s] : fx["pools"].items()) pools.emplace(vid, pool_of(vid, s.get<std::vector<std::string>>()));
  return pools;
}

TEST(Phase1, MatchesOracleScores) {
  const auto fx = testing::load_fixture("metric_fixtures.json")["phase1"];
  const auto pools = fixture_pools(fx);
  const IdfTable idf = candidate_idf(pools);
  EXPECT_EQ(idf.num_docs(), 3);
  const auto scores = phase1_scores(pools.at("vid_a"), idf);
  ASSERT_TRUE(scores);
  const auto want = fx["phase1_vid_a"].get<std::vector<double>>();
  ASSERT_EQ(scores->size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR((*scores)[i], want[i], 1e-9) << i;
  const ConsensusResult r = consensus_select(pools.at("vid_a"), idf);
  EXPECT_EQ(r.selected, 0u);
  EXPECT_EQ(r.top, (std::vector<std::size_t>{0, 6, 3}));
}

TEST(Phase1, BestAgainstGroundTruth) {
  const auto fx = testing::load_fixture("metric_fixtures.json")["phase1"];
  const auto pools = fixture_pools(fx);
  const auto anns = testing::sentences(fx["annotations"].get<std::vector<std::string>>());
  std::vector<Document> docs = {anns};
  for (const auto& s : fx["gt_other_docs"]) docs.push_back({tokenize(s.get<std::string>())});
  const IdfTable idf = build_idf(docs);
  EXPECT_EQ(best_against_gt(pools.at("vid_a"), anns, idf), fx["best_index"].get<std::size_t>());
  EXPECT_EQ(best_against_gt(pools.at("vid_a"), anns, idf, true), fx["worst_index"].get<std::size_t>());
  EXPECT_THROW(best_against_gt(pools.at("vid_a"), {}, idf), Error);
}

TEST(Phase1, SingletonAndPairPools) {
  const IdfTable idf = build_idf(std::vector<Document>{{tokenize("x")}, {tokenize("y")}});
  const ConsensusResult one = consensus_select(pool_of("v", {"a man"}), idf);
  EXPECT_EQ(one.phase1, std::vector<double>{0.0});
  EXPECT_EQ(one.top, std::vector<std::size_t>{0});
  EXPECT_EQ(one.selected, 0u);
  EXPECT_FALSE(phase1_scores(pool_of("v", {"a man"}), idf));
  const ConsensusResult two = consensus_select(pool_of("v", {"a man", "a dog"}), idf);
  EXPECT_EQ(two.top.size(), 2u);
}

TEST(TopC, TiesGoToLowerIndex) {
  const std::vector<double> s = {1.0, 3.0, 3.0, 0.5, 3.0};
  EXPECT_EQ(top_c(s, 3), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(top_c(s, 10).size(), 5u);
}

TEST(Consensus, InvariantToCandidateOrder) {
  const std::vector<std::string> raw = {"a man is riding a bike", "a man rides a bike", "a dog barks",
                                        "a person is riding a bicycle", "the cat sleeps", "a man is on a bike"};
  const IdfTable idf = build_idf(std::vector<Document>{testing::sentences(raw), {tokenize("x")}});
  std::vector<PoolCandidate> cands;
  for (std::size_t i = 0; i < raw.size(); ++i) cands.push_back({"model_" + std::to_string(i), tokenize(raw[i])});
  const CandidatePool base = CandidatePool::make("v", cands);
  const auto ref = consensus_select(base, idf).to_record(base);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(cands);
    const CandidatePool shuffled = CandidatePool::make("v", cands);
    EXPECT_EQ(consensus_select(shuffled, idf).to_record(shuffled).to_json(), ref.to_json());
  }
}

TEST(Consensus, PlantedClusterWins) {
  const auto cluster = std::vector<std::string>{"a man is riding a bike", "a man rides a bike",
                                                "the man is riding the bike", "a guy is riding a bike",
                                                "there is a man riding a bike"};
  const auto outsiders = std::vector<std::string>{"green violins hum", "marble orbit tundra", "velvet ember"};
  Rng rng(9);
  std::map<std::string, CandidatePool> pools;
  for (int t = 0; t < 30; ++t) {
    std::vector<std::string> all = cluster;
    all.insert(all.end(), outsiders.begin(), outsiders.end());
    rng.shuffle(all);
    pools.emplace("v" + std::to_string(t), pool_of("v" + std::to_string(t), all));
  }
  pools.emplace("other", pool_of("other", {"a woman cooks", "x y z"}));
  const IdfTable idf = candidate_idf(pools);
  for (const auto& [vid, pool] : pools) {
    if (vid == "other") continue;
    const auto r = consensus_select(pool, idf);
    const std::string chosen = pool.candidates[r.selected].sentence.str();
    EXPECT_NE(std::find(cluster.begin(), cluster.end(), chosen), cluster.end()) << chosen;
  }
}

TEST(Consensus, OracleReordersTopC) {
  const CandidatePool pool = pool_of("v", {"a man rides a bike", "a man is riding a bike", "a man on bike", "zzz"});
  const IdfTable idf = build_idf(std::vector<Document>{pool.sentences(), {tokenize("q")}});
  // Prefers the shortest sentence.
  const Comparator shortest = [](const PoolCandidate& a, const PoolCandidate& b) {
    return a.sentence.size() < b.sentence.size() ? 0.9 : (a.sentence.size() > b.sentence.size() ? 0.1 : 0.5);
  };
  const ConsensusResult r = consensus_select(pool, idf, &shortest);
  ASSERT_TRUE(r.oracle_ranking);
  EXPECT_EQ(r.oracle_ranking->size(), 3u);
  EXPECT_EQ(pool.candidates[r.selected].sentence.str(), "a man on bike");
  int total = 0;
  for (int v : *r.victories) total += v;
  EXPECT_EQ(total, 3);
  const ConsensusRecord rec = r.to_record(pool);
  EXPECT_TRUE(rec.oracle_order);
  EXPECT_EQ(rec.selected, "a man on bike");
}

TEST(GroupPools, SortsByModelAndRejectsDuplicates) {
  const std::vector<CandidateRecord> rows = {{"v", "m2", "b"}, {"v", "m1", "a"}, {"w", "m1", "c"}};
  const auto pools = group_pools(rows);
  EXPECT_EQ(pools.at("v").candidates[0].model_id, "m1");
  const std::vector<CandidateRecord> dup = {{"v", "m1", "b"}, {"v", "m1", "a"}};
  EXPECT_THROW(group_pools(dup), Error);
}

}  // namespace
}  // namespace vcons
