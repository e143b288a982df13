#include "vcons/consensus.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "vcons/error.hpp"
#include "vcons/oracle.hpp"

namespace vcons {

CandidatePool CandidatePool::make(std::string video_id, std::vector<PoolCandidate> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const PoolCandidate& a, const PoolCandidate& b) { return a.model_id < b.model_id; });
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i].model_id == candidates[i - 1].model_id)
      fail(ErrorKind::kData, "video " + video_id + ": duplicate model_id " + candidates[i].model_id);
  return {std::move(video_id), std::move(candidates)};
}

std::vector<Sentence> CandidatePool::sentences() const {
  std::vector<Sentence> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.sentence);
  return out;
}

std::map<std::string, CandidatePool> group_pools(std::span<const CandidateRecord> rows) {
  std::map<std::string, std::vector<PoolCandidate>> grouped;
  for (const auto& r : rows) grouped[r.video_id].push_back({r.model_id, tokenize(r.sentence)});
  std::map<std::string, CandidatePool> pools;
  for (auto& [id, cands] : grouped) pools.emplace(id, CandidatePool::make(id, std::move(cands)));
  return pools;
}

IdfTable candidate_idf(const std::map<std::string, CandidatePool>& pools) {
  std::vector<Document> docs;
  for (const auto& [id, pool] : pools) docs.push_back(pool.sentences());
  return build_idf(docs);
}

std::optional<std::vector<double>> phase1_scores(const CandidatePool& pool, const IdfTable& idf,
                                                 const CiderOptions& opts) {
  const std::size_t n = pool.size();
  if (n < 2) return std::nullopt;
  std::vector<double> scores(n);
  std::vector<Sentence> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(pool.candidates[j].sentence);
    scores[i] = cider_d(pool.candidates[i].sentence, others, idf, opts);
  }
  return scores;
}

std::vector<std::size_t> top_c(std::span<const double> scores, int c) {
  if (c < 1) fail(ErrorKind::kUsage, "C must be at least 1");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(c)));
  return idx;
}

ConsensusRecord ConsensusResult::to_record(const CandidatePool& pool) const {
  ConsensusRecord r;
  r.video_id = pool.video_id;
  r.selected = pool.candidates.at(selected).sentence.str();
  r.selected_model = pool.candidates[selected].model_id;
  for (const auto& c : pool.candidates) r.pool_models.push_back(c.model_id);
  r.phase1 = phase1;
  for (std::size_t i : top) r.top_c.push_back(pool.candidates[i].model_id);
  if (oracle_ranking) {
    r.oracle_order.emplace();
    for (std::size_t i : *oracle_ranking) r.oracle_order->push_back(pool.candidates[i].model_id);
  }
  return r;
}

ConsensusResult consensus_select(const CandidatePool& pool, const IdfTable& idf, const Comparator* oracle,
                                 const ConsensusOptions& opts) {
  if (pool.size() == 0) fail(ErrorKind::kData, "video " + pool.video_id + ": empty candidate pool");
  ConsensusResult res;
  auto scores = phase1_scores(pool, idf, opts.cider);
  if (!scores) {
    res.phase1 = {0.0};
    res.top = {0};
    res.selected = 0;
    return res;
  }
  res.phase1 = std::move(*scores);
  res.top = top_c(res.phase1, opts.c);
  res.selected = res.top.front();
  if (oracle && res.top.size() >= 2) {
    std::vector<PoolCandidate> cands;
    std::vector<double> p1;
    for (std::size_t i : res.top) {
      cands.push_back(pool.candidates[i]);
      p1.push_back(res.phase1[i]);
    }
    TournamentResult t = tournament_rank(cands, p1, *oracle);
    res.oracle_ranking.emplace();
    for (std::size_t k : t.order) res.oracle_ranking->push_back(res.top[k]);
    res.victories = t.victories;
    res.selected = res.oracle_ranking->front();
  }
  return res;
}

std::size_t best_against_gt(const CandidatePool& pool, std::span<const Sentence> annotations, const IdfTable& idf,
                            bool worst, const CiderOptions& opts) {
  if (annotations.empty()) fail(ErrorKind::kMissingReference, "video " + pool.video_id + " has no annotations");
  if (pool.size() == 0) fail(ErrorKind::kData, "video " + pool.video_id + ": empty candidate pool");
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double s = cider_d(pool.candidates[i].sentence, annotations, idf, opts);
    if (i == 0 || (worst ? s < best_score : s > best_score)) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace vcons
