#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcons/data.hpp"
#include "vcons/metrics.hpp"
#include "vcons/text.hpp"

namespace vcons {

struct PoolCandidate {
  std::string model_id;
  Sentence sentence;
};

// Candidates for one video, sorted by model_id (so index order is model_id order).
struct CandidatePool {
  std::string video_id;
  std::vector<PoolCandidate> candidates;

  static CandidatePool make(std::string video_id, std::vector<PoolCandidate> candidates);
  std::size_t size() const { return candidates.size(); }
  std::vector<Sentence> sentences() const;
};

std::map<std::string, CandidatePool> group_pools(std::span<const CandidateRecord> rows);

// One document per pool: the default phase-1 IDF corpus.
IdfTable candidate_idf(const std::map<std::string, CandidatePool>& pools);

// CIDEr of each candidate against all other candidates of the pool.
// Empty when the pool has fewer than two candidates.
std::optional<std::vector<double>> phase1_scores(const CandidatePool& pool, const IdfTable& idf,
                                                 const CiderOptions& opts = {});

// Indices of the min(c, n) best scores, descending; ties go to the lower index.
std::vector<std::size_t> top_c(std::span<const double> scores, int c = 3);

// Probability that `a` is a better description than `b`.
using Comparator = std::function<double(const PoolCandidate& a, const PoolCandidate& b)>;

struct ConsensusResult {
  std::vector<double> phase1;
  std::vector<std::size_t> top;
  std::optional<std::vector<std::size_t>> oracle_ranking;
  std::optional<std::vector<int>> victories;  // parallel to oracle_ranking
  std::size_t selected = 0;

  ConsensusRecord to_record(const CandidatePool& pool) const;
};

struct ConsensusOptions {
  int c = 3;
  CiderOptions cider;
};

ConsensusResult consensus_select(const CandidatePool& pool, const IdfTable& idf, const Comparator* oracle = nullptr,
                                 const ConsensusOptions& opts = {});

// Upper-bound diagnostic: the candidate with the highest (or lowest) CIDEr against
// the human annotations. Ties go to the lower model_id.
std::size_t best_against_gt(const CandidatePool& pool, std::span<const Sentence> annotations, const IdfTable& idf,
                            bool worst = false, const CiderOptions& opts = {});

}  // namespace vcons
