#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/consensus.hpp"
#include "vcons/data.hpp"
#include "vcons/metrics.hpp"

namespace vcons {

// The four headline metrics of one system.
struct MetricRow {
  std::string name;
  double cider = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;

  static MetricRow of(std::string name, const MetricReport& r);
  nlohmann::json to_json() const;
};

struct EvaluationTable {
  std::vector<MetricRow> models;  // sorted by model_id
  MetricRow mean;
  MetricRow stdev;  // population standard deviation over models
  MetricRow best_individual;  // highest CIDEr, ties to the lower model_id
  std::vector<MetricRow> selections;  // consensus and other per-video selections, in given order
  std::size_t videos = 0;

  nlohmann::json to_json() const;
  // x100, one decimal.
  std::string to_text() const;
};

using Selection = std::map<std::string, Sentence>;  // video_id -> chosen sentence

Selection selection_of(std::span<const ConsensusRecord> rows);

// Scores every model and every named selection on the same video set. IDF comes from
// the annotations of those videos.
EvaluationTable evaluate(std::span<const CandidateRecord> candidates,
                         const std::vector<std::pair<std::string, Selection>>& selections, const Corpus& corpus,
                         const ScoreOptions& opts = {});

// Per video, the candidate with the best (or worst) CIDEr against its annotations.
Selection ground_truth_selection(const std::map<std::string, CandidatePool>& pools, const Corpus& corpus,
                                 bool worst = false, const CiderOptions& opts = {});

struct HumanAgreement {
  MetricRow mean;
  MetricRow stdev;
  MetricRow best;   // per video best annotation against the rest, averaged over videos
  MetricRow worst;
  std::size_t pairs = 0;
  std::size_t videos = 0;
  std::vector<std::string> skipped;  // videos with fewer than two annotations

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Leave-one-out: each annotation scored against the remaining annotations of its video.
HumanAgreement human_agreement(const Corpus& corpus, const ScoreOptions& opts = {});

// Spearman correlation with average ranks for ties; nullopt when either side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct VideoRanking {
  std::string video_id;
  std::vector<std::string> consensus_order;  // model_ids, phase-1 score descending
  std::vector<std::string> truth_order;      // model_ids, CIDEr vs annotations descending
  std::vector<double> consensus_scores;      // pool order
  std::vector<double> truth_scores;          // pool order
  std::optional<double> correlation;
};

struct RankReport {
  std::vector<VideoRanking> videos;
  double mean_correlation = 0.0;
  std::size_t correlated = 0;  // videos with a defined correlation

  nlohmann::json to_json() const;
  std::string to_text() const;
};

RankReport rank_diagnostics(std::span<const CandidateRecord> candidates, const Corpus& corpus,
                            const IdfTable* phase1_idf = nullptr, const ScoreOptions& opts = {});

}  // namespace vcons
