#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/text.hpp"

namespace vcons {

struct CiderOptions {
  int n_max = 4;
  double sigma = 6.0;
  // Plain CIDEr: no count clipping and no length penalty.
  bool plain = false;
};

// CIDEr-D by default. Result in [0, 10]; an empty candidate scores 0.
double cider_d(const Sentence& cand, std::span<const Sentence> refs, const IdfTable& idf,
               const CiderOptions& opts = {});

struct BleuStats {
  std::array<long, kMaxOrder> matches{};
  std::array<long, kMaxOrder> totals{};
  long cand_len = 0;
  long ref_len = 0;  // closest reference length, shorter wins ties

  BleuStats& operator+=(const BleuStats& o);
  double precision(int n) const;
};

BleuStats bleu_stats(const Sentence& cand, std::span<const Sentence> refs, int n_max = 4);

// Sentence BLEU with epsilon-smoothed zero precisions.
double bleu(const Sentence& cand, std::span<const Sentence> refs, int n_max = 4,
            double smoothing_eps = 1e-9);

// Corpus BLEU from aggregated counts, unsmoothed.
double corpus_bleu(const BleuStats& stats, int n_max = 4);

std::size_t lcs_length(const Sentence& a, const Sentence& b);

double rouge_l(const Sentence& cand, std::span<const Sentence> refs, double beta = 1.2);

struct MeteorOptions {
  double alpha = 0.9;
  double beta_frag = 3.0;
  double gamma = 0.5;
  bool stem = false;
};

// Exact-match METEOR without synonym or paraphrase modules.
double meteor_lite(const Sentence& cand, std::span<const Sentence> refs, const MeteorOptions& opts = {});

struct VideoScores {
  std::string video_id;
  double cider = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
};

struct MetricReport {
  double cider = 0.0;
  double bleu4 = 0.0;         // mean sentence-level BLEU-4
  double bleu4_corpus = 0.0;  // aggregate-count BLEU-4
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
  std::vector<VideoScores> per_video;  // sorted by video_id

  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct ScoreOptions {
  CiderOptions cider;
  MeteorOptions meteor;
  int workers = 1;
};

// IDF is built from the reference sets of all videos in `refs`.
MetricReport corpus_scores(const std::map<std::string, Sentence>& candidates,
                           const std::map<std::string, std::vector<Sentence>>& refs,
                           const ScoreOptions& opts = {});

MetricReport corpus_scores(const std::map<std::string, Sentence>& candidates,
                           const std::map<std::string, std::vector<Sentence>>& refs, const IdfTable& idf,
                           const ScoreOptions& opts = {});

}  // namespace vcons
