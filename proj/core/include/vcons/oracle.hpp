#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/consensus.hpp"
#include "vcons/data.hpp"
#include "vcons/nn/ops.hpp"
#include "vcons/nn/param_set.hpp"
#include "vcons/vocab.hpp"

namespace vcons {

struct OracleConfig {
  int embed = 64;
  int hidden = 128;
  int video_proj = 128;
  int fc1 = 256;
  int fc2 = 64;
  int epochs = 6;
  int batch_size = 32;
  double lr = 1e-3;
  double cross_ratio = 0.5;
  std::size_t max_pairs = 0;  // 0 keeps every pair
  std::uint64_t seed = 1;
  int feature_dim = 0;

  nlohmann::json to_json() const;
  static OracleConfig from_json(const nlohmann::json& j);
};

// Mean over frames: [N_fe].
nn::Tensor video_embed(const VideoRecord& video);

class OracleNet {
 public:
  OracleNet(OracleConfig config, Vocabulary vocab);

  const OracleConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  // Raw network output f(A, B) in (0, 1).
  double raw(const VideoRecord& video, const Sentence& a, const Sentence& b) const;
  // Symmetrized probability that `a` beats `b`: compare(a, b) + compare(b, a) == 1 exactly.
  double compare(const VideoRecord& video, const Sentence& a, const Sentence& b) const;

  std::vector<int> encode(const Sentence& s) const;

 private:
  OracleConfig config_;
  Vocabulary vocab_;
  nn::ParamSet params_;
};

// Logits [B, 1] for a batch of (video embedding, sentence A, sentence B) rows.
nn::Var oracle_logits(nn::Tape& tape, const nn::ParamSet& params, const nn::Tensor& videos,
                      const std::vector<std::vector<int>>& a, const std::vector<std::vector<int>>& b);

enum class PairSource { kSameVideo, kCrossVideo };

struct TrainingPair {
  std::string video_id;
  Sentence a;
  Sentence b;
  int label = 0;  // 1 when a has the higher CIDEr against the video's annotations
  PairSource source = PairSource::kSameVideo;

  TrainingPair swapped() const { return {video_id, b, a, 1 - label, source}; }
};

std::vector<TrainingPair> make_training_pairs(std::span<const CandidateRecord> candidates, const Corpus& corpus,
                                              const IdfTable& idf, double cross_ratio, std::uint64_t seed);

struct OracleTrainLog {
  std::vector<double> epoch_loss;
  long steps = 0;
};

struct TrainedOracle {
  std::unique_ptr<OracleNet> net;
  OracleTrainLog log;
};

TrainedOracle train_oracle(std::span<const TrainingPair> pairs, const Corpus& corpus, OracleConfig cfg,
                           std::uint64_t seed);

// Fraction of pairs whose label agrees with compare() > 0.5; exact 0.5 counts as wrong.
double pair_accuracy(const OracleNet& net, std::span<const TrainingPair> pairs, const Corpus& corpus);

struct TournamentResult {
  std::vector<std::size_t> order;  // indices into the input
  std::vector<int> victories;      // parallel to order
};

// Round-robin over 2..C candidates. Victory to p > 0.5; p == 0.5 goes to the better
// phase-1 score, then the lower model_id. Ranked by victories, phase-1 score, model_id.
TournamentResult tournament_rank(std::span<const PoolCandidate> candidates, std::span<const double> phase1,
                                 const Comparator& compare);

Comparator make_comparator(const OracleNet& net, const VideoRecord& video);

nlohmann::json oracle_to_json(const OracleNet& net);
std::unique_ptr<OracleNet> oracle_from_json(const nlohmann::json& j);
void save_oracle(const OracleNet& net, const std::string& path);
std::unique_ptr<OracleNet> load_oracle(const std::string& path);

}  // namespace vcons
