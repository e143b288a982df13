#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/consensus.hpp"
#include "vcons/data.hpp"
#include "vcons/nn/ops.hpp"
#include "vcons/nn/param_set.hpp"
#include "vcons/random.hpp"
#include "vcons/vocab.hpp"

namespace vcons {

enum class Arch { kSeq2Seq, kSeq2SeqAttn, kTwoWings, kTwoStage, kTcn };

std::string arch_name(Arch a);
Arch parse_arch(const std::string& s);
const std::vector<Arch>& all_archs();

struct TcnSpec {
  int blocks = 2;  // dilation 1, 2, 4, ...
  int channels = 64;

  // Output length after all blocks for an input of `steps` frames, or -1 when too short.
  long output_length(long steps) const;
};

struct ModelConfig {
  Arch arch = Arch::kSeq2Seq;
  int hidden = 64;  // encoder hidden size, also the video embedding size
  int embed = 32;
  int max_len = 16;
  int top_k = 10;  // two_stage labels passed to the second stage
  int label_threshold = 5;
  TcnSpec tcn;
  std::vector<std::string> extra_features;

  // Training schedule.
  int epochs = 12;
  int batch_size = 16;
  int samples_per_video = 4;
  double lr = 1e-3;
  double min_lr = 1e-5;
  int patience = 2;
  int text_steps = 1;    // two_wings: reconstruction steps per cycle
  int vision_steps = 1;  // two_wings: captioning steps per cycle
  double label_drop = 0.1;
  double label_add = 0.1;
  std::string text_corpus;  // optional plain-text sentence file for two_wings
  std::uint64_t seed = 1;

  // Filled from the corpus at training time.
  int feature_dim = 0;
  std::map<std::string, int> extra_dims;

  int extra_total() const;
  int video_embedding() const { return arch == Arch::kTcn ? tcn.channels : hidden; }
  int decoder_hidden() const { return video_embedding() + extra_total(); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Frames and extra features of a batch of videos with equal frame count.
struct VideoBatch {
  std::size_t size = 0;
  std::size_t steps = 0;
  std::vector<nn::Tensor> step_frames;  // steps x [B, F]
  nn::Tensor frames;                    // [B, T, F]
  nn::Tensor extras;                    // [B, extra_total] or empty
};

VideoBatch make_video_batch(std::span<const VideoRecord* const> videos, const ModelConfig& cfg);

class CaptionModel {
 public:
  CaptionModel(ModelConfig config, Vocabulary vocab, LabelVocabulary labels = {});

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const LabelVocabulary& labels() const { return labels_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  // Greedy caption. Reads parameters only.
  Sentence caption(const VideoRecord& video) const;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  LabelVocabulary labels_;
  nn::ParamSet params_;
};

void init_params(nn::ParamSet& params, const ModelConfig& cfg, int vocab_size, int num_labels, Rng& rng);

// ---- encoders -----------------------------------------------------------------

// Last LSTM state (or attention-pooled states) with extra features appended: [B, decoder_hidden].
nn::Var encode_seq2seq(nn::Tape& tape, nn::ParamSet& params, const VideoBatch& batch, bool attention);

// Stacked dilated residual blocks; [B, channels] with extra features appended.
nn::Var tcn_encode(nn::Tape& tape, nn::ParamSet& params, const VideoBatch& batch, const TcnSpec& spec,
                   nn::Mode mode);

// Masked LSTM over a ragged batch of input vectors; returns each row's final hidden state.
nn::Var run_lstm(nn::Tape& tape, const nn::LstmWeights& w, const std::vector<nn::Var>& inputs,
                 const std::vector<std::size_t>& lengths, std::size_t hidden);

// Text-wing encoder over (unordered) word ids, padded with zeros for the extra features.
nn::Var encode_words(nn::Tape& tape, nn::ParamSet& params, const ModelConfig& cfg,
                     const std::vector<std::vector<int>>& words);

// ---- decoder ------------------------------------------------------------------

struct TeacherForced {
  std::vector<nn::Var> logits;  // one [B, V] per target position
  nn::Var loss;                 // mean cross-entropy over real target tokens
};

// Targets are token ids without markers; an end token is appended to each.
TeacherForced decode_teacher_forced(nn::Tape& tape, nn::ParamSet& params, nn::Var encoding,
                                    const std::vector<std::vector<int>>& targets);

struct GreedyResult {
  std::vector<int> tokens;      // without the end token
  std::vector<nn::Tensor> logits;  // per generated step, [1, V]
};

GreedyResult decode_greedy(nn::Tape& tape, nn::ParamSet& params, nn::Var encoding, int max_len);

// ---- two-wings ----------------------------------------------------------------

// ceil(|s| * keep_ratio) words sampled without replacement, then shuffled.
std::vector<std::string> corrupt_sentence(const Sentence& s, Rng& rng, double keep_ratio = 0.5);

struct TwoWingsLosses {
  std::vector<double> text;
  std::vector<double> vision;
};

struct TextExample {
  std::vector<int> words;   // corrupted input
  std::vector<int> target;  // original sentence
};

struct VisionExample {
  const VideoRecord* video = nullptr;
  std::vector<int> target;
};

// One alternation cycle: cfg.text_steps reconstruction steps then cfg.vision_steps captioning
// steps, all updating one shared decoder. Batches are consumed in order.
TwoWingsLosses two_wings_train_step(nn::ParamSet& params, const ModelConfig& cfg,
                                    const std::vector<std::vector<VisionExample>>& vision_batches,
                                    const std::vector<std::vector<TextExample>>& text_batches,
                                    const nn::AdamOptions& adam, bool freeze_vision = false);

// ---- two-stage ----------------------------------------------------------------

nn::Var label_logits(nn::Tape& tape, nn::ParamSet& params, const VideoBatch& batch);

struct LabelScore {
  int label = 0;
  double probability = 0.0;
};

// Top-K by probability, ties by label index.
std::vector<LabelScore> top_k_labels(std::span<const double> probs, int k);
std::vector<LabelScore> predict_word_labels(const CaptionModel& model, const VideoRecord& video, int k);

// L_j = p_j * E(label_j) for the chosen label of every row: K tensors of [B, E].
std::vector<nn::Var> soft_label_embedding(nn::Var probs, nn::Var label_table,
                                          const std::vector<std::vector<int>>& top_labels);

// Second-stage encoder over a label-embedding sequence, extra features appended.
nn::Var encode_label_sequence(nn::Tape& tape, nn::ParamSet& params, const ModelConfig& cfg,
                              const std::vector<nn::Var>& sequence, const VideoBatch& batch);

// Full differentiable path video -> labels -> soft embeddings -> encoding.
nn::Var encode_two_stage(nn::Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch);

// ---- shared entry points --------------------------------------------------------

nn::Var encode_video(nn::Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch,
                     nn::Mode mode);

// Teacher-forced caption loss of the video pathway of any architecture.
nn::Var caption_loss(nn::Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch,
                     const std::vector<std::vector<int>>& targets, nn::Mode mode);

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  int lr_decays = 0;
  nlohmann::json to_json() const;
};

struct TrainedModel {
  std::unique_ptr<CaptionModel> model;
  TrainingLog log;
};

TrainedModel train_model(ModelConfig cfg, const Corpus& corpus, std::uint64_t seed);

// Adam on a single (video, caption) pair until the loss drops below `target_loss`.
struct OverfitResult {
  int steps = 0;
  double final_loss = 0.0;
};
OverfitResult overfit_example(CaptionModel& model, const VideoRecord& video, const Sentence& target, int max_steps,
                              double target_loss, double lr = 1e-3);

// Plateau schedule: divides lr by 10 after `patience` epochs without improvement, never below min_lr.
class LrSchedule {
 public:
  LrSchedule(double lr, double min_lr, int patience) : lr_(lr), min_lr_(min_lr), patience_(patience) {}
  double lr() const { return lr_; }
  int decays() const { return decays_; }
  // Returns true when the rate was decayed.
  bool observe(double val_loss);

 private:
  double lr_;
  double min_lr_;
  int patience_;
  double best_ = INFINITY;
  int bad_epochs_ = 0;
  int decays_ = 0;
};

struct NamedModel {
  std::string model_id;
  const CaptionModel* model = nullptr;
};


CandidatePool generate_pool(std::span<const NamedModel> models, const VideoRecord& video);

}  // namespace vcons
