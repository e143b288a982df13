#include <algorithm>
#include <cmath>
#include <fstream>

#include "vcons/error.hpp"
#include "vcons/models.hpp"

namespace vcons {

using nn::Mode;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

struct Example {
  const VideoRecord* video = nullptr;
  Sentence sentence;
  std::vector<int> target;
};

using Batch = std::vector<const Example*>;

// Groups examples by frame count, then cuts into batches in a seeded order.
std::vector<Batch> make_batches(const std::vector<Example>& examples, int batch_size, Rng& rng) {
  std::vector<const Example*> order;
  for (const auto& e : examples) order.push_back(&e);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [](const Example* a, const Example* b) {
    return a->video->num_frames() < b->video->num_frames();
  });
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size();) {
    Batch b;
    const std::size_t steps = order[i]->video->num_frames();
    while (i < order.size() && b.size() < static_cast<std::size_t>(batch_size) &&
           order[i]->video->num_frames() == steps)
      b.push_back(order[i++]);
    batches.push_back(std::move(b));
  }
  rng.shuffle(batches);
  return batches;
}

VideoBatch video_batch(const Batch& b, const ModelConfig& cfg) {
  std::vector<const VideoRecord*> videos;
  for (const auto* e : b) videos.push_back(e->video);
  return make_video_batch(videos, cfg);
}

std::vector<std::vector<int>> batch_targets(const Batch& b) {
  std::vector<std::vector<int>> t;
  for (const auto* e : b) t.push_back(e->target);
  return t;
}

Tensor label_targets(const Batch& b, const LabelVocabulary& labels) {
  Tensor t({b.size(), static_cast<std::size_t>(labels.size())});
  for (std::size_t r = 0; r < b.size(); ++r)
    for (int l : labels.labels_of(b[r]->sentence)) t.at(r, l) = 1.0;
  return t;
}

// Ideal second-stage input: the sentence's labels with random drop/add noise at p = 1,
// padded to K with zero-probability slots.
Var ideal_label_loss(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const LabelVocabulary& labels,
                     const Batch& b, Rng* noise) {
  const int nl = labels.size();
  const int k = std::min(cfg.top_k, nl);
  Tensor probs({b.size(), static_cast<std::size_t>(nl)});
  std::vector<std::vector<int>> top(b.size());
  for (std::size_t r = 0; r < b.size(); ++r) {
    std::vector<int> chosen;
    for (int l : labels.labels_of(b[r]->sentence))
      if (!noise || !noise->bernoulli(cfg.label_drop)) chosen.push_back(l);
    if (noise) {
      const int slots = k - static_cast<int>(chosen.size());
      for (int s = 0; s < slots; ++s) {
        if (!noise->bernoulli(cfg.label_add)) continue;
        const int l = static_cast<int>(noise->below(nl));
        if (std::find(chosen.begin(), chosen.end(), l) == chosen.end()) chosen.push_back(l);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    if (static_cast<int>(chosen.size()) > k) chosen.resize(k);
    for (int l : chosen) probs.at(r, l) = 1.0;
    top[r] = chosen;
    for (int l = 0; static_cast<int>(top[r].size()) < k; ++l)
      if (probs.at(r, l) == 0.0) top[r].push_back(l);
  }
  VideoBatch vb = video_batch(b, cfg);
  auto seq = soft_label_embedding(tape.constant(probs), tape.param(params, "labels.embed"), top);
  Var enc = encode_label_sequence(tape, params, cfg, seq, vb);
  return decode_teacher_forced(tape, params, enc, batch_targets(b)).loss;
}

enum class Phase { kCaption, kLabels, kIdealLabels };

Var phase_loss(Phase phase, Tape& tape, CaptionModel& model, const Batch& b, Mode mode, Rng* noise) {
  const ModelConfig& cfg = model.config();
  switch (phase) {
    case Phase::kLabels: {
      VideoBatch vb = video_batch(b, cfg);
      return nn::sigmoid_bce(label_logits(tape, model.params(), vb), label_targets(b, model.labels()));
    }
    case Phase::kIdealLabels:
      return ideal_label_loss(tape, model.params(), cfg, model.labels(), b, noise);
    case Phase::kCaption:
      break;
  }
  VideoBatch vb = video_batch(b, cfg);
  return caption_loss(tape, model.params(), cfg, vb, batch_targets(b), mode);
}

std::vector<Sentence> read_text_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kUsage, "cannot open text corpus " + path);
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    Sentence s = tokenize(line);
    if (s.empty()) continue;
    if (s.size() > 20) s.tokens.resize(20);
    out.push_back(std::move(s));
  }
  return out;
}

Example make_example(const VideoRecord* v, const Sentence& s, const Vocabulary& vocab) {
  return {v, s, vocab.encode(s)};
}

}  // namespace

TrainedModel train_model(ModelConfig cfg, const Corpus& corpus, std::uint64_t seed) {
  cfg.seed = seed;
  auto train = select_split(corpus, Split::kTrain);
  std::erase_if(train, [](const VideoRecord* v) { return v->annotations.empty(); });
  if (train.empty()) fail(ErrorKind::kData, "corpus has no annotated train split");
  auto val = select_split(corpus, Split::kVal);
  std::erase_if(val, [](const VideoRecord* v) { return v->annotations.empty(); });
  if (val.empty()) val.assign(train.begin(), train.begin() + std::min<std::size_t>(train.size(), 20));

  cfg.feature_dim = static_cast<int>(train[0]->feature_dim());
  cfg.extra_dims.clear();
  for (const auto& name : cfg.extra_features) {
    auto it = train[0]->extra_features.find(name);
    if (it == train[0]->extra_features.end())
      fail(ErrorKind::kData, "video " + train[0]->video_id + " lacks extra feature '" + name + "'");
    cfg.extra_dims[name] = static_cast<int>(it->second.size());
  }

  std::vector<Sentence> sentences;
  std::vector<std::vector<Sentence>> refs(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    refs[i] = train[i]->references();
    sentences.insert(sentences.end(), refs[i].begin(), refs[i].end());
  }
  std::vector<Sentence> text_corpus;
  if (cfg.arch == Arch::kTwoWings) {
    text_corpus = sentences;
    if (!cfg.text_corpus.empty()) {
      auto extra = read_text_corpus(cfg.text_corpus);
      text_corpus.insert(text_corpus.end(), extra.begin(), extra.end());
    }
    if (text_corpus.empty()) fail(ErrorKind::kUsage, "two_wings needs a non-empty text corpus");
  }

  Vocabulary vocab = Vocabulary::build(sentences);
  LabelVocabulary labels;
  if (cfg.arch == Arch::kTwoStage) {
    labels = LabelVocabulary::build(sentences, cfg.label_threshold);
    if (labels.size() == 0) fail(ErrorKind::kData, "no word labels reach the frequency threshold");
  }
  TrainedModel out;
  out.model = std::make_unique<CaptionModel>(cfg, vocab, labels);
  CaptionModel& model = *out.model;
  Rng rng = Rng(seed).fork(0x7472);

  std::vector<Example> val_examples;
  for (const auto* v : val) {
    auto r = v->references();
    for (std::size_t i = 0; i < std::min<std::size_t>(r.size(), 2); ++i)
      val_examples.push_back(make_example(v, r[i], vocab));
  }
  Rng val_rng(seed);
  const auto val_batches = make_batches(val_examples, cfg.batch_size, val_rng);

  struct PhasePlan {
    Phase phase;
    const char* name;
    int epochs;
  };
  std::vector<PhasePlan> plan;
  if (cfg.arch == Arch::kTwoStage) {
    const int quarter = std::max(1, cfg.epochs / 4);
    plan = {{Phase::kLabels, "stage1", quarter},
            {Phase::kIdealLabels, "stage2", quarter},
            {Phase::kCaption, "finetune", std::max(1, cfg.epochs - 2 * quarter)}};
  } else {
    plan = {{Phase::kCaption, "caption", cfg.epochs}};
  }

  long step = 0;
  int epoch_index = 0;
  for (const auto& ph : plan) {
    LrSchedule schedule(cfg.lr, cfg.min_lr, cfg.patience);
    for (int epoch = 0; epoch < ph.epochs; ++epoch, ++epoch_index) {
      std::vector<Example> examples;
      for (std::size_t i = 0; i < train.size(); ++i)
        for (int s = 0; s < cfg.samples_per_video; ++s)
          examples.push_back(make_example(train[i], refs[i][rng.below(refs[i].size())], vocab));
      const auto batches = make_batches(examples, cfg.batch_size, rng);
      nn::AdamOptions adam;
      adam.lr = schedule.lr();
      double total = 0.0;
      std::size_t count = 0;
      for (const auto& b : batches) {
        try {
          if (cfg.arch == Arch::kTwoWings) {
            std::vector<std::vector<TextExample>> text(std::max(cfg.text_steps, 0));
            for (auto& tb : text) {
              for (std::size_t r = 0; r < b.size(); ++r) {
                const Sentence& s = text_corpus[rng.below(text_corpus.size())];
                std::vector<std::string> words = corrupt_sentence(s, rng);
                tb.push_back({vocab.encode(Sentence{words}), vocab.encode(s)});
              }
            }
            std::vector<std::vector<VisionExample>> vision(std::max(cfg.vision_steps, 0));
            for (auto& vbatch : vision)
              for (const auto* e : b) vbatch.push_back({e->video, e->target});
            TwoWingsLosses l = two_wings_train_step(model.params(), cfg, vision, text, adam);
            for (double x : l.vision) total += x, ++count;
            step += static_cast<long>(l.text.size() + l.vision.size());
            continue;
          }
          Tape tape;
          Var loss = phase_loss(ph.phase, tape, model, b, Mode::kTrain, &rng);
          tape.backward(loss);
          model.params().adam_step(tape.param_grads(), adam);
          total += loss.value().item();
          ++count;
          ++step;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNumeric) throw;
          fail(ErrorKind::kNumeric, "training diverged at step " + std::to_string(step) + ": " + e.what());
        }
      }
      double val_loss = 0.0;
      std::size_t val_rows = 0;
      for (const auto& b : val_batches) {
        Tape tape;
        val_loss += phase_loss(ph.phase, tape, model, b, Mode::kEval, nullptr).value().item() * double(b.size());
        val_rows += b.size();
      }
      val_loss /= double(std::max<std::size_t>(val_rows, 1));
      out.log.epochs.push_back({epoch_index, ph.name, count ? total / double(count) : 0.0, val_loss, schedule.lr()});
      schedule.observe(val_loss);
    }
    out.log.lr_decays += schedule.decays();
  }
  return out;
}

}  // namespace vcons
