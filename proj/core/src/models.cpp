#include "vcons/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcons/error.hpp"

namespace vcons {

using nn::Mode;
using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;
using json = nlohmann::json;

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::kSeq2Seq: return "seq2seq";
    case Arch::kSeq2SeqAttn: return "seq2seq_attn";
    case Arch::kTwoWings: return "two_wings";
    case Arch::kTwoStage: return "two_stage";
    case Arch::kTcn: return "tcn";
  }
  return "?";
}

Arch parse_arch(const std::string& s) {
  for (Arch a : all_archs())
    if (arch_name(a) == s) return a;
  fail(ErrorKind::kUsage, "unknown architecture '" + s + "'");
}

const std::vector<Arch>& all_archs() {
  static const std::vector<Arch> archs = {Arch::kSeq2Seq, Arch::kSeq2SeqAttn, Arch::kTwoWings, Arch::kTwoStage,
                                          Arch::kTcn};
  return archs;
}

long TcnSpec::output_length(long steps) const {
  long len = steps;
  for (int i = 0; i < blocks; ++i) {
    len -= 4L << i;
    if (len < 1) return -1;
  }
  return len;
}

int ModelConfig::extra_total() const {
  int total = 0;
  for (const auto& name : extra_features) {
    auto it = extra_dims.find(name);
    if (it != extra_dims.end()) total += it->second;
  }
  return total;
}

json ModelConfig::to_json() const {
  return json{{"arch", arch_name(arch)},
              {"hidden", hidden},
              {"embed", embed},
              {"max_len", max_len},
              {"top_k", top_k},
              {"label_threshold", label_threshold},
              {"tcn", {{"blocks", tcn.blocks}, {"channels", tcn.channels}}},
              {"extra_features", extra_features},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"samples_per_video", samples_per_video},
              {"lr", lr},
              {"min_lr", min_lr},
              {"patience", patience},
              {"text_steps", text_steps},
              {"vision_steps", vision_steps},
              {"label_drop", label_drop},
              {"label_add", label_add},
              {"text_corpus", text_corpus},
              {"seed", seed},
              {"feature_dim", feature_dim},
              {"extra_dims", extra_dims}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
    c.hidden = j.value("hidden", c.hidden);
    c.embed = j.value("embed", c.embed);
    c.max_len = j.value("max_len", c.max_len);
    c.top_k = j.value("top_k", c.top_k);
    c.label_threshold = j.value("label_threshold", c.label_threshold);
    if (j.contains("tcn")) {
      c.tcn.blocks = j.at("tcn").value("blocks", c.tcn.blocks);
      c.tcn.channels = j.at("tcn").value("channels", c.tcn.channels);
    }
    c.extra_features = j.value("extra_features", c.extra_features);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.samples_per_video = j.value("samples_per_video", c.samples_per_video);
    c.lr = j.value("lr", c.lr);
    c.min_lr = j.value("min_lr", c.min_lr);
    c.patience = j.value("patience", c.patience);
    c.text_steps = j.value("text_steps", c.text_steps);
    c.vision_steps = j.value("vision_steps", c.vision_steps);
    c.label_drop = j.value("label_drop", c.label_drop);
    c.label_add = j.value("label_add", c.label_add);
    c.text_corpus = j.value("text_corpus", c.text_corpus);
    c.seed = j.value("seed", c.seed);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.extra_dims = j.value("extra_dims", c.extra_dims);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad model config: ") + e.what());
  }
  if (c.hidden < 1 || c.embed < 1 || c.batch_size < 1 || c.samples_per_video < 1 || c.epochs < 0)
    fail(ErrorKind::kUsage, "model config sizes must be positive");
  if (c.max_len < 1) fail(ErrorKind::kUsage, "max_len must be at least 1");
  if (c.top_k < 1) fail(ErrorKind::kUsage, "top_k must be at least 1");
  if (c.tcn.blocks < 1 || c.tcn.channels < 1) fail(ErrorKind::kUsage, "tcn blocks and channels must be positive");
  if (!(c.lr > 0) || !(c.min_lr > 0)) fail(ErrorKind::kUsage, "learning rates must be positive");
  return c;
}

VideoBatch make_video_batch(std::span<const VideoRecord* const> videos, const ModelConfig& cfg) {
  if (videos.empty()) fail(ErrorKind::kData, "empty video batch");
  VideoBatch b;
  b.size = videos.size();
  b.steps = videos[0]->num_frames();
  const std::size_t f = videos[0]->feature_dim();
  if (cfg.feature_dim > 0 && f != static_cast<std::size_t>(cfg.feature_dim))
    fail(ErrorKind::kShape, "video " + videos[0]->video_id + ": frame feature dim " + std::to_string(f) +
                                " does not match model dim " + std::to_string(cfg.feature_dim));
  for (const auto* v : videos) {
    if (v->num_frames() != b.steps || v->feature_dim() != f)
      fail(ErrorKind::kShape, "video " + v->video_id + ": frame shape differs within batch");
  }
  if (b.steps == 0) fail(ErrorKind::kData, "video " + videos[0]->video_id + " has no frames");
  b.frames = Tensor({b.size, b.steps, f});
  b.step_frames.assign(b.steps, Tensor({b.size, f}));
  for (std::size_t i = 0; i < b.size; ++i) {
    const double* src = videos[i]->frames.ptr();
    std::copy(src, src + b.steps * f, b.frames.ptr() + i * b.steps * f);
    for (std::size_t t = 0; t < b.steps; ++t) std::copy(src + t * f, src + (t + 1) * f, b.step_frames[t].ptr() + i * f);
  }
  const int extra = cfg.extra_total();
  if (!cfg.extra_features.empty()) {
    b.extras = Tensor({b.size, static_cast<std::size_t>(extra)});
    for (std::size_t i = 0; i < b.size; ++i) {
      std::size_t col = 0;
      for (const auto& name : cfg.extra_features) {
        auto it = videos[i]->extra_features.find(name);
        if (it == videos[i]->extra_features.end())
          fail(ErrorKind::kData, "video " + videos[i]->video_id + " lacks extra feature '" + name + "'");
        auto dim = cfg.extra_dims.find(name);
        if (dim == cfg.extra_dims.end() || it->second.size() != static_cast<std::size_t>(dim->second))
          fail(ErrorKind::kShape, "video " + videos[i]->video_id + ": extra feature '" + name + "' has dim " +
                                      std::to_string(it->second.size()));
        for (double x : it->second) b.extras.at(i, col++) = x;
      }
    }
  }
  return b;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

void add_lstm(nn::ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  params.add(prefix + ".w", uniform_tensor({in + hidden, 4 * hidden}, 1.0 / std::sqrt(double(hidden)), rng));
  Tensor b({4 * hidden});
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
  params.add(prefix + ".b", std::move(b));
}

void add_dense(nn::ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
               bool zero = false) {
  params.add(prefix + ".w", zero ? Tensor({in, out}) : uniform_tensor({in, out}, 1.0 / std::sqrt(double(in)), rng));
  params.add(prefix + ".b", Tensor({out}));
}

nn::LstmWeights lstm_weights(Tape& tape, const nn::ParamSet& params, const std::string& prefix) {
  return {tape.param(params, prefix + ".w"), tape.param(params, prefix + ".b")};
}

std::size_t lstm_hidden(const nn::ParamSet& params, const std::string& prefix) {
  return params.get(prefix + ".b").size() / 4;
}

Var with_extras(Tape& tape, Var enc, const VideoBatch& batch) {
  if (batch.extras.size() == 0) return enc;
  return nn::concat({enc, tape.constant(batch.extras)});
}

std::string tcn_name(int block, const std::string& part) { return "tcn.b" + std::to_string(block) + "." + part; }

}  // namespace

void init_params(nn::ParamSet& params, const ModelConfig& cfg, int vocab_size, int num_labels, Rng& rng) {
  const std::size_t f = cfg.feature_dim, h = cfg.hidden, e = cfg.embed, hd = cfg.decoder_hidden();
  const std::size_t v = vocab_size;
  if (f == 0) fail(ErrorKind::kUsage, "model config has no feature_dim");
  switch (cfg.arch) {
    case Arch::kSeq2Seq:
    case Arch::kTwoWings:
      add_lstm(params, "enc.lstm", f, h, rng);
      break;
    case Arch::kSeq2SeqAttn:
      add_lstm(params, "enc.lstm", f, h, rng);
      params.add("enc.attn.query", Tensor({h}));
      break;
    case Arch::kTwoStage: {
      if (num_labels < 1) fail(ErrorKind::kData, "two_stage model needs a non-empty label vocabulary");
      add_lstm(params, "enc.lstm", f, h, rng);
      add_dense(params, "labels.fc1", hd, h, rng);
      add_dense(params, "labels.fc2", h, h, rng);
      add_dense(params, "labels.fc3", h, num_labels, rng, /*zero=*/true);
      params.add("labels.embed", uniform_tensor({std::size_t(num_labels), e}, 0.1, rng));
      add_lstm(params, "stage2.lstm", e, h, rng);
      break;
    }
    case Arch::kTcn: {
      const std::size_t c = cfg.tcn.channels;
      std::size_t in = f;
      for (int i = 0; i < cfg.tcn.blocks; ++i) {
        for (int j = 0; j < 2; ++j) {
          const std::size_t cin = j == 0 ? in : c;
          const std::string conv = tcn_name(i, "conv" + std::to_string(j));
          // No conv bias: the following batch norm subtracts it out again.
          params.add(conv + ".w", uniform_tensor({3, cin, c}, 1.0 / std::sqrt(3.0 * cin), rng));
          const std::string bn = tcn_name(i, "bn" + std::to_string(j));
          params.add(bn + ".gamma", Tensor({c}, 1.0));
          params.add(bn + ".beta", Tensor({c}));
          params.add(bn + ".running_mean", Tensor({c}), false);
          params.add(bn + ".running_var", Tensor({c}, 1.0), false);
        }
        if (in != c) add_dense(params, tcn_name(i, "proj"), in, c, rng);
        in = c;
      }
      break;
    }
  }
  if (cfg.arch == Arch::kTwoWings) add_lstm(params, "txt.lstm", e, h, rng);
  params.add("dec.embed", uniform_tensor({v, e}, 0.1, rng));
  add_lstm(params, "dec.lstm", e, hd, rng);
  add_dense(params, "dec.out", hd, v, rng);
}

CaptionModel::CaptionModel(ModelConfig config, Vocabulary vocab, LabelVocabulary labels)
    : config_(std::move(config)), vocab_(std::move(vocab)), labels_(std::move(labels)) {
  if (config_.arch == Arch::kTcn && config_.tcn.output_length(16) < 1 && config_.tcn.blocks > 8)
    fail(ErrorKind::kUsage, "tcn has too many blocks");
  Rng rng(config_.seed);
  init_params(params_, config_, vocab_.size(), labels_.size(), rng);
}

Sentence CaptionModel::caption(const VideoRecord& video) const {
  // Eval mode only reads parameters, including batch-norm statistics.
  auto& params = const_cast<nn::ParamSet&>(params_);
  Tape tape;
  const VideoRecord* one[] = {&video};
  VideoBatch batch = make_video_batch(one, config_);
  Var enc = encode_video(tape, params, config_, batch, Mode::kEval);
  GreedyResult g = decode_greedy(tape, params, enc, config_.max_len);
  return vocab_.decode(g.tokens);
}

Var encode_seq2seq(Tape& tape, nn::ParamSet& params, const VideoBatch& batch, bool attention) {
  const std::size_t h = lstm_hidden(params, "enc.lstm");
  nn::LstmWeights w = lstm_weights(tape, params, "enc.lstm");
  nn::LstmState st{tape.constant(Tensor({batch.size, h})), tape.constant(Tensor({batch.size, h}))};
  std::vector<Var> states;
  for (std::size_t t = 0; t < batch.steps; ++t) {
    st = nn::lstm_step(tape.constant(batch.step_frames[t]), st, w);
    if (attention) states.push_back(st.h);
  }
  Var enc = attention ? nn::attention_pool(states, tape.param(params, "enc.attn.query")) : st.h;
  return with_extras(tape, enc, batch);
}

Var tcn_encode(Tape& tape, nn::ParamSet& params, const VideoBatch& batch, const TcnSpec& spec, Mode mode) {
  Var x = tape.constant(batch.frames);
  for (int i = 0; i < spec.blocks; ++i) {
    const std::size_t d = std::size_t{1} << i;
    const std::size_t len = x.shape()[1];
    if (len <= 4 * d)
      fail(ErrorKind::kShape, "tcn block " + std::to_string(i) + ": sequence of length " + std::to_string(len) +
                                  " too short for dilation " + std::to_string(d));
    Var y = x;
    for (int j = 0; j < 2; ++j) {
      const std::string conv = tcn_name(i, "conv" + std::to_string(j));
      const std::string bn = tcn_name(i, "bn" + std::to_string(j));
      Var w = tape.param(params, conv + ".w");
      y = nn::dilated_conv1d(y, w, tape.constant(Tensor({w.shape()[2]})), d);
      nn::BatchNormStats stats{&params.get(bn + ".running_mean"), &params.get(bn + ".running_var")};
      y = nn::batchnorm1d(y, tape.param(params, bn + ".gamma"), tape.param(params, bn + ".beta"), stats, mode);
      y = nn::relu(y);
    }
    Var res = nn::crop_time(x, 2 * d, len - 4 * d);
    if (params.contains(tcn_name(i, "proj.w")))
      res = nn::dense(res, tape.param(params, tcn_name(i, "proj.w")), tape.param(params, tcn_name(i, "proj.b")));
    x = nn::add(y, res);
  }
  return with_extras(tape, nn::mean_over_axis(x, 1), batch);
}

Var run_lstm(Tape& tape, const nn::LstmWeights& w, const std::vector<Var>& inputs,
             const std::vector<std::size_t>& lengths, std::size_t hidden) {
  const std::size_t rows = lengths.size();
  nn::LstmState st{tape.constant(Tensor({rows, hidden})), tape.constant(Tensor({rows, hidden}))};
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    nn::LstmState next = nn::lstm_step(inputs[t], st, w);
    std::vector<std::uint8_t> mask(rows);
    bool all = true, none = true;
    for (std::size_t r = 0; r < rows; ++r) {
      mask[r] = t < lengths[r];
      all = all && mask[r];
      none = none && !mask[r];
    }
    if (none) break;
    if (all) {
      st = next;
    } else {
      st.h = nn::row_select(mask, next.h, st.h);
      st.c = nn::row_select(mask, next.c, st.c);
    }
  }
  return st.h;
}

Var encode_words(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const std::vector<std::vector<int>>& words) {
  const std::size_t rows = words.size();
  std::vector<std::size_t> lengths(rows);
  std::size_t max_len = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    lengths[r] = words[r].size();
    max_len = std::max(max_len, lengths[r]);
  }
  Var table = tape.param(params, "dec.embed");
  std::vector<Var> inputs;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<int> ids(rows, Vocabulary::kEos);
    for (std::size_t r = 0; r < rows; ++r)
      if (t < lengths[r]) ids[r] = words[r][t];
    inputs.push_back(nn::embedding_lookup(table, ids));
  }
  Var h = run_lstm(tape, lstm_weights(tape, params, "txt.lstm"), inputs, lengths, lstm_hidden(params, "txt.lstm"));
  if (cfg.extra_total() == 0) return h;
  return nn::concat({h, tape.constant(Tensor({rows, std::size_t(cfg.extra_total())}))});
}

TeacherForced decode_teacher_forced(Tape& tape, nn::ParamSet& params, Var encoding,
                                    const std::vector<std::vector<int>>& targets) {
  const std::size_t rows = targets.size();
  if (encoding.shape().size() != 2 || encoding.shape()[0] != rows)
    fail(ErrorKind::kShape, "decoder encoding " + nn::shape_str(encoding.shape()) + " does not match " +
                                std::to_string(rows) + " targets");
  const std::size_t hd = lstm_hidden(params, "dec.lstm");
  if (encoding.shape()[1] != hd)
    fail(ErrorKind::kShape, "decoder expects encoding width " + std::to_string(hd) + ", got " +
                                nn::shape_str(encoding.shape()));
  std::size_t steps = 0, total = 0;
  for (const auto& t : targets) {
    steps = std::max(steps, t.size() + 1);
    total += t.size() + 1;
  }
  Var table = tape.param(params, "dec.embed");
  nn::LstmWeights w = lstm_weights(tape, params, "dec.lstm");
  Var out_w = tape.param(params, "dec.out.w"), out_b = tape.param(params, "dec.out.b");
  nn::LstmState st{encoding, tape.constant(Tensor({rows, hd}))};
  std::vector<int> prev(rows, Vocabulary::kBos);
  TeacherForced res;
  Var loss;
  bool have_loss = false;
  for (std::size_t t = 0; t < steps; ++t) {
    st = nn::lstm_step(nn::embedding_lookup(table, prev), st, w);
    Var logits = nn::dense(st.h, out_w, out_b);
    res.logits.push_back(logits);
    std::vector<int> tgt(rows, nn::kIgnoreIndex);
    std::size_t valid = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& seq = targets[r];
      if (t < seq.size()) tgt[r] = seq[t];
      else if (t == seq.size()) tgt[r] = Vocabulary::kEos;
      if (tgt[r] != nn::kIgnoreIndex) ++valid;
      prev[r] = tgt[r] == nn::kIgnoreIndex ? Vocabulary::kEos : tgt[r];
    }
    Var step_loss = nn::scale(nn::softmax_xent(logits, tgt), double(valid) / double(total));
    loss = have_loss ? nn::add(loss, step_loss) : step_loss;
    have_loss = true;
  }
  res.loss = loss;
  return res;
}

GreedyResult decode_greedy(Tape& tape, nn::ParamSet& params, Var encoding, int max_len) {
  if (max_len < 1) fail(ErrorKind::kUsage, "max_len must be at least 1");
  const std::size_t hd = lstm_hidden(params, "dec.lstm");
  if (encoding.shape().size() != 2 || encoding.shape()[1] != hd)
    fail(ErrorKind::kShape, "decoder expects encoding width " + std::to_string(hd) + ", got " +
                                nn::shape_str(encoding.shape()));
  Var table = tape.param(params, "dec.embed");
  nn::LstmWeights w = lstm_weights(tape, params, "dec.lstm");
  Var out_w = tape.param(params, "dec.out.w"), out_b = tape.param(params, "dec.out.b");
  nn::LstmState st{encoding, tape.constant(Tensor({1, hd}))};
  int prev = Vocabulary::kBos;
  GreedyResult res;
  for (int step = 0; step < max_len; ++step) {
    st = nn::lstm_step(nn::embedding_lookup(table, {prev}), st, w);
    Var logits = nn::dense(st.h, out_w, out_b);
    const Tensor& l = logits.value();
    res.logits.push_back(l);
    int best = 0;
    for (std::size_t i = 1; i < l.size(); ++i)
      if (l[i] > l[best]) best = static_cast<int>(i);
    if (best == Vocabulary::kEos) break;
    res.tokens.push_back(best);
    prev = best;
  }
  return res;
}

std::vector<std::string> corrupt_sentence(const Sentence& s, Rng& rng, double keep_ratio) {
  const std::size_t n = s.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(double(n) * keep_ratio - 1e-9)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  rng.shuffle(idx);
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(s.tokens[i]);
  return out;
}

namespace {

std::vector<std::vector<int>> targets_of(std::span<const VisionExample> batch) {
  std::vector<std::vector<int>> t;
  for (const auto& ex : batch) t.push_back(ex.target);
  return t;
}

double apply_step(nn::ParamSet& params, Tape& tape, Var loss, const nn::AdamOptions& adam) {
  tape.backward(loss);
  params.adam_step(tape.param_grads(), adam);
  return loss.value().item();
}

}  // namespace

TwoWingsLosses two_wings_train_step(nn::ParamSet& params, const ModelConfig& cfg,
                                    const std::vector<std::vector<VisionExample>>& vision_batches,
                                    const std::vector<std::vector<TextExample>>& text_batches,
                                    const nn::AdamOptions& adam, bool freeze_vision) {
  TwoWingsLosses out;
  for (const auto& batch : text_batches) {
    if (batch.empty()) continue;
    Tape tape;
    std::vector<std::vector<int>> words, targets;
    for (const auto& ex : batch) {
      words.push_back(ex.words);
      targets.push_back(ex.target);
    }
    Var enc = encode_words(tape, params, cfg, words);
    out.text.push_back(apply_step(params, tape, decode_teacher_forced(tape, params, enc, targets).loss, adam));
  }
  if (freeze_vision) return out;
  for (const auto& batch : vision_batches) {
    if (batch.empty()) continue;
    Tape tape;
    std::vector<const VideoRecord*> videos;
    for (const auto& ex : batch) videos.push_back(ex.video);
    VideoBatch vb = make_video_batch(videos, cfg);
    Var loss = caption_loss(tape, params, cfg, vb, targets_of(batch), Mode::kTrain);
    out.vision.push_back(apply_step(params, tape, loss, adam));
  }
  return out;
}

Var label_logits(Tape& tape, nn::ParamSet& params, const VideoBatch& batch) {
  Var enc = encode_seq2seq(tape, params, batch, false);
  Var h = nn::relu(nn::dense(enc, tape.param(params, "labels.fc1.w"), tape.param(params, "labels.fc1.b")));
  h = nn::relu(nn::dense(h, tape.param(params, "labels.fc2.w"), tape.param(params, "labels.fc2.b")));
  return nn::dense(h, tape.param(params, "labels.fc3.w"), tape.param(params, "labels.fc3.b"));
}

std::vector<LabelScore> top_k_labels(std::span<const double> probs, int k) {
  if (k < 1) fail(ErrorKind::kUsage, "top-K must be at least 1");
  if (static_cast<std::size_t>(k) > probs.size())
    fail(ErrorKind::kUsage, "top-K " + std::to_string(k) + " exceeds label vocabulary size " +
                                std::to_string(probs.size()));
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  std::vector<LabelScore> out;
  for (int i = 0; i < k; ++i) out.push_back({idx[i], probs[idx[i]]});
  return out;
}

std::vector<LabelScore> predict_word_labels(const CaptionModel& model, const VideoRecord& video, int k) {
  if (model.config().arch != Arch::kTwoStage) fail(ErrorKind::kUsage, "word labels need a two_stage model");
  auto& params = const_cast<nn::ParamSet&>(model.params());
  Tape tape;
  const VideoRecord* one[] = {&video};
  VideoBatch batch = make_video_batch(one, model.config());
  Var probs = nn::sigmoid(label_logits(tape, params, batch));
  return top_k_labels(probs.value().data(), k);
}

std::vector<Var> soft_label_embedding(Var probs, Var label_table, const std::vector<std::vector<int>>& top_labels) {
  const std::size_t rows = top_labels.size();
  if (probs.shape().size() != 2 || probs.shape()[0] != rows)
    fail(ErrorKind::kShape, "label probabilities " + nn::shape_str(probs.shape()) + " do not match batch");
  const std::size_t k = rows ? top_labels[0].size() : 0;
  std::vector<Var> seq;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<int> idx(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (top_labels[r].size() != k) fail(ErrorKind::kShape, "ragged top-K label lists");
      idx[r] = top_labels[r][j];
    }
    seq.push_back(nn::scale_rows(nn::embedding_lookup(label_table, idx), nn::gather_cols(probs, idx)));
  }
  return seq;
}

Var encode_label_sequence(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const std::vector<Var>& sequence,
                          const VideoBatch& batch) {
  (void)cfg;
  std::vector<std::size_t> lengths(batch.size, sequence.size());
  Var h = run_lstm(tape, lstm_weights(tape, params, "stage2.lstm"), sequence, lengths,
                   lstm_hidden(params, "stage2.lstm"));
  return with_extras(tape, h, batch);
}

Var encode_two_stage(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch) {
  Var probs = nn::sigmoid(label_logits(tape, params, batch));
  const std::size_t nl = probs.shape()[1];
  const int k = std::min<int>(cfg.top_k, static_cast<int>(nl));
  std::vector<std::vector<int>> top(batch.size);
  const Tensor& p = probs.value();
  for (std::size_t r = 0; r < batch.size; ++r) {
    auto best = top_k_labels(std::span<const double>(p.ptr() + r * nl, nl), k);
    for (const auto& s : best) top[r].push_back(s.label);
  }
  auto seq = soft_label_embedding(probs, tape.param(params, "labels.embed"), top);
  return encode_label_sequence(tape, params, cfg, seq, batch);
}

Var encode_video(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch, Mode mode) {
  switch (cfg.arch) {
    case Arch::kSeq2Seq:
    case Arch::kTwoWings:
      return encode_seq2seq(tape, params, batch, false);
    case Arch::kSeq2SeqAttn:
      return encode_seq2seq(tape, params, batch, true);
    case Arch::kTwoStage:
      return encode_two_stage(tape, params, cfg, batch);
    case Arch::kTcn:
      return tcn_encode(tape, params, batch, cfg.tcn, mode);
  }
  fail(ErrorKind::kUsage, "unknown architecture");
}

Var caption_loss(Tape& tape, nn::ParamSet& params, const ModelConfig& cfg, const VideoBatch& batch,
                 const std::vector<std::vector<int>>& targets, Mode mode) {
  Var enc = encode_video(tape, params, cfg, batch, mode);
  return decode_teacher_forced(tape, params, enc, targets).loss;
}

OverfitResult overfit_example(CaptionModel& model, const VideoRecord& video, const Sentence& target, int max_steps,
                              double target_loss, double lr) {
  const VideoRecord* one[] = {&video};
  VideoBatch batch = make_video_batch(one, model.config());
  const std::vector<std::vector<int>> targets = {model.vocab().encode(target)};
  nn::AdamOptions adam;
  adam.lr = lr;
  OverfitResult res;
  for (int step = 0;; ++step) {
    Tape tape;
    Var loss = caption_loss(tape, model.params(), model.config(), batch, targets, Mode::kTrain);
    res.final_loss = loss.value().item();
    res.steps = step;
    if (res.final_loss < target_loss || step >= max_steps) break;
    tape.backward(loss);
    model.params().adam_step(tape.param_grads(), adam);
  }
  return res;
}

bool LrSchedule::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ < patience_) return false;
  bad_epochs_ = 0;
  if (lr_ / 10.0 < min_lr_ * (1.0 - 1e-9)) return false;
  lr_ /= 10.0;
  ++decays_;
  return true;
}

json TrainingLog::to_json() const {
  json rows = json::array();
  for (const auto& e : epochs)
    rows.push_back({{"epoch", e.epoch}, {"phase", e.phase}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                    {"lr", e.lr}});
  return {{"epochs", rows}, {"lr_decays", lr_decays}};
}

CandidatePool generate_pool(std::span<const NamedModel> models, const VideoRecord& video) {
  std::vector<PoolCandidate> cands;
  for (const auto& m : models) {
    try {
      cands.push_back({m.model_id, m.model->caption(video)});
    } catch (const Error& e) {
      fail(e.kind(), "model " + m.model_id + ": " + e.what());
    }
  }
  return CandidatePool::make(video.video_id, std::move(cands));
}

}  // namespace vcons
