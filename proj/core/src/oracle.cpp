#include "vcons/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vcons/error.hpp"
#include "vcons/model_io.hpp"
#include "vcons/random.hpp"

namespace vcons {

using json = nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

json OracleConfig::to_json() const {
  return {{"embed", embed},     {"hidden", hidden},         {"video_proj", video_proj}, {"fc1", fc1},
          {"fc2", fc2},         {"epochs", epochs},         {"batch_size", batch_size}, {"lr", lr},
          {"cross_ratio", cross_ratio}, {"max_pairs", max_pairs}, {"seed", seed},     {"feature_dim", feature_dim}};
}

OracleConfig OracleConfig::from_json(const json& j) {
  OracleConfig c;
  try {
    c.embed = j.value("embed", c.embed);
    c.hidden = j.value("hidden", c.hidden);
    c.video_proj = j.value("video_proj", c.video_proj);
    c.fc1 = j.value("fc1", c.fc1);
    c.fc2 = j.value("fc2", c.fc2);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.cross_ratio = j.value("cross_ratio", c.cross_ratio);
    c.max_pairs = j.value("max_pairs", c.max_pairs);
    c.seed = j.value("seed", c.seed);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
  } catch (const json::exception& e) {
    fail(ErrorKind::kUsage, std::string("bad oracle config: ") + e.what());
  }
  if (c.embed < 1 || c.hidden < 1 || c.video_proj < 1 || c.fc1 < 1 || c.fc2 < 1 || c.batch_size < 1 || c.epochs < 0)
    fail(ErrorKind::kUsage, "oracle config sizes must be positive");
  if (!(c.lr > 0)) fail(ErrorKind::kUsage, "oracle learning rate must be positive");
  if (c.cross_ratio < 0) fail(ErrorKind::kUsage, "cross_ratio must be non-negative");
  return c;
}

Tensor video_embed(const VideoRecord& video) {
  if (video.frames.rank() != 2 || video.num_frames() == 0)
    fail(ErrorKind::kData, "video " + video.video_id + " has no frames");
  const std::size_t t = video.num_frames(), f = video.feature_dim();
  Tensor out({f});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < f; ++j) out[j] += video.frames.at(i, j);
  for (std::size_t j = 0; j < f; ++j) out[j] /= double(t);
  if (!out.all_finite()) fail(ErrorKind::kNumeric, "video " + video.video_id + ": non-finite frame mean");
  return out;
}

namespace {

Tensor uniform_tensor(nn::Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

void add_dense(nn::ParamSet& p, const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool zero = false) {
  p.add(name + ".w", zero ? Tensor({in, out}) : uniform_tensor({in, out}, 1.0 / std::sqrt(double(in)), rng));
  p.add(name + ".b", Tensor({out}));
}

template <typename F>
Var layer(const char* name, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    fail(ErrorKind::kNumeric, std::string("oracle layer ") + name + ": " + e.what());
  }
}

Var encode_sentences(Tape& tape, const nn::ParamSet& params, const std::vector<std::vector<int>>& ids) {
  Var table = tape.param(params, "embed");
  std::vector<std::size_t> lengths;
  std::size_t steps = 0;
  for (const auto& s : ids) {
    lengths.push_back(s.size());
    steps = std::max(steps, s.size());
  }
  std::vector<Var> inputs;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> col(ids.size(), Vocabulary::kEos);
    for (std::size_t r = 0; r < ids.size(); ++r)
      if (t < ids[r].size()) col[r] = ids[r][t];
    inputs.push_back(nn::embedding_lookup(table, col));
  }
  nn::LstmWeights w{tape.param(params, "sent.lstm.w"), tape.param(params, "sent.lstm.b")};
  return run_lstm(tape, w, inputs, lengths, params.get("sent.lstm.b").size() / 4);
}

Var dense_of(Tape& tape, const nn::ParamSet& params, const std::string& name, Var x) {
  return nn::dense(x, tape.param(params, name + ".w"), tape.param(params, name + ".b"));
}

constexpr double kGrid = 1099511627776.0;  // 2^40

}  // namespace

Var oracle_logits(Tape& tape, const nn::ParamSet& params, const Tensor& videos, const std::vector<std::vector<int>>& a,
                  const std::vector<std::vector<int>>& b) {
  if (a.size() != b.size() || videos.rank() != 2 || videos.dim(0) != a.size())
    fail(ErrorKind::kShape, "oracle batch rows disagree");
  if (videos.dim(1) != params.get("video.proj.w").dim(0))
    fail(ErrorKind::kShape, "oracle expects video features of dim " + std::to_string(params.get("video.proj.w").dim(0)) +
                                ", got " + std::to_string(videos.dim(1)));
  Var v = layer("video_proj", [&] { return nn::tanh(dense_of(tape, params, "video.proj", tape.constant(videos))); });
  Var ha = layer("sentence_encoder", [&] { return encode_sentences(tape, params, a); });
  Var hb = layer("sentence_encoder", [&] { return encode_sentences(tape, params, b); });
  Var x = nn::concat({v, ha, hb});
  x = layer("fc1", [&] { return nn::relu(dense_of(tape, params, "fc1", x)); });
  x = layer("fc2", [&] { return nn::relu(dense_of(tape, params, "fc2", x)); });
  return layer("fc3", [&] { return dense_of(tape, params, "fc3", x); });
}

OracleNet::OracleNet(OracleConfig config, Vocabulary vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  if (config_.feature_dim < 1) fail(ErrorKind::kUsage, "oracle config has no feature_dim");
  Rng rng(config_.seed);
  const std::size_t e = config_.embed, h = config_.hidden, vp = config_.video_proj;
  params_.add("embed", uniform_tensor({std::size_t(vocab_.size()), e}, 0.1, rng));
  params_.add("sent.lstm.w", uniform_tensor({e + h, 4 * h}, 1.0 / std::sqrt(double(h)), rng));
  Tensor b({4 * h});
  for (std::size_t i = h; i < 2 * h; ++i) b[i] = 1.0;
  params_.add("sent.lstm.b", std::move(b));
  add_dense(params_, "video.proj", config_.feature_dim, vp, rng);
  add_dense(params_, "fc1", vp + 2 * h, config_.fc1, rng);
  add_dense(params_, "fc2", config_.fc1, config_.fc2, rng);
  add_dense(params_, "fc3", config_.fc2, 1, rng, /*zero=*/true);
}

std::vector<int> OracleNet::encode(const Sentence& s) const { return vocab_.encode(s); }

double OracleNet::raw(const VideoRecord& video, const Sentence& a, const Sentence& b) const {
  Tape tape;
  Tensor v = video_embed(video);
  Tensor videos({1, v.size()}, std::vector<double>(v.data().begin(), v.data().end()));
  Var logits = oracle_logits(tape, params_, videos, {encode(a)}, {encode(b)});
  return nn::stable_sigmoid(logits.value()[0]);
}

double OracleNet::compare(const VideoRecord& video, const Sentence& a, const Sentence& b) const {
  std::vector<int> ia = encode(a), ib = encode(b);
  if (ia == ib) return 0.5;
  const bool flipped = ib < ia;
  if (flipped) std::swap(ia, ib);
  Tape tape;
  Tensor v = video_embed(video);
  Tensor videos({2, v.size()});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < v.size(); ++j) videos.at(r, j) = v[j];
  Var logits = oracle_logits(tape, params_, videos, {ia, ib}, {ib, ia});
  const double d = nn::stable_sigmoid(logits.value()[0]) - nn::stable_sigmoid(logits.value()[1]);
  double q = std::round((0.5 + 0.5 * d) * kGrid) / kGrid;
  q = std::clamp(q, 1.0 / kGrid, 1.0 - 1.0 / kGrid);
  return flipped ? 1.0 - q : q;
}

std::vector<TrainingPair> make_training_pairs(std::span<const CandidateRecord> candidates, const Corpus& corpus,
                                              const IdfTable& idf, double cross_ratio, std::uint64_t seed) {
  if (cross_ratio < 0) fail(ErrorKind::kUsage, "cross_ratio must be non-negative");
  const auto pools = group_pools(candidates);
  if (pools.size() < 2) fail(ErrorKind::kData, "oracle training needs candidates for at least two videos");
  const auto by_id = index_by_id(corpus);
  struct Entry {
    const CandidatePool* pool;
    std::vector<Sentence> refs;
    std::vector<double> scores;
  };
  std::vector<Entry> entries;
  for (const auto& [id, pool] : pools) {
    auto it = by_id.find(id);
    if (it == by_id.end() || it->second->annotations.empty())
      fail(ErrorKind::kMissingReference, "no annotations for candidate video " + id);
    Entry e{&pool, it->second->references(), {}};
    for (const auto& c : pool.candidates) e.scores.push_back(cider_d(c.sentence, e.refs, idf));
    entries.push_back(std::move(e));
  }
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  for (std::size_t v = 0; v < entries.size(); ++v) {
    const Entry& e = entries[v];
    const std::size_t n = e.pool->size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (e.scores[i] == e.scores[j]) continue;
        pairs.push_back({e.pool->video_id, e.pool->candidates[i].sentence, e.pool->candidates[j].sentence,
                         e.scores[i] > e.scores[j] ? 1 : 0, PairSource::kSameVideo});
      }
    const auto cross = static_cast<std::size_t>(std::llround(cross_ratio * double(n * (n - 1) / 2)));
    for (std::size_t k = 0; k < cross; ++k) {
      const std::size_t i = rng.below(n);
      std::size_t u = rng.below(entries.size() - 1);
      if (u >= v) ++u;
      const CandidatePool& other = *entries[u].pool;
      const Sentence& foreign = other.candidates[rng.below(other.size())].sentence;
      const double s = cider_d(foreign, e.refs, idf);
      if (s == e.scores[i]) continue;
      pairs.push_back({e.pool->video_id, e.pool->candidates[i].sentence, foreign, e.scores[i] > s ? 1 : 0,
                       PairSource::kCrossVideo});
    }
  }
  if (pairs.empty()) fail(ErrorKind::kData, "no labelable oracle training pairs");
  return pairs;
}

TrainedOracle train_oracle(std::span<const TrainingPair> pairs, const Corpus& corpus, OracleConfig cfg,
                           std::uint64_t seed) {
  if (pairs.empty()) fail(ErrorKind::kData, "oracle training needs at least one pair");
  cfg.seed = seed;
  const auto by_id = index_by_id(corpus);
  std::map<std::string, Tensor> embeds;
  for (const auto& p : pairs) {
    if (embeds.count(p.video_id)) continue;
    auto it = by_id.find(p.video_id);
    if (it == by_id.end()) fail(ErrorKind::kMissingReference, "pair video " + p.video_id + " not in corpus");
    embeds.emplace(p.video_id, video_embed(*it->second));
  }
  cfg.feature_dim = static_cast<int>(embeds.begin()->second.size());

  Rng rng = Rng(seed).fork(0x6f72);
  std::vector<const TrainingPair*> used;
  for (const auto& p : pairs) used.push_back(&p);
  if (cfg.max_pairs > 0 && used.size() > cfg.max_pairs) {
    rng.shuffle(used);
    used.resize(cfg.max_pairs);
  }
  std::vector<Sentence> sentences;
  for (const auto* p : used) {
    sentences.push_back(p->a);
    sentences.push_back(p->b);
  }
  TrainedOracle out;
  out.net = std::make_unique<OracleNet>(cfg, Vocabulary::build(sentences));
  OracleNet& net = *out.net;

  struct Row {
    const Tensor* video;
    std::vector<int> a, b;
    double label;
  };
  std::vector<Row> rows;
  for (const auto* p : used) {
    const Tensor* v = &embeds.at(p->video_id);
    auto a = net.encode(p->a), b = net.encode(p->b);
    rows.push_back({v, a, b, double(p->label)});
    rows.push_back({v, b, a, double(1 - p->label)});
  }
  nn::AdamOptions adam;
  adam.lr = cfg.lr;
  const std::size_t f = cfg.feature_dim, bs = cfg.batch_size;
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t n = std::min(bs, order.size() - start);
      Tensor videos({n, f}), labels({n, 1});
      std::vector<std::vector<int>> a(n), b(n);
      for (std::size_t r = 0; r < n; ++r) {
        const Row& row = rows[order[start + r]];
        std::copy(row.video->ptr(), row.video->ptr() + f, videos.ptr() + r * f);
        a[r] = row.a;
        b[r] = row.b;
        labels[r] = row.label;
      }
      try {
        Tape tape;
        Var loss = nn::sigmoid_bce(oracle_logits(tape, net.params(), videos, a, b), labels);
        tape.backward(loss);
        net.params().adam_step(tape.param_grads(), adam);
        total += loss.value().item();
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        fail(ErrorKind::kNumeric, "oracle training diverged at step " + std::to_string(out.log.steps) + ": " + e.what());
      }
      ++batches;
      ++out.log.steps;
    }
    out.log.epoch_loss.push_back(batches ? total / double(batches) : 0.0);
  }
  return out;
}

double pair_accuracy(const OracleNet& net, std::span<const TrainingPair> pairs, const Corpus& corpus) {
  if (pairs.empty()) return 0.0;
  const auto by_id = index_by_id(corpus);
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    auto it = by_id.find(p.video_id);
    if (it == by_id.end()) fail(ErrorKind::kMissingReference, "pair video " + p.video_id + " not in corpus");
    const double q = net.compare(*it->second, p.a, p.b);
    if ((p.label == 1 && q > 0.5) || (p.label == 0 && q < 0.5)) ++correct;
  }
  return double(correct) / double(pairs.size());
}

TournamentResult tournament_rank(std::span<const PoolCandidate> candidates, std::span<const double> phase1,
                                 const Comparator& compare) {
  const std::size_t n = candidates.size();
  if (n < 2) fail(ErrorKind::kUsage, "tournament needs at least two candidates");
  if (phase1.size() != n) fail(ErrorKind::kShape, "tournament phase-1 scores do not match candidates");
  // Strict preference used for ties: higher phase-1 score, then lower model_id.
  auto prefer = [&](std::size_t i, std::size_t j) {
    if (phase1[i] != phase1[j]) return phase1[i] > phase1[j];
    return candidates[i].model_id < candidates[j].model_id;
  };
  std::vector<int> wins(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = compare(candidates[i], candidates[j]);
      if (!std::isfinite(p)) fail(ErrorKind::kNumeric, "comparator returned a non-finite probability");
      if (p > 0.5 || (p == 0.5 && prefer(i, j))) ++wins[i];
      else ++wins[j];
    }
  TournamentResult res;
  res.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.order[i] = i;
  std::sort(res.order.begin(), res.order.end(), [&](std::size_t i, std::size_t j) {
    if (wins[i] != wins[j]) return wins[i] > wins[j];
    return prefer(i, j);
  });
  for (std::size_t i : res.order) res.victories.push_back(wins[i]);
  return res;
}

Comparator make_comparator(const OracleNet& net, const VideoRecord& video) {
  return [&net, &video](const PoolCandidate& a, const PoolCandidate& b) { return net.compare(video, a.sentence, b.sentence); };
}

json oracle_to_json(const OracleNet& net) {
  json cfg = net.config().to_json();
  cfg["vocab"] = net.vocab().to_json();
  return {{"arch", "oracle"}, {"config", cfg}, {"params", params_to_json(net.params())}};
}

std::unique_ptr<OracleNet> oracle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("arch") || !j.contains("config") || !j.contains("params"))
    fail(ErrorKind::kCorruptModel, "oracle file needs arch, config and params");
  if (j.at("arch") != "oracle")
    fail(ErrorKind::kCorruptModel, "architecture mismatch: file holds " + j.at("arch").dump() + ", expected oracle");
  const json& c = j.at("config");
  if (!c.contains("vocab")) fail(ErrorKind::kCorruptModel, "oracle file lacks a vocabulary");
  auto net = std::make_unique<OracleNet>(OracleConfig::from_json(c), Vocabulary::from_json(c.at("vocab")));
  params_from_json(j.at("params"), net->params());
  return net;
}

void save_oracle(const OracleNet& net, const std::string& path) {
  write_text_file(path, oracle_to_json(net).dump() + "\n");
}

std::unique_ptr<OracleNet> load_oracle(const std::string& path) { return oracle_from_json(read_json_file(path)); }

}  // namespace vcons
