#include "vcons/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "vcons/models.hpp"
#include "vcons/nn/grad_check.hpp"
#include "vcons/oracle.hpp"
#include "vcons/random.hpp"

namespace vcons {

using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kH = 1e-5;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

// Values kept away from zero so no perturbation crosses a relu kink.
Tensor off_zero_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// Reduces an op output to a scalar through fixed random weights.
Var reduce(Var y, Rng& rng) { return nn::weighted_sum(y, random_tensor(y.shape(), rng)); }

struct OpCase {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<Var(Tape&, std::span<const Var>)> fn;
};

std::vector<OpCase> op_cases(Rng& rng) {
  std::vector<OpCase> cases;
  auto weights_for = [&rng](std::uint64_t salt) { return rng.fork(salt); };
  auto add = [&](std::string name, std::vector<Tensor> inputs, std::function<Var(std::span<const Var>)> op) {
    auto w = std::make_shared<Rng>(weights_for(cases.size() + 1));
    cases.push_back({std::move(name), std::move(inputs), [op, w](Tape&, std::span<const Var> v) {
                       Rng r = *w;
                       return reduce(op(v), r);
                     }});
  };
  add("dense", {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)},
      [](auto v) { return nn::dense(v[0], v[1], v[2]); });
  add("dense_rank3", {random_tensor({2, 3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
      [](auto v) { return nn::dense(v[0], v[1], v[2]); });
  add("add", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, [](auto v) { return nn::add(v[0], v[1]); });
  add("mul", {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, [](auto v) { return nn::mul(v[0], v[1]); });
  add("scale", {random_tensor({3, 4}, rng)}, [](auto v) { return nn::scale(v[0], -1.7); });
  add("relu", {off_zero_tensor({3, 4}, rng)}, [](auto v) { return nn::relu(v[0]); });
  add("sigmoid", {random_tensor({3, 4}, rng, -3, 3)}, [](auto v) { return nn::sigmoid(v[0]); });
  add("tanh", {random_tensor({3, 4}, rng, -2, 2)}, [](auto v) { return nn::tanh(v[0]); });
  add("sum", {random_tensor({3, 4}, rng)}, [](auto v) { return nn::sum(v[0]); });
  add("embedding_lookup", {random_tensor({5, 3}, rng)},
      [](auto v) { return nn::embedding_lookup(v[0], {4, 0, 4, 2}); });
  add("concat", {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
      [](auto v) { return nn::concat({v[0], v[1]}); });
  add("slice_cols", {random_tensor({3, 6}, rng)}, [](auto v) { return nn::slice_cols(v[0], 2, 3); });
  add("mean_over_axis", {random_tensor({2, 5, 3}, rng)}, [](auto v) { return nn::mean_over_axis(v[0], 1); });
  add("row_select", {random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)},
      [](auto v) { return nn::row_select({1, 0, 0, 1}, v[0], v[1]); });
  add("gather_cols", {random_tensor({4, 5}, rng)}, [](auto v) { return nn::gather_cols(v[0], {0, 4, 2, 2}); });
  add("scale_rows", {random_tensor({4, 3}, rng), random_tensor({4, 1}, rng)},
      [](auto v) { return nn::scale_rows(v[0], v[1]); });
  add("lstm_step", {random_tensor({2, 3}, rng), random_tensor({2, 4}, rng), random_tensor({2, 4}, rng),
                    random_tensor({7, 16}, rng, -0.5, 0.5), random_tensor({16}, rng, -0.5, 0.5)},
      [](auto v) {
        nn::LstmState s = nn::lstm_step(v[0], {v[1], v[2]}, {v[3], v[4]});
        return nn::concat({s.h, s.c});
      });
  add("attention_pool", {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng),
                         random_tensor({3}, rng)},
      [](auto v) { return nn::attention_pool({v[0], v[1], v[2]}, v[3]); });
  add("dilated_conv1d", {random_tensor({2, 7, 3}, rng), random_tensor({3, 3, 4}, rng), random_tensor({4}, rng)},
      [](auto v) { return nn::dilated_conv1d(v[0], v[1], v[2], 2); });
  add("crop_time", {random_tensor({2, 6, 3}, rng)}, [](auto v) { return nn::crop_time(v[0], 1, 3); });
  add("batchnorm1d", {random_tensor({3, 4, 2}, rng), random_tensor({2}, rng, 0.5, 1.5), random_tensor({2}, rng)},
      [](auto v) { return nn::batchnorm1d(v[0], v[1], v[2], {}, nn::Mode::kTrain); });
  {
    auto mean = std::make_shared<Tensor>(random_tensor({2}, rng));
    auto var = std::make_shared<Tensor>(random_tensor({2}, rng, 0.5, 2.0));
    add("batchnorm1d_eval", {random_tensor({3, 2}, rng), random_tensor({2}, rng), random_tensor({2}, rng)},
        [mean, var](auto v) { return nn::batchnorm1d(v[0], v[1], v[2], {mean.get(), var.get()}, nn::Mode::kEval); });
  }
  cases.push_back({"softmax_xent", {random_tensor({4, 5}, rng, -3, 3)}, [](Tape&, std::span<const Var> v) {
                     return nn::softmax_xent(v[0], {1, nn::kIgnoreIndex, 4, 0});
                   }});
  {
    Tensor targets = random_tensor({3, 4}, rng, 0.0, 1.0);
    cases.push_back({"sigmoid_bce", {random_tensor({3, 4}, rng, -4, 4)},
                     [targets](Tape&, std::span<const Var> v) { return nn::sigmoid_bce(v[0], targets); }});
  }
  return cases;
}

void randomize(nn::ParamSet& params, Rng& rng, double bound) {
  for (const auto& name : params.names()) {
    if (!params.entry(name).trainable) continue;
    for (double& x : params.get(name).data()) x = rng.uniform(-bound, bound);
  }
}

VideoRecord micro_video(const std::string& id, std::size_t frames, std::size_t dim, Rng& rng) {
  VideoRecord v;
  v.video_id = id;
  v.frames = random_tensor({frames, dim}, rng);
  v.extra_features["audio"] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  v.annotations = {"a man rides a bike"};
  return v;
}

}  // namespace

std::vector<GradCheckRow> op_gradchecks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckRow> rows;
  for (auto& c : op_cases(rng)) rows.push_back({c.name, nn::grad_check(c.fn, c.inputs, kH), kOpTolerance});
  return rows;
}

std::vector<GradCheckRow> model_gradchecks(std::uint64_t seed) {
  Rng rng(seed);
  const Vocabulary vocab({"a", "bike", "man", "rides", "the"});
  const LabelVocabulary labels({"bike", "man", "rides", "woman"});
  const std::size_t dim = 3;
  std::vector<VideoRecord> videos = {micro_video("v0", 5, dim, rng), micro_video("v1", 5, dim, rng)};
  const VideoRecord* ptrs[] = {&videos[0], &videos[1]};
  const std::vector<std::vector<int>> targets = {vocab.encode(tokenize("a man rides")),
                                                 vocab.encode(tokenize("the bike"))};
  std::vector<GradCheckRow> rows;
  for (Arch arch : all_archs()) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.hidden = 3;
    cfg.embed = 2;
    cfg.top_k = 3;
    cfg.tcn.blocks = 1;
    cfg.tcn.channels = 2;
    cfg.feature_dim = dim;
    cfg.extra_features = {"audio"};
    cfg.extra_dims = {{"audio", 2}};
    cfg.seed = seed;
    CaptionModel model(cfg, vocab, arch == Arch::kTwoStage ? labels : LabelVocabulary{});
    Rng init = rng.fork(static_cast<std::uint64_t>(arch) + 11);
    randomize(model.params(), init, 0.8);
    const VideoBatch batch = make_video_batch(ptrs, cfg);
    auto& params = model.params();
    auto loss = [&](Tape& tape) { return caption_loss(tape, params, cfg, batch, targets, nn::Mode::kTrain); };
    rows.push_back({arch_name(arch), nn::grad_check_params(loss, params, kH, 0, nn::ErrorNorm::kTensor), kEndToEndTolerance});
    if (arch == Arch::kTwoWings) {
      const std::vector<std::vector<int>> words = {{3, 5}, {6}};
      auto text_loss = [&](Tape& tape) {
        return decode_teacher_forced(tape, params, encode_words(tape, params, cfg, words), targets).loss;
      };
      rows.push_back({"two_wings_text", nn::grad_check_params(text_loss, params, kH, 0, nn::ErrorNorm::kTensor), kEndToEndTolerance});
    }
    if (arch == Arch::kTwoStage) {
      Tensor label_targets({2, 4});
      label_targets.at(0, 1) = label_targets.at(0, 2) = label_targets.at(1, 0) = 1.0;
      auto label_loss = [&](Tape& tape) { return nn::sigmoid_bce(label_logits(tape, params, batch), label_targets); };
      rows.push_back({"two_stage_labels", nn::grad_check_params(label_loss, params, kH, 0, nn::ErrorNorm::kTensor), kEndToEndTolerance});
    }
  }
  {
    OracleConfig ocfg;
    ocfg.embed = 2;
    ocfg.hidden = 3;
    ocfg.video_proj = 2;
    ocfg.fc1 = 4;
    ocfg.fc2 = 3;
    ocfg.feature_dim = dim;
    OracleNet net(ocfg, vocab);
    Rng init = rng.fork(97);
    randomize(net.params(), init, 0.8);
    Tensor vids({2, dim});
    const Tensor e0 = video_embed(videos[0]), e1 = video_embed(videos[1]);
    for (std::size_t j = 0; j < dim; ++j) vids.at(0, j) = e0[j], vids.at(1, j) = e1[j];
    const std::vector<std::vector<int>> a = {{3, 4}, {7}}, b = {{5}, {3, 6, 4}};
    Tensor labels_t({2, 1}, std::vector<double>{1.0, 0.0});
    auto loss = [&](Tape& tape) { return nn::sigmoid_bce(oracle_logits(tape, net.params(), vids, a, b), labels_t); };
    rows.push_back({"oracle", nn::grad_check_params(loss, net.params(), kH, 0, nn::ErrorNorm::kTensor), kEndToEndTolerance});
  }
  return rows;
}

}  // namespace vcons
