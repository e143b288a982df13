#include <cstdio>

#include "vcons/data.hpp"
#include "vcons/error.hpp"
#include "vcons/random.hpp"

namespace vcons {

using nlohmann::json;

namespace {

constexpr int kTemplateCount = 6;

std::vector<double> gaussian_vector(Rng& rng, int dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

SynthSpec SynthSpec::defaults() {
  SynthSpec s;
  s.subjects = {{"man", "guy"},     {"woman", "lady"}, {"boy", "kid"},     {"girl", "child"},
                {"dog", "puppy"},   {"cat", "kitten"}, {"chef", "cook"},   {"player", "athlete"}};
  s.verbs = {{"riding", "rides"},     {"holding", "holds"},   {"cleaning", "cleans"},
             {"throwing", "throws"},  {"painting", "paints"}, {"carrying", "carries"}};
  s.objects = {"ball", "bike", "guitar", "car", "box", "fence", "chair", "kite"};
  return s;
}

json SynthSpec::to_json() const {
  json subj = json::array();
  for (const auto& s : subjects) subj.push_back({s.word, s.synonym});
  json verb = json::array();
  for (const auto& v : verbs) verb.push_back({v.ing, v.third});
  return {{"train", train},
          {"val", val},
          {"test", test},
          {"frames", frames},
          {"feature_dim", feature_dim},
          {"annotations", annotations},
          {"noise", noise},
          {"video_noise", video_noise},
          {"extra_dim", extra_dim},
          {"extra_noise", extra_noise},
          {"subjects", subj},
          {"verbs", verb},
          {"objects", objects},
          {"seed", seed}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s = defaults();
  try {
    s.train = j.value("train", s.train);
    s.val = j.value("val", s.val);
    s.test = j.value("test", s.test);
    s.frames = j.value("frames", s.frames);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.annotations = j.value("annotations", s.annotations);
    s.noise = j.value("noise", s.noise);
    s.video_noise = j.value("video_noise", s.video_noise);
    s.extra_dim = j.value("extra_dim", s.extra_dim);
    s.extra_noise = j.value("extra_noise", s.extra_noise);
    s.seed = j.value("seed", s.seed);
    if (j.contains("subjects")) {
      s.subjects.clear();
      for (const auto& p : j.at("subjects")) s.subjects.push_back({p.at(0), p.at(1)});
    }
    if (j.contains("verbs")) {
      s.verbs.clear();
      for (const auto& p : j.at("verbs")) s.verbs.push_back({p.at(0), p.at(1)});
    }
    if (j.contains("objects")) s.objects = j.at("objects").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed synth spec: ") + e.what());
  }
  return s;
}

void SynthSpec::validate() const {
  if (subjects.empty() || verbs.empty() || objects.empty()) {
    fail(ErrorKind::kUsage, "synth spec needs non-empty subject, verb and object vocabularies");
  }
  if (noise < 0.0 || video_noise < 0.0 || extra_noise < 0.0) fail(ErrorKind::kUsage, "synth noise must be >= 0");
  if (train < 0 || val < 0 || test < 0) fail(ErrorKind::kUsage, "synth split counts must be >= 0");
  if (frames < 1 || feature_dim < 1 || annotations < 1 || extra_dim < 0) {
    fail(ErrorKind::kUsage, "synth frames, feature_dim and annotations must be positive");
  }
}

int num_templates() { return kTemplateCount; }

std::string render_template(const SynthSpec& spec, const Triple& t, int template_index) {
  const auto& s = spec.subjects.at(t.subject);
  const auto& v = spec.verbs.at(t.verb);
  const auto& o = spec.objects.at(t.object);
  switch (template_index) {
    case 0:
      return "a " + s.word + " is " + v.ing + " a " + o;
    case 1:
      return "the " + s.word + " is " + v.ing + " the " + o;
    case 2:
      return "a " + s.word + " " + v.third + " a " + o;
    case 3:
      return "a " + s.synonym + " is " + v.ing + " a " + o;
    case 4:
      return "there is a " + s.word + " " + v.ing + " a " + o;
    case 5:
      return "someone is " + v.ing + " a " + o;
    default:
      fail(ErrorKind::kUsage, "template index out of range");
  }
}

std::vector<std::string> expand_templates(const SynthSpec& spec, const Triple& t) {
  std::vector<std::string> out;
  for (int i = 0; i < kTemplateCount; ++i) out.push_back(render_template(spec, t, i));
  return out;
}

SynthCorpus synth_corpus(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Rng embed_rng = rng.fork(1);
  std::vector<std::vector<double>> subj_vis, verb_vis, obj_vis, subj_aux, verb_aux;
  for (std::size_t i = 0; i < spec.subjects.size(); ++i) subj_vis.push_back(gaussian_vector(embed_rng, spec.feature_dim));
  for (std::size_t i = 0; i < spec.verbs.size(); ++i) verb_vis.push_back(gaussian_vector(embed_rng, spec.feature_dim));
  for (std::size_t i = 0; i < spec.objects.size(); ++i) obj_vis.push_back(gaussian_vector(embed_rng, spec.feature_dim));
  for (std::size_t i = 0; i < spec.subjects.size(); ++i) subj_aux.push_back(gaussian_vector(embed_rng, spec.extra_dim));
  for (std::size_t i = 0; i < spec.verbs.size(); ++i) verb_aux.push_back(gaussian_vector(embed_rng, spec.extra_dim));

  SynthCorpus out;
  Rng video_rng = rng.fork(2);
  const int total = spec.train + spec.val + spec.test;
  for (int idx = 0; idx < total; ++idx) {
    Triple t;
    t.subject = static_cast<int>(video_rng.below(spec.subjects.size()));
    t.verb = static_cast<int>(video_rng.below(spec.verbs.size()));
    t.object = static_cast<int>(video_rng.below(spec.objects.size()));

    VideoRecord v;
    char id[32];
    std::snprintf(id, sizeof(id), "video%04d", idx);
    v.video_id = id;
    v.split = idx < spec.train ? Split::kTrain : (idx < spec.train + spec.val ? Split::kVal : Split::kTest);

    const auto dim = static_cast<std::size_t>(spec.feature_dim);
    std::vector<double> offset(dim);
    for (auto& x : offset) x = spec.video_noise * video_rng.normal();
    v.frames = nn::Tensor({static_cast<std::size_t>(spec.frames), dim});
    for (int f = 0; f < spec.frames; ++f) {
      for (std::size_t k = 0; k < dim; ++k) {
        v.frames[f * dim + k] = subj_vis[t.subject][k] + verb_vis[t.verb][k] + obj_vis[t.object][k] + offset[k] +
                                spec.noise * video_rng.normal();
      }
    }
    if (spec.extra_dim > 0) {
      std::vector<double> aux(spec.extra_dim);
      for (int k = 0; k < spec.extra_dim; ++k) {
        aux[k] = subj_aux[t.subject][k] + verb_aux[t.verb][k] + spec.extra_noise * video_rng.normal();
      }
      v.extra_features["audio"] = std::move(aux);
    }
    for (int a = 0; a < spec.annotations; ++a) {
      v.annotations.push_back(render_template(spec, t, static_cast<int>(video_rng.below(kTemplateCount))));
    }
    out.corpus.push_back(std::move(v));
    out.triples.push_back(t);
  }
  return out;
}

}  // namespace vcons
