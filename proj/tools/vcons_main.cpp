// vcons: command-line front end for the consensus captioning pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vcons/consensus.hpp"
#include "vcons/data.hpp"
#include "vcons/error.hpp"
#include "vcons/gradcheck_suite.hpp"
#include "vcons/harness.hpp"
#include "vcons/model_io.hpp"
#include "vcons/models.hpp"
#include "vcons/oracle.hpp"
#include "vcons/parallel.hpp"
#include "vcons/pool.hpp"

namespace {

using json = nlohmann::json;
using namespace vcons;

void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_config(const std::string& path) { return path.empty() ? json::object() : read_json_file(path); }

std::vector<const VideoRecord*> split_or_all(const Corpus& corpus, const std::string& split) {
  if (split.empty() || split == "all") {
    std::vector<const VideoRecord*> all;
    for (const auto& v : corpus) all.push_back(&v);
    return all;
  }
  return select_split(corpus, parse_split(split));
}

Corpus subset(const Corpus& corpus, const std::string& split) {
  Corpus out;
  for (const auto* v : split_or_all(corpus, split)) out.push_back(*v);
  return out;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string out, config;
  std::uint64_t seed = 1;
  std::optional<int> train, val, test;
  std::optional<double> noise;
};

int run_synth(const SynthArgs& a) {
  SynthSpec spec = a.config.empty() ? SynthSpec::defaults() : SynthSpec::from_json(read_json_file(a.config));
  spec.seed = a.seed;
  if (a.train) spec.train = *a.train;
  if (a.val) spec.val = *a.val;
  if (a.test) spec.test = *a.test;
  if (a.noise) spec.noise = *a.noise;
  spec.validate();
  save_corpus(synth_corpus(spec).corpus, a.out);
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  std::string arch, corpus, out, config, log;
  std::uint64_t seed = 1;
  std::optional<int> epochs;
};

int run_train(const TrainArgs& a) {
  json cfg_json = read_config(a.config);
  if (!a.arch.empty()) cfg_json["arch"] = a.arch;
  if (!cfg_json.contains("arch")) fail(ErrorKind::kUsage, "train needs --arch or an arch in --config");
  ModelConfig cfg = ModelConfig::from_json(cfg_json);
  if (a.epochs) cfg.epochs = *a.epochs;
  TrainedModel t = train_model(cfg, load_corpus(a.corpus), a.seed);
  save_model(*t.model, a.out);
  if (!a.log.empty()) write_json(a.log, t.log.to_json());
  return 0;
}

struct PoolArgs {
  std::string corpus, out_dir, config;
  std::uint64_t seed = 1;
  int size = 8;
  int workers = 1;
};

int run_train_pool(const PoolArgs& a) {
  const ModelConfig base = ModelConfig::from_json(read_config(a.config));
  const Corpus corpus = load_corpus(a.corpus);
  const auto members = desk_pool(a.size, a.seed, base);
  TrainedPool pool = train_pool(members, corpus, a.workers);
  std::filesystem::create_directories(a.out_dir);
  json logs = json::object();
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    save_model(*pool.models[i], (std::filesystem::path(a.out_dir) / (pool.ids[i] + ".json")).string());
    logs[pool.ids[i]] = pool.logs[i].to_json();
  }
  write_json((std::filesystem::path(a.out_dir) / "training_log.json").string(), logs);
  return 0;
}

// ---- generate -----------------------------------------------------------------

struct GenerateArgs {
  std::string corpus, out, split = "test", model_dir;
  std::vector<std::string> models;
  int workers = 1;
};

int run_generate(const GenerateArgs& a) {
  std::vector<std::pair<std::string, std::string>> specs;  // id, path
  for (const auto& m : a.models) {
    const auto eq = m.find('=');
    if (eq != std::string::npos) specs.emplace_back(m.substr(0, eq), m.substr(eq + 1));
    else specs.emplace_back(std::filesystem::path(m).stem().string(), m);
  }
  if (!a.model_dir.empty()) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(a.model_dir))
      if (e.path().extension() == ".json" && e.path().stem() != "training_log") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) specs.emplace_back(f.stem().string(), f.string());
  }
  if (specs.empty()) fail(ErrorKind::kUsage, "generate needs --model or --model-dir");
  std::vector<std::unique_ptr<CaptionModel>> owned;
  std::vector<NamedModel> named;
  for (const auto& [id, path] : specs) {
    owned.push_back(load_model(path));
    named.push_back({id, owned.back().get()});
  }
  const Corpus corpus = load_corpus(a.corpus);
  save_candidates(generate_candidates(named, split_or_all(corpus, a.split), a.workers), a.out);
  return 0;
}

// ---- consensus ----------------------------------------------------------------

struct ConsensusArgs {
  std::string candidates, out, oracle, corpus, idf;
  int c = 3;
  int workers = 1;
};

int run_consensus(const ConsensusArgs& a) {
  const auto rows = load_candidates(a.candidates);
  const auto pools = group_pools(rows);
  const IdfTable idf = a.idf.empty() ? candidate_idf(pools) : load_idf(a.idf);
  std::unique_ptr<OracleNet> oracle;
  Corpus corpus;
  std::map<std::string, const VideoRecord*> videos;
  if (!a.oracle.empty()) {
    if (a.corpus.empty()) fail(ErrorKind::kUsage, "--oracle needs --corpus for the video features");
    oracle = load_oracle(a.oracle);
    corpus = load_corpus(a.corpus);
    videos = index_by_id(corpus);
    for (const auto& [id, p] : pools)
      if (!videos.count(id)) fail(ErrorKind::kData, "video " + id + " not in corpus");
  }
  ConsensusOptions opts;
  opts.c = a.c;
  std::vector<const CandidatePool*> list;
  for (const auto& [id, p] : pools) list.push_back(&p);
  std::vector<ConsensusRecord> out(list.size());
  parallel_for(list.size(), a.workers, [&](std::size_t i) {
    const CandidatePool& pool = *list[i];
    std::optional<Comparator> cmp;
    if (oracle) cmp = make_comparator(*oracle, *videos.at(pool.video_id));
    out[i] = consensus_select(pool, idf, cmp ? &*cmp : nullptr, opts).to_record(pool);
  });
  save_consensus(out, a.out);
  return 0;
}

// ---- train-oracle -------------------------------------------------------------

struct OracleArgs {
  std::string candidates, corpus, out, config, idf, log;
  std::uint64_t seed = 1;
  std::optional<double> cross_ratio;
  std::optional<int> epochs;
};

int run_train_oracle(const OracleArgs& a) {
  OracleConfig cfg = OracleConfig::from_json(read_config(a.config));
  if (a.cross_ratio) cfg.cross_ratio = *a.cross_ratio;
  if (a.epochs) cfg.epochs = *a.epochs;
  const auto rows = load_candidates(a.candidates);
  const Corpus corpus = load_corpus(a.corpus);
  IdfTable idf;
  if (!a.idf.empty()) {
    idf = load_idf(a.idf);
  } else {
    std::vector<Document> docs;
    for (const auto* v : select_split(corpus, Split::kTrain)) docs.push_back(v->references());
    idf = build_idf(docs);
  }
  const auto pairs = make_training_pairs(rows, corpus, idf, cfg.cross_ratio, a.seed);
  TrainedOracle t = train_oracle(pairs, corpus, cfg, a.seed);
  save_oracle(*t.net, a.out);
  if (!a.log.empty())
    write_json(a.log, {{"pairs", pairs.size()}, {"steps", t.log.steps}, {"epoch_loss", t.log.epoch_loss},
                       {"train_accuracy", pair_accuracy(*t.net, pairs, corpus)}});
  return 0;
}

// ---- score / evaluate -----------------------------------------------------------

struct ScoreArgs {
  std::string candidates, consensus, corpus, out, model;
  int workers = 1;
};

int run_score(const ScoreArgs& a) {
  if (a.candidates.empty() == a.consensus.empty())
    fail(ErrorKind::kUsage, "score needs exactly one of --candidates or --consensus");
  std::map<std::string, Selection> systems;
  if (!a.candidates.empty()) {
    for (const auto& r : load_candidates(a.candidates)) {
      if (!a.model.empty() && r.model_id != a.model) continue;
      systems[r.model_id][r.video_id] = tokenize(r.sentence);
    }
    if (systems.empty()) fail(ErrorKind::kData, "no candidates to score");
  } else {
    systems["consensus"] = selection_of(load_consensus(a.consensus));
  }
  const Corpus corpus = load_corpus(a.corpus);
  const auto all_refs = reference_map(corpus);
  ScoreOptions opts;
  opts.workers = a.workers;
  json out = json::object();
  for (const auto& [name, sel] : systems) {
    std::map<std::string, std::vector<Sentence>> refs;
    for (const auto& [id, s] : sel) {
      auto it = all_refs.find(id);
      if (it != all_refs.end()) refs.emplace(id, it->second);
    }
    const MetricReport report = corpus_scores(sel, refs, opts);
    out[name] = report.to_json();
    std::cout << name << "\n" << report.to_text();
  }
  if (!a.out.empty()) write_json(a.out, out);
  return 0;
}

struct EvaluateArgs {
  std::string candidates, corpus, out, text;
  std::vector<std::string> consensus;
  bool upper_bound = false;
  int workers = 1;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto rows = load_candidates(a.candidates);
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<std::pair<std::string, Selection>> selections;
  for (const auto& c : a.consensus) {
    const auto eq = c.find('=');
    const std::string name = eq == std::string::npos ? std::filesystem::path(c).stem().string() : c.substr(0, eq);
    const std::string path = eq == std::string::npos ? c : c.substr(eq + 1);
    selections.emplace_back(name, selection_of(load_consensus(path)));
  }
  if (a.upper_bound) {
    const auto pools = group_pools(rows);
    selections.emplace_back("Best vs ground truth", ground_truth_selection(pools, corpus));
    selections.emplace_back("Worst vs ground truth", ground_truth_selection(pools, corpus, true));
  }
  ScoreOptions opts;
  opts.workers = a.workers;
  const EvaluationTable table = evaluate(rows, selections, corpus, opts);
  const std::string text = table.to_text();
  std::cout << text;
  if (!a.out.empty()) write_json(a.out, table.to_json());
  if (!a.text.empty()) write_text_file(a.text, text);
  return 0;
}

struct HumanArgs {
  std::string corpus, out, split;
  int workers = 1;
};

int run_human(const HumanArgs& a) {
  ScoreOptions opts;
  opts.workers = a.workers;
  const HumanAgreement h = human_agreement(subset(load_corpus(a.corpus), a.split), opts);
  for (const auto& id : h.skipped) std::cerr << "warning: video " << id << " has fewer than two annotations\n";
  std::cout << h.to_text();
  if (!a.out.empty()) write_json(a.out, h.to_json());
  return 0;
}

struct RankArgs {
  std::string candidates, corpus, out, idf;
  int workers = 1;
};

int run_rank(const RankArgs& a) {
  ScoreOptions opts;
  opts.workers = a.workers;
  std::optional<IdfTable> idf;
  if (!a.idf.empty()) idf = load_idf(a.idf);
  const RankReport r =
      rank_diagnostics(load_candidates(a.candidates), load_corpus(a.corpus), idf ? &*idf : nullptr, opts);
  std::cout << r.to_text();
  if (!a.out.empty()) write_json(a.out, r.to_json());
  return 0;
}

struct GradArgs {
  std::uint64_t seed = 1;
  std::string out;
};

int run_gradcheck(const GradArgs& a) {
  auto rows = op_gradchecks(a.seed);
  auto models = model_gradchecks(a.seed);
  rows.insert(rows.end(), models.begin(), models.end());
  bool ok = true;
  json out = json::array();
  std::printf("%-20s %-14s %-10s %s\n", "check", "max rel err", "tolerance", "result");
  for (const auto& r : rows) {
    std::printf("%-20s %-14.3e %-10.0e %s\n", r.name.c_str(), r.max_rel_err, r.tolerance, r.pass() ? "ok" : "FAIL");
    ok = ok && r.pass();
    out.push_back({{"check", r.name}, {"max_rel_err", r.max_rel_err}, {"tolerance", r.tolerance}, {"pass", r.pass()}});
  }
  if (!a.out.empty()) write_json(a.out, out);
  return ok ? 0 : 3;
}

struct IdfArgs {
  std::string corpus, out, split = "train";
};

int run_idf(const IdfArgs& a) {
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<Document> docs;
  for (const auto* v : split_or_all(corpus, a.split))
    if (!v->annotations.empty()) docs.push_back(v->references());
  save_idf(build_idf(docs), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vcons: consensus selection of video descriptions"};
  app.require_subcommand(1);
  int code = 0;
  std::function<int()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus");
  s->add_option("--out", synth.out)->required();
  s->add_option("--seed", synth.seed);
  s->add_option("--config", synth.config, "SynthSpec JSON");
  s->add_option("--train", synth.train);
  s->add_option("--val", synth.val);
  s->add_option("--test", synth.test);
  s->add_option("--noise", synth.noise);
  s->callback([&] { action = [&] { return run_synth(synth); }; });

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one captioning model");
  t->add_option("--arch", train.arch);
  t->add_option("--corpus", train.corpus)->required();
  t->add_option("--out", train.out)->required();
  t->add_option("--seed", train.seed);
  t->add_option("--config", train.config, "ModelConfig JSON");
  t->add_option("--epochs", train.epochs);
  t->add_option("--log", train.log, "Write the training log here");
  t->callback([&] { action = [&] { return run_train(train); }; });

  PoolArgs pool;
  auto* tp = app.add_subcommand("train-pool", "Train the desk-scale model pool into a directory");
  tp->add_option("--corpus", pool.corpus)->required();
  tp->add_option("--out", pool.out_dir)->required();
  tp->add_option("--seed", pool.seed);
  tp->add_option("--size", pool.size);
  tp->add_option("--config", pool.config, "Base ModelConfig JSON");
  tp->add_option("--workers", pool.workers);
  tp->callback([&] { action = [&] { return run_train_pool(pool); }; });

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Greedy-decode candidates with a set of models");
  g->add_option("--corpus", gen.corpus)->required();
  g->add_option("--model", gen.models, "Model file, optionally id=path");
  g->add_option("--model-dir", gen.model_dir, "Directory of model files");
  g->add_option("--split", gen.split, "train, val, test or all");
  g->add_option("--out", gen.out)->required();
  g->add_option("--workers", gen.workers);
  g->callback([&] { action = [&] { return run_generate(gen); }; });

  ConsensusArgs cons;
  auto* c = app.add_subcommand("consensus", "Select one candidate per video");
  c->add_option("--candidates", cons.candidates)->required();
  c->add_option("--out", cons.out)->required();
  c->add_option("--oracle", cons.oracle, "Oracle model for phase 2");
  c->add_option("--corpus", cons.corpus, "Corpus with video features (needed with --oracle)");
  c->add_option("--idf", cons.idf, "External IDF table for phase 1");
  c->add_option("--c", cons.c, "Top-C size");
  c->add_option("--workers", cons.workers);
  c->callback([&] { action = [&] { return run_consensus(cons); }; });

  OracleArgs orc;
  auto* o = app.add_subcommand("train-oracle", "Train the pairwise oracle");
  o->add_option("--candidates", orc.candidates, "Candidates on training videos")->required();
  o->add_option("--corpus", orc.corpus)->required();
  o->add_option("--out", orc.out)->required();
  o->add_option("--seed", orc.seed);
  o->add_option("--config", orc.config, "OracleConfig JSON");
  o->add_option("--idf", orc.idf, "IDF table for pair labels");
  o->add_option("--cross-ratio", orc.cross_ratio);
  o->add_option("--epochs", orc.epochs);
  o->add_option("--log", orc.log);
  o->callback([&] { action = [&] { return run_train_oracle(orc); }; });

  ScoreArgs score;
  auto* sc = app.add_subcommand("score", "Metric report for candidates or a consensus file");
  sc->add_option("--candidates", score.candidates);
  sc->add_option("--consensus", score.consensus);
  sc->add_option("--corpus", score.corpus)->required();
  sc->add_option("--model", score.model, "Only this model_id");
  sc->add_option("--out", score.out);
  sc->add_option("--workers", score.workers);
  sc->callback([&] { action = [&] { return run_score(score); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Table of per-model, mean and consensus scores");
  e->add_option("--candidates", ev.candidates)->required();
  e->add_option("--corpus", ev.corpus)->required();
  e->add_option("--consensus", ev.consensus, "Consensus output, optionally name=path");
  e->add_flag("--upper-bound", ev.upper_bound, "Add best/worst selections against ground truth");
  e->add_option("--out", ev.out);
  e->add_option("--text", ev.text);
  e->add_option("--workers", ev.workers);
  e->callback([&] { action = [&] { return run_evaluate(ev); }; });

  HumanArgs human;
  auto* h = app.add_subcommand("human-agreement", "Leave-one-out scores of the human annotations");
  h->add_option("--corpus", human.corpus)->required();
  h->add_option("--split", human.split);
  h->add_option("--out", human.out);
  h->add_option("--workers", human.workers);
  h->callback([&] { action = [&] { return run_human(human); }; });

  RankArgs rank;
  auto* r = app.add_subcommand("rank-diagnostics", "Consensus order versus ground-truth order");
  r->add_option("--candidates", rank.candidates)->required();
  r->add_option("--corpus", rank.corpus)->required();
  r->add_option("--idf", rank.idf);
  r->add_option("--out", rank.out);
  r->add_option("--workers", rank.workers);
  r->callback([&] { action = [&] { return run_rank(rank); }; });

  GradArgs grad;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and model");
  gc->add_option("--seed", grad.seed);
  gc->add_option("--out", grad.out);
  gc->callback([&] { action = [&] { return run_gradcheck(grad); }; });

  IdfArgs idf;
  auto* i = app.add_subcommand("idf", "Build an IDF table from corpus annotations");
  i->add_option("--corpus", idf.corpus)->required();
  i->add_option("--split", idf.split, "train, val, test or all");
  i->add_option("--out", idf.out)->required();
  i->callback([&] { action = [&] { return run_idf(idf); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 1;
  }
  try {
    code = action();
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const nlohmann::json::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return code;
}
