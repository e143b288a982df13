// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "test_support.hpp"
#include "vcons/consensus.hpp"
#include "vcons/error.hpp"
#include "vcons/gradcheck_suite.hpp"
#include "vcons/harness.hpp"
#include "vcons/metrics.hpp"
#include "vcons/models.hpp"
#include "vcons/oracle.hpp"
#include "vcons/pool.hpp"
#include "vcons/random.hpp"
#include "vcons/vocab.hpp"

namespace vcons {
namespace {

using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: metric fixtures ----------------------------------------------------------

Outcome metric_fixtures() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto fx = testing::load_fixture("metric_fixtures.json");
  double worst = 0.0;
  std::string worst_name;
  int n = 0;
  for (const auto& f : fx["metrics"]) {
    const Sentence cand = tokenize(f["candidate"].get<std::string>());
    const auto refs = testing::sentences(f["refs"].get<std::vector<std::string>>());
    const auto docs = testing::documents(f["corpus"]);
    const IdfTable idf = build_idf(docs);
    CiderOptions plain;
    plain.plain = true;
    MeteorOptions stem;
    stem.stem = true;
    const std::pair<std::string, double> got[] = {
        {"cider_d", cider_d(cand, refs, idf)},         {"cider_plain", cider_d(cand, refs, idf, plain)},
        {"bleu4", bleu(cand, refs)},                   {"bleu2", bleu(cand, refs, 2)},
        {"rouge_l", rouge_l(cand, refs)},              {"meteor", meteor_lite(cand, refs)},
        {"meteor_stem", meteor_lite(cand, refs, stem)}};
    for (const auto& [key, value] : got) {
      const double err = std::abs(value - f[key].get<double>());
      if (err >= worst) worst = err, worst_name = f["name"].get<std::string>() + "/" + key;
    }
    ++n;
  }
  const double secs = seconds_since(t0);
  return {n >= 20 && worst < 1e-6 && secs < 1.0,
          fmt::format("{} fixtures, max abs err {:.2e} at {}, {:.3f}s", n, worst, worst_name, secs)};
}

// ---- 2: maxima and minima --------------------------------------------------------

Outcome metric_extremes() {
  const std::vector<std::string> raw = {"a man is riding a bike", "two dogs play in the snow",
                                        "the woman slices a red onion", "kids play football outside", "a b c d e f g h i j k l"};
  std::vector<Document> docs;
  for (const auto& r : raw) docs.push_back({tokenize(r)});
  docs.push_back({tokenize("nothing in common here")});
  const IdfTable idf = build_idf(docs);
  int failures = 0;
  std::string detail;
  for (const auto& r : raw) {
    const Sentence s = tokenize(r);
    const Sentence refs[] = {s};
    const double c = cider_d(s, refs, idf), b = bleu(s, refs), rl = rouge_l(s, refs);
    // Every sentence here has at least one n-gram of each order.
    if (c != 10.0 || b != 1.0 || rl != 1.0) {
      ++failures;
      detail += fmt::format(" [{}: {} {} {}]", r, c, b, rl);
    }
  }
  const std::pair<std::string, std::string> disjoint[] = {{"green apples fall", "a man is running"},
                                                          {"kids", "two dogs play in the snow"},
                                                          {"x y z w", "a b c d e f g h i j k l"}};
  for (const auto& [c_raw, r_raw] : disjoint) {
    const Sentence c = tokenize(c_raw);
    const Sentence refs[] = {tokenize(r_raw)};
    const BleuStats st = bleu_stats(c, refs);
    bool zero_prec = true;
    for (int n = 1; n <= kMaxOrder; ++n) zero_prec = zero_prec && st.precision(n) == 0.0;
    if (cider_d(c, refs, idf) != 0.0 || !zero_prec || rouge_l(c, refs) != 0.0) {
      ++failures;
      detail += fmt::format(" [disjoint {}]", c_raw);
    }
  }
  const Sentence empty;
  const Sentence refs[] = {tokenize("a man")};
  if (cider_d(empty, refs, idf) != 0.0) ++failures, detail += " [empty candidate]";
  return {failures == 0, fmt::format("{} exact-match, {} disjoint, {} failures{}", raw.size(), 3, failures, detail)};
}

// ---- 3: gradient suite -----------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rows = op_gradchecks(1);
  const std::size_t ops = rows.size();
  auto models = model_gradchecks(1);
  rows.insert(rows.end(), models.begin(), models.end());
  const double secs = seconds_since(t0);
  double worst_op = 0.0, worst_model = 0.0;
  std::string failed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (i < ops ? worst_op : worst_model) = std::max(i < ops ? worst_op : worst_model, rows[i].max_rel_err);
    if (!rows[i].pass()) failed += " " + rows[i].name;
  }
  return {failed.empty() && secs < 30.0,
          fmt::format("{} ops (max {:.2e}), {} models (max {:.2e}), {:.1f}s{}", ops, worst_op, models.size(),
                      worst_model, secs, failed.empty() ? "" : ", failed:" + failed)};
}

// ---- 4: overfit one example ------------------------------------------------------

Outcome overfit_all() {
  const auto t0 = std::chrono::steady_clock::now();
  const Sentence target = tokenize("a man is riding a red bike");
  const Sentence vocab_src[] = {target, tokenize("the woman cooks pasta")};
  const Vocabulary vocab = Vocabulary::build(vocab_src);
  const LabelVocabulary labels = LabelVocabulary::build(vocab_src, 1);
  VideoRecord video = testing::random_video("v0", 16, 16, 5);
  video.extra_features["audio"] = {0.3, -0.2, 0.5, 0.1};
  video.annotations = {target.str()};
  std::string detail;
  bool all = true;
  for (Arch arch : all_archs()) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.hidden = 32;
    cfg.embed = 16;
    cfg.top_k = 4;
    cfg.tcn.blocks = 2;
    cfg.tcn.channels = 32;
    cfg.feature_dim = 16;
    cfg.extra_features = {"audio"};
    cfg.extra_dims = {{"audio", 4}};
    cfg.seed = 7;
    CaptionModel model(cfg, vocab, arch == Arch::kTwoStage ? labels : LabelVocabulary{});
    const OverfitResult r = overfit_example(model, video, target, 500, 0.05, 1e-3);
    const Sentence decoded = model.caption(video);
    const bool ok = r.final_loss < 0.05 && decoded == target;
    all = all && ok;
    detail += fmt::format(" {}={}@{}{}", arch_name(arch), fmt::format("{:.4f}", r.final_loss), r.steps,
                          decoded == target ? "" : "(decoded '" + decoded.str() + "')");
  }
  const double secs = seconds_since(t0);
  return {all && secs < 120.0, fmt::format("{:.1f}s;{}", secs, detail)};
}

// ---- 5: planted cluster ----------------------------------------------------------

Outcome planted_cluster() {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthSpec spec = SynthSpec::defaults();
  const int trials = 200;
  const std::vector<std::string> outsiders_vocab = {"zebra", "violin", "quietly", "orbit", "marble", "lantern",
                                                    "copper", "whisper", "glacier", "ember", "tundra", "velvet"};
  Rng rng(20251015);
  std::map<std::string, CandidatePool> pools;
  std::map<std::string, std::set<std::string>> cluster_ids;
  for (int t = 0; t < trials; ++t) {
    const Triple meaning{static_cast<int>(rng.below(spec.subjects.size())),
                         static_cast<int>(rng.below(spec.verbs.size())),
                         static_cast<int>(rng.below(spec.objects.size()))};
    std::vector<int> templates(num_templates());
    for (int i = 0; i < num_templates(); ++i) templates[i] = i;
    rng.shuffle(templates);
    std::vector<std::pair<Sentence, bool>> members;
    for (int i = 0; i < 5; ++i) members.push_back({tokenize(render_template(spec, meaning, templates[i])), true});
    for (int i = 0; i < 3; ++i) {
      std::string s;
      const int len = 3 + static_cast<int>(rng.below(4));
      for (int w = 0; w < len; ++w) s += (w ? " " : "") + outsiders_vocab[rng.below(outsiders_vocab.size())];
      members.push_back({tokenize(s), false});
    }
    rng.shuffle(members);
    const std::string vid = fmt::format("trial{:03d}", t);
    std::vector<PoolCandidate> cands;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::string mid = fmt::format("m{}", i);
      cands.push_back({mid, members[i].first});
      if (members[i].second) cluster_ids[vid].insert(mid);
    }
    pools.emplace(vid, CandidatePool::make(vid, std::move(cands)));
  }
  const IdfTable idf = candidate_idf(pools);
  int hits = 0;
  for (const auto& [vid, pool] : pools) {
    const ConsensusResult r = consensus_select(pool, idf);
    hits += cluster_ids[vid].count(pool.candidates[r.selected].model_id) ? 1 : 0;
  }
  const double rate = static_cast<double>(hits) / trials;
  const double secs = seconds_since(t0);
  return {rate >= 0.99 && secs < 10.0, fmt::format("{}/{} cluster selections ({:.1f}%), {:.2f}s", hits, trials,
                                                   100.0 * rate, secs)};
}

// ---- 6 and 7: desk-scale pipeline -----------------------------------------------

struct DeskRun {
  std::uint64_t seed = 0;
  Corpus corpus;
  TrainedPool pool;
  std::vector<CandidateRecord> test_candidates;
  EvaluationTable table;
};

std::vector<ConsensusRecord> run_consensus(const std::vector<CandidateRecord>& rows, const Corpus& corpus,
                                           const OracleNet* oracle) {
  const auto pools = group_pools(rows);
  const IdfTable idf = candidate_idf(pools);
  const auto videos = index_by_id(corpus);
  std::vector<ConsensusRecord> out;
  for (const auto& [vid, pool] : pools) {
    std::optional<Comparator> cmp;
    if (oracle) cmp = make_comparator(*oracle, *videos.at(vid));
    out.push_back(consensus_select(pool, idf, cmp ? &*cmp : nullptr).to_record(pool));
  }
  return out;
}

DeskRun desk_run(std::uint64_t seed) {
  DeskRun run;
  run.seed = seed;
  SynthSpec spec = SynthSpec::defaults();
  spec.train = 200;
  spec.test = 40;
  spec.seed = seed;
  run.corpus = synth_corpus(spec).corpus;
  const auto members = desk_pool(8, seed);
  run.pool = train_pool(members, run.corpus);
  const auto test = select_split(run.corpus, Split::kTest);
  const auto named = run.pool.named();
  run.test_candidates = generate_candidates(named, test);
  const auto consensus = run_consensus(run.test_candidates, run.corpus, nullptr);
  const auto pools = group_pools(run.test_candidates);
  run.table = evaluate(run.test_candidates,
                       {{"Consensus", selection_of(consensus)},
                        {"Best vs ground truth", ground_truth_selection(pools, run.corpus)}},
                       run.corpus);
  return run;
}

Outcome desk_reproduction(std::vector<DeskRun>& runs) {
  const auto t0 = std::chrono::steady_clock::now();
  bool all = true;
  std::string detail;
  std::set<std::string> archs;
  for (std::uint64_t seed : {1, 2, 3}) {
    runs.push_back(desk_run(seed));
    const auto& t = runs.back().table;
    const double mean = t.mean.cider, cons = t.selections[0].cider, best = t.selections[1].cider;
    const bool ok = cons >= mean && best >= cons;
    all = all && ok && t.models.size() >= 8;
    for (const auto& m : runs.back().pool.models) archs.insert(arch_name(m->config().arch));
    detail += fmt::format(" seed{}: mean {:.1f} <= consensus {:.1f} <= best {:.1f} ({} models){};", seed, 100 * mean,
                          100 * cons, 100 * best, t.models.size(), ok ? "" : " VIOLATED");
  }
  // seq2seq_attn is a variant of seq2seq; the four families must all be present.
  const bool families = archs.count("tcn") && archs.count("two_wings") && archs.count("two_stage") &&
                        (archs.count("seq2seq") || archs.count("seq2seq_attn"));
  const double secs = seconds_since(t0);
  return {all && families && secs < 600.0, fmt::format("{:.0f}s;{}", secs, detail)};
}

Outcome oracle_stage(const DeskRun& run, std::string& report) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto named = run.pool.named();
  const auto train = select_split(run.corpus, Split::kTrain);
  const auto test = select_split(run.corpus, Split::kTest);
  const auto train_candidates = generate_candidates(named, train);

  auto annotation_idf = [&](std::span<const VideoRecord* const> videos) {
    std::vector<Document> docs;
    for (const auto* v : videos) docs.push_back(v->references());
    return build_idf(docs);
  };
  OracleConfig cfg;
  cfg.seed = 11;
  const auto train_pairs = make_training_pairs(train_candidates, run.corpus, annotation_idf(train), 0.5, cfg.seed);
  const TrainedOracle trained = train_oracle(train_pairs, run.corpus, cfg, cfg.seed);
  const auto held_out = make_training_pairs(run.test_candidates, run.corpus, annotation_idf(test), 0.5, 99);
  const double acc = pair_accuracy(*trained.net, held_out, run.corpus);

  const auto phase1 = run_consensus(run.test_candidates, run.corpus, nullptr);
  const auto with_oracle = run_consensus(run.test_candidates, run.corpus, trained.net.get());
  const EvaluationTable table = evaluate(
      run.test_candidates, {{"Consensus", selection_of(phase1)}, {"Consensus+Oracle", selection_of(with_oracle)}},
      run.corpus);
  const double p1 = 100 * table.selections[0].cider, p2 = 100 * table.selections[1].cider;
  const double secs = seconds_since(t0);
  report = fmt::format("oracle improvement (non-binding): phase-1 {:.1f} -> with oracle {:.1f} ({:+.1f}){}", p1, p2,
                       p2 - p1, p2 > p1 ? "" : ", no improvement on this fixture");
  return {acc >= 0.8 && p2 >= p1 - 0.2 && secs < 300.0,
          fmt::format("{} train pairs, held-out accuracy {:.3f} on {} pairs, CIDEr {:.1f} vs phase-1 {:.1f}, {:.0f}s",
                      train_pairs.size(), acc, held_out.size(), p2, p1, secs)};
}

// ---- 8: tournament invariants ----------------------------------------------------

Outcome tournament_invariants() {
  Rng rng(8);
  int failures = 0, tournaments = 0;
  for (std::size_t c = 2; c <= 8; ++c) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<PoolCandidate> cands;
      std::vector<double> phase1;
      std::vector<double> strength;
      for (std::size_t i = 0; i < c; ++i) {
        cands.push_back({fmt::format("m{}", i), tokenize(fmt::format("sentence {}", i))});
        phase1.push_back(rng.uniform());
        strength.push_back(rng.uniform());
      }
      std::map<std::string, double> by_id;
      for (std::size_t i = 0; i < c; ++i) by_id[cands[i].model_id] = strength[i];
      const Comparator stub = [&](const PoolCandidate& a, const PoolCandidate& b) {
        return by_id[a.model_id] > by_id[b.model_id] ? 1.0 : 0.0;
      };
      const TournamentResult r = tournament_rank(cands, phase1, stub);
      int total = 0;
      for (int v : r.victories) total += v;
      std::vector<std::size_t> expect(c);
      for (std::size_t i = 0; i < c; ++i) expect[i] = i;
      std::sort(expect.begin(), expect.end(), [&](std::size_t a, std::size_t b) { return strength[a] > strength[b]; });
      if (total != static_cast<int>(c * (c - 1) / 2) || r.order != expect) ++failures;
      ++tournaments;
    }
  }
  // Exact symmetry of the oracle's symmetrized probability.
  const SynthSpec spec = SynthSpec::defaults();
  std::vector<Sentence> pool;
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < num_templates(); ++t) pool.push_back(tokenize(render_template(spec, {s, s % 3, s % 2}, t)));
  const Vocabulary vocab = Vocabulary::build(pool);
  OracleConfig cfg;
  cfg.embed = 8, cfg.hidden = 8, cfg.video_proj = 8, cfg.fc1 = 8, cfg.fc2 = 4, cfg.feature_dim = 6;
  OracleNet net(cfg, vocab);
  for (const auto& name : net.params().names())
    for (double& x : net.params().get(name).data()) x = rng.uniform(-1.0, 1.0);
  const VideoRecord video = testing::random_video("v", 4, 6, 3);
  int pairs = 0, asym = 0;
  for (std::size_t i = 0; i < pool.size(); i += 2) {
    for (std::size_t j = 1; j < pool.size(); j += 3) {
      const double ab = net.compare(video, pool[i], pool[j]), ba = net.compare(video, pool[j], pool[i]);
      if (ab + ba != 1.0) ++asym;
      ++pairs;
    }
  }
  const double self = net.compare(video, pool[0], pool[0]);
  return {failures == 0 && asym == 0 && self == 0.5,
          fmt::format("{} stub tournaments ({} failures), {} compare pairs ({} asymmetric), compare(A,A)={}",
                      tournaments, failures, pairs, asym, self)};
}

// ---- 9: human agreement ----------------------------------------------------------

Outcome human_harness() {
  const auto fx = testing::load_fixture("metric_fixtures.json")["human"];
  Corpus corpus;
  for (const auto& [id, anns] : fx["corpus"].items()) {
    VideoRecord v = testing::random_video(id, 2, 2, 1);
    v.annotations = anns.get<std::vector<std::string>>();
    corpus.push_back(v);
  }
  const HumanAgreement h = human_agreement(corpus);
  auto values = [](const MetricRow& r) { return std::vector<double>{r.cider, r.bleu4, r.rouge_l, r.meteor}; };
  double worst = 0.0;
  const std::pair<const char*, const MetricRow*> parts[] = {
      {"mean", &h.mean}, {"std", &h.stdev}, {"best", &h.best}, {"worst", &h.worst}};
  for (const auto& [key, row] : parts) {
    const auto got = values(*row);
    const auto want = fx[key].get<std::vector<double>>();
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  const bool counts = h.pairs == fx["pairs"].get<std::size_t>() && h.videos == fx["videos"].get<std::size_t>() &&
                      h.skipped == fx["skipped"].get<std::vector<std::string>>();

  Corpus same;
  for (int i = 0; i < 4; ++i) {
    VideoRecord v = testing::random_video(fmt::format("s{}", i), 2, 2, 1);
    v.annotations = std::vector<std::string>(3 + i, fmt::format("a person does thing number {}", i));
    same.push_back(v);
  }
  const HumanAgreement hs = human_agreement(same);
  const bool identical = hs.mean.cider == 10.0 && hs.stdev.cider == 0.0;
  return {worst < 1e-9 && counts && identical,
          fmt::format("max abs err {:.2e} over mean/std/best/worst, identical corpus CIDEr {} +- {}", worst,
                      hs.mean.cider, hs.stdev.cider)};
}

// ---- 10: determinism -------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no command-line tool given (--cli)"};
  const auto t0 = std::chrono::steady_clock::now();
  TempDir tmp;
  const auto base = tmp.file("base.json");
  write_text_file(base, R"({"hidden": 16, "embed": 8, "epochs": 2, "tcn": {"blocks": 1, "channels": 8}})");
  const auto ocfg = tmp.file("oracle_cfg.json");
  write_text_file(ocfg, R"({"embed": 8, "hidden": 8, "video_proj": 8, "fc1": 8, "fc2": 4, "epochs": 1})");
  // Each run writes into its own directory; the listed files must be byte-identical.
  auto pipeline = [&](const std::string& dir, int workers) {
    std::filesystem::create_directories(dir);
    const std::string w = fmt::format(" --workers {}", workers);
    int rc = 0;
    rc |= run_cli(cli, "synth --out " + dir + "/corpus.jsonl --seed 4 --train 24 --val 4 --test 8");
    rc |= run_cli(cli, "train-pool --corpus " + dir + "/corpus.jsonl --out " + dir + "/pool --seed 4 --size 5 --config " +
                           base + w);
    rc |= run_cli(cli, "generate --corpus " + dir + "/corpus.jsonl --model-dir " + dir + "/pool --split test --out " +
                           dir + "/cand.jsonl" + w);
    rc |= run_cli(cli, "generate --corpus " + dir + "/corpus.jsonl --model-dir " + dir + "/pool --split train --out " +
                           dir + "/cand_train.jsonl" + w);
    rc |= run_cli(cli, "train-oracle --candidates " + dir + "/cand_train.jsonl --corpus " + dir +
                           "/corpus.jsonl --out " + dir + "/oracle.json --seed 4 --config " + ocfg + " --log " + dir +
                           "/oracle_log.json");
    rc |= run_cli(cli, "consensus --candidates " + dir + "/cand.jsonl --out " + dir + "/cons.jsonl" + w);
    rc |= run_cli(cli, "consensus --candidates " + dir + "/cand.jsonl --out " + dir + "/cons_oracle.jsonl --oracle " +
                           dir + "/oracle.json --corpus " + dir + "/corpus.jsonl" + w);
    rc |= run_cli(cli, "evaluate --candidates " + dir + "/cand.jsonl --corpus " + dir + "/corpus.jsonl --consensus " +
                           dir + "/cons.jsonl --upper-bound --out " + dir + "/eval.json --text " + dir + "/eval.txt" + w);
    rc |= run_cli(cli, "score --consensus " + dir + "/cons_oracle.jsonl --corpus " + dir + "/corpus.jsonl --out " +
                           dir + "/score.json" + w);
    rc |= run_cli(cli, "human-agreement --corpus " + dir + "/corpus.jsonl --out " + dir + "/human.json" + w);
    rc |= run_cli(cli, "rank-diagnostics --candidates " + dir + "/cand.jsonl --corpus " + dir + "/corpus.jsonl --out " +
                           dir + "/rank.json" + w);
    rc |= run_cli(cli, "idf --corpus " + dir + "/corpus.jsonl --split train --out " + dir + "/idf.json");
    return rc;
  };
  const std::string runs[] = {tmp.file("w1a"), tmp.file("w1b"), tmp.file("w2")};
  int rc = pipeline(runs[0], 1);
  rc |= pipeline(runs[1], 1);
  rc |= pipeline(runs[2], 2);
  int compared = 0, differing = 0;
  std::string diff;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(runs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), runs[0]);
    const std::string ref = testing::read_file(entry.path());
    for (int k = 1; k < 3; ++k) {
      ++compared;
      if (testing::read_file(std::filesystem::path(runs[k]) / rel) != ref) ++differing, diff += " " + rel.string();
    }
  }
  const double secs = seconds_since(t0);
  return {rc == 0 && compared >= 2 * 12 && differing == 0,
          fmt::format("{} file comparisons across reruns and --workers 1/2, {} differ{}, exit status {}, {:.0f}s",
                      compared, differing, diff, rc, secs)};
}

}  // namespace
}  // namespace vcons

int main(int argc, char** argv) {
  using namespace vcons;
  CLI::App app{"vcons acceptance checks"};
  std::vector<int> only;
  std::string cli;
  app.add_option("--criterion", only, "Run only these criteria (1-10)");
  app.add_option("--cli", cli, "Path to the vcons executable");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  std::vector<DeskRun> desk;
  std::string oracle_report;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_fixtures},
      {"metric maxima and minima", metric_extremes},
      {"gradient suite", gradient_suite},
      {"overfit one example", overfit_all},
      {"planted-cluster consensus", planted_cluster},
      {"desk-scale consensus reproduction", [&] { return desk_reproduction(desk); }},
      {"oracle stage",
       [&] {
         if (desk.empty()) desk.push_back(desk_run(1));
         return oracle_stage(desk.front(), oracle_report);
       }},
      {"tournament invariants", tournament_invariants},
      {"human-agreement harness", human_harness},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    if (!wanted(k)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    fmt::print("criterion {:2d} {:<36} {}  {}\n", k, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail);
    if (k == 7 && !oracle_report.empty()) fmt::print("             {}\n", oracle_report);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
