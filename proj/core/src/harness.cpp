#include "vcons/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "vcons/error.hpp"
#include "vcons/parallel.hpp"

namespace vcons {

using json = nlohmann::json;

namespace {

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

std::string row_text(const std::string& name, const std::vector<std::string>& cells, std::size_t width) {
  std::string line = name;
  line.resize(std::max(width, name.size()) + 2, ' ');
  for (const auto& c : cells) {
    std::string cell = c;
    if (cell.size() < 14) cell.insert(cell.begin(), 14 - cell.size(), ' ');
    line += cell;
  }
  return line + "\n";
}

std::vector<std::string> cells_of(const MetricRow& r) {
  return {fmt1(r.cider), fmt1(r.meteor), fmt1(r.rouge_l), fmt1(r.bleu4)};
}

std::string header(std::size_t width) { return row_text("", {"CIDEr-D", "METEOR-lite", "ROUGE-L", "BLEU-4"}, width); }

// Mean and population standard deviation of each metric column.
std::pair<MetricRow, MetricRow> summarize(const std::vector<MetricRow>& rows) {
  MetricRow mean{"MEAN"}, sd{"STD"};
  if (rows.empty()) return {mean, sd};
  const double n = double(rows.size());
  auto col = [&](double MetricRow::*f, double& m, double& s) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r.*f;
    m = sum / n;
    double sq = 0.0;
    for (const auto& r : rows) sq += (r.*f - m) * (r.*f - m);
    s = std::sqrt(sq / n);
  };
  col(&MetricRow::cider, mean.cider, sd.cider);
  col(&MetricRow::bleu4, mean.bleu4, sd.bleu4);
  col(&MetricRow::rouge_l, mean.rouge_l, sd.rouge_l);
  col(&MetricRow::meteor, mean.meteor, sd.meteor);
  return {mean, sd};
}

std::map<std::string, std::vector<Sentence>> references_for(const std::set<std::string>& ids, const Corpus& corpus) {
  const auto by_id = index_by_id(corpus);
  std::map<std::string, std::vector<Sentence>> refs;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end() || it->second->annotations.empty()) {
      missing.push_back(id);
      continue;
    }
    refs.emplace(id, it->second->references());
  }
  if (!missing.empty()) {
    std::string msg = "no annotations for videos:";
    for (const auto& id : missing) msg += " " + id;
    fail(ErrorKind::kMissingReference, msg);
  }
  return refs;
}

IdfTable idf_of(const std::map<std::string, std::vector<Sentence>>& refs) {
  std::vector<Document> docs;
  for (const auto& [id, r] : refs) docs.push_back(r);
  return build_idf(docs);
}

}  // namespace

MetricRow MetricRow::of(std::string name, const MetricReport& r) {
  return {std::move(name), r.cider, r.bleu4_corpus, r.rouge_l, r.meteor_lite};
}

json MetricRow::to_json() const {
  return {{"name", name}, {"cider", cider}, {"bleu4", bleu4}, {"rouge_l", rouge_l}, {"meteor", meteor}};
}

json EvaluationTable::to_json() const {
  json m = json::array(), s = json::array();
  for (const auto& r : models) m.push_back(r.to_json());
  for (const auto& r : selections) s.push_back(r.to_json());
  return {{"models", m},
          {"mean", mean.to_json()},
          {"std", stdev.to_json()},
          {"best_individual", best_individual.to_json()},
          {"selections", s},
          {"videos", videos}};
}

std::string EvaluationTable::to_text() const {
  std::size_t width = 24;
  for (const auto& r : models) width = std::max(width, r.name.size());
  for (const auto& r : selections) width = std::max(width, r.name.size());
  std::string out = header(width);
  for (const auto& r : models) out += row_text(r.name, cells_of(r), width);
  std::vector<std::string> cells;
  const auto mc = cells_of(mean), sc = cells_of(stdev);
  for (std::size_t i = 0; i < mc.size(); ++i) cells.push_back(mc[i] + " +- " + sc[i]);
  out += row_text("MEAN", cells, width);
  out += row_text("Best individual (" + best_individual.name + ")", cells_of(best_individual), width);
  for (const auto& r : selections) out += row_text(r.name, cells_of(r), width);
  return out;
}

Selection selection_of(std::span<const ConsensusRecord> rows) {
  Selection s;
  for (const auto& r : rows) {
    if (!s.emplace(r.video_id, tokenize(r.selected)).second)
      fail(ErrorKind::kData, "duplicate consensus row for video " + r.video_id);
  }
  return s;
}

EvaluationTable evaluate(std::span<const CandidateRecord> candidates,
                         const std::vector<std::pair<std::string, Selection>>& selections, const Corpus& corpus,
                         const ScoreOptions& opts) {
  std::map<std::string, Selection> by_model;
  std::set<std::string> videos;
  for (const auto& c : candidates) {
    if (!by_model[c.model_id].emplace(c.video_id, tokenize(c.sentence)).second)
      fail(ErrorKind::kData, "duplicate candidate for model " + c.model_id + " on video " + c.video_id);
    videos.insert(c.video_id);
  }
  for (const auto& [name, sel] : selections)
    for (const auto& [id, s] : sel) videos.insert(id);
  if (videos.empty()) fail(ErrorKind::kData, "nothing to evaluate");

  auto check_coverage = [&](const std::string& name, const Selection& sel) {
    std::string missing;
    for (const auto& id : videos)
      if (!sel.count(id)) missing += " " + id;
    if (!missing.empty()) fail(ErrorKind::kData, name + " lacks videos:" + missing);
  };
  for (const auto& [model, sel] : by_model) check_coverage("model " + model, sel);
  for (const auto& [name, sel] : selections) check_coverage(name, sel);

  const auto refs = references_for(videos, corpus);
  const IdfTable idf = idf_of(refs);
  EvaluationTable t;
  t.videos = videos.size();
  for (const auto& [model, sel] : by_model) t.models.push_back(MetricRow::of(model, corpus_scores(sel, refs, idf, opts)));
  std::tie(t.mean, t.stdev) = summarize(t.models);
  if (!t.models.empty()) {
    t.best_individual = t.models.front();
    for (const auto& r : t.models)
      if (r.cider > t.best_individual.cider) t.best_individual = r;
  }
  for (const auto& [name, sel] : selections) t.selections.push_back(MetricRow::of(name, corpus_scores(sel, refs, idf, opts)));
  return t;
}

Selection ground_truth_selection(const std::map<std::string, CandidatePool>& pools, const Corpus& corpus, bool worst,
                                 const CiderOptions& opts) {
  std::set<std::string> ids;
  for (const auto& [id, p] : pools) ids.insert(id);
  const auto refs = references_for(ids, corpus);
  const IdfTable idf = idf_of(refs);
  Selection s;
  for (const auto& [id, pool] : pools)
    s.emplace(id, pool.candidates[best_against_gt(pool, refs.at(id), idf, worst, opts)].sentence);
  return s;
}

json HumanAgreement::to_json() const {
  return {{"mean", mean.to_json()}, {"std", stdev.to_json()}, {"best", best.to_json()}, {"worst", worst.to_json()},
          {"pairs", pairs},         {"videos", videos},       {"skipped", skipped}};
}

std::string HumanAgreement::to_text() const {
  const std::size_t width = 12;
  std::string out = header(width);
  std::vector<std::string> cells;
  const auto mc = cells_of(mean), sc = cells_of(stdev);
  for (std::size_t i = 0; i < mc.size(); ++i) cells.push_back(mc[i] + " +- " + sc[i]);
  out += row_text("Human avg", cells, width);
  out += row_text("Human worst", cells_of(worst), width);
  out += row_text("Human best", cells_of(best), width);
  out += "videos " + std::to_string(videos) + ", pairs " + std::to_string(pairs) + ", skipped " +
         std::to_string(skipped.size()) + "\n";
  return out;
}

HumanAgreement human_agreement(const Corpus& corpus, const ScoreOptions& opts) {
  std::vector<const VideoRecord*> used;
  HumanAgreement h;
  std::map<std::string, const VideoRecord*> sorted;
  for (const auto& v : corpus) sorted.emplace(v.video_id, &v);
  for (const auto& [id, v] : sorted) {
    if (v->annotations.size() < 2) h.skipped.push_back(id);
    else used.push_back(v);
  }
  if (used.empty()) fail(ErrorKind::kData, "no video has at least two annotations");
  std::vector<Document> docs;
  for (const auto* v : used) docs.push_back(v->references());
  const IdfTable idf = build_idf(docs);

  std::vector<std::vector<MetricRow>> per_video(used.size());
  parallel_for(used.size(), opts.workers, [&](std::size_t k) {
    const Document& anns = docs[k];
    std::vector<Sentence> rest;
    for (std::size_t i = 0; i < anns.size(); ++i) {
      rest.clear();
      for (std::size_t j = 0; j < anns.size(); ++j)
        if (j != i) rest.push_back(anns[j]);
      per_video[k].push_back({"", cider_d(anns[i], rest, idf, opts.cider), bleu(anns[i], rest),
                              rouge_l(anns[i], rest), meteor_lite(anns[i], rest, opts.meteor)});
    }
  });

  std::vector<MetricRow> all, bests, worsts;
  for (const auto& rows : per_video) {
    all.insert(all.end(), rows.begin(), rows.end());
    MetricRow b = rows.front(), w = rows.front();
    for (const auto& r : rows) {
      b.cider = std::max(b.cider, r.cider), w.cider = std::min(w.cider, r.cider);
      b.bleu4 = std::max(b.bleu4, r.bleu4), w.bleu4 = std::min(w.bleu4, r.bleu4);
      b.rouge_l = std::max(b.rouge_l, r.rouge_l), w.rouge_l = std::min(w.rouge_l, r.rouge_l);
      b.meteor = std::max(b.meteor, r.meteor), w.meteor = std::min(w.meteor, r.meteor);
    }
    bests.push_back(b);
    worsts.push_back(w);
  }
  std::tie(h.mean, h.stdev) = summarize(all);
  h.mean.name = "Human avg";
  h.stdev.name = "Human std";
  h.best = summarize(bests).first;
  h.best.name = "Human best";
  h.worst = summarize(worsts).first;
  h.worst.name = "Human worst";
  h.pairs = all.size();
  h.videos = used.size();
  return h;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::kShape, "spearman inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * double(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mean = 0.5 * double(n + 1);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

json RankReport::to_json() const {
  json rows = json::array();
  for (const auto& v : videos) {
    json r = {{"video_id", v.video_id},
              {"consensus_order", v.consensus_order},
              {"truth_order", v.truth_order},
              {"consensus_scores", v.consensus_scores},
              {"truth_scores", v.truth_scores}};
    r["spearman"] = v.correlation ? json(*v.correlation) : json(nullptr);
    rows.push_back(std::move(r));
  }
  return {{"videos", rows}, {"mean_spearman", mean_correlation}, {"correlated_videos", correlated}};
}

std::string RankReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  for (const auto& v : videos) {
    out << v.video_id << "\n  consensus:";
    for (const auto& m : v.consensus_order) out << " " << m;
    out << "\n  truth:    ";
    for (const auto& m : v.truth_order) out << " " << m;
    if (v.correlation) {
      std::snprintf(buf, sizeof(buf), "%.3f", *v.correlation);
      out << "\n  spearman: " << buf << "\n";
    } else {
      out << "\n  spearman: undefined\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "%.3f", mean_correlation);
  out << "mean spearman " << buf << " over " << correlated << " of " << videos.size() << " videos\n";
  return out.str();
}

RankReport rank_diagnostics(std::span<const CandidateRecord> candidates, const Corpus& corpus,
                            const IdfTable* phase1_idf, const ScoreOptions& opts) {
  const auto pools = group_pools(candidates);
  std::set<std::string> ids;
  for (const auto& [id, p] : pools) ids.insert(id);
  const auto refs = references_for(ids, corpus);
  const IdfTable truth_idf = idf_of(refs);
  const IdfTable cand_idf = phase1_idf ? IdfTable{} : candidate_idf(pools);
  const IdfTable& p1_idf = phase1_idf ? *phase1_idf : cand_idf;

  std::vector<const CandidatePool*> list;
  for (const auto& [id, p] : pools) list.push_back(&p);
  RankReport report;
  report.videos.resize(list.size());
  parallel_for(list.size(), opts.workers, [&](std::size_t k) {
    const CandidatePool& pool = *list[k];
    VideoRanking& v = report.videos[k];
    v.video_id = pool.video_id;
    v.consensus_scores = phase1_scores(pool, p1_idf, opts.cider).value_or(std::vector<double>(pool.size(), 0.0));
    for (const auto& c : pool.candidates) v.truth_scores.push_back(cider_d(c.sentence, refs.at(pool.video_id), truth_idf, opts.cider));
    for (std::size_t i : top_c(v.consensus_scores, static_cast<int>(pool.size())))
      v.consensus_order.push_back(pool.candidates[i].model_id);
    for (std::size_t i : top_c(v.truth_scores, static_cast<int>(pool.size())))
      v.truth_order.push_back(pool.candidates[i].model_id);
    v.correlation = spearman(v.consensus_scores, v.truth_scores);
  });
  double sum = 0.0;
  for (const auto& v : report.videos)
    if (v.correlation) {
      sum += *v.correlation;
      ++report.correlated;
    }
  report.mean_correlation = report.correlated ? sum / double(report.correlated) : 0.0;
  return report;
}

}  // namespace vcons
