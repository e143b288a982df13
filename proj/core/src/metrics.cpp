#include "vcons/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "vcons/error.hpp"
#include "vcons/parallel.hpp"

namespace vcons {
namespace {

void require_refs(std::span<const Sentence> refs, const char* metric) {
  if (refs.empty()) fail(ErrorKind::kMissingReference, std::string(metric) + ": no reference sentences");
}

struct CookedOrder {
  std::map<std::string, double> vec;
  double norm2 = 0.0;
};

struct Cooked {
  std::vector<CookedOrder> orders;
  double length = 0.0;
};

Cooked cook(const Sentence& s, const IdfTable& idf, int n_max) {
  Cooked out;
  out.orders.resize(n_max);
  out.length = static_cast<double>(s.size());
  for (int n = 1; n <= n_max; ++n) {
    auto& order = out.orders[n - 1];
    for (const auto& [gram, tf] : ngrams(s, n).counts) {
      const double w = static_cast<double>(tf) * idf.idf(n, gram);
      order.vec.emplace(gram, w);
    }
    for (const auto& [gram, w] : order.vec) order.norm2 += w * w;
  }
  return out;
}

double cider_pair(const Cooked& cand, const Cooked& ref, const CiderOptions& opts) {
  double sum = 0.0;
  const double delta = cand.length - ref.length;
  const double penalty = opts.plain ? 1.0 : std::exp(-(delta * delta) / (2.0 * opts.sigma * opts.sigma));
  for (int n = 0; n < opts.n_max; ++n) {
    const auto& c = cand.orders[n];
    const auto& r = ref.orders[n];
    double dot = 0.0;
    for (const auto& [gram, wc] : c.vec) {
      auto it = r.vec.find(gram);
      if (it == r.vec.end()) continue;
      const double wr = it->second;
      dot += (opts.plain ? wc : std::min(wc, wr)) * wr;
    }
    const double denom = std::sqrt(c.norm2 * r.norm2);
    const double cosine = denom > 0.0 ? dot / denom : 0.0;
    sum += penalty * cosine;
  }
  return sum * 10.0 / static_cast<double>(opts.n_max);
}

std::string stem_token(const std::string& w) {
  static const char* kSuffixes[] = {"ing", "ed", "es", "s"};
  for (const char* suffix : kSuffixes) {
    const std::string_view sv(suffix);
    if (w.size() >= sv.size() + 4 && w.compare(w.size() - sv.size(), sv.size(), sv) == 0) {
      return w.substr(0, w.size() - sv.size());
    }
  }
  return w;
}

double meteor_single(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                     const MeteorOptions& opts) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<int> align(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  int matches = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        align[i] = static_cast<int>(j);
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  int chunks = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (align[i] < 0) continue;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i - 1] + 1 == align[i];
    if (!continues) ++chunks;
  }
  const double m = matches;
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (opts.alpha * p + (1.0 - opts.alpha) * r);
  const double penalty = opts.gamma * std::pow(static_cast<double>(chunks) / m, opts.beta_frag);
  return fmean * (1.0 - penalty);
}

}  // namespace

double cider_d(const Sentence& cand, std::span<const Sentence> refs, const IdfTable& idf,
               const CiderOptions& opts) {
  require_refs(refs, "cider");
  if (opts.n_max < 1 || opts.n_max > kMaxOrder) fail(ErrorKind::kUsage, "cider: n_max must be in 1..4");
  if (cand.empty()) return 0.0;
  const Cooked c = cook(cand, idf, opts.n_max);
  double total = 0.0;
  for (const auto& ref : refs) total += cider_pair(c, cook(ref, idf, opts.n_max), opts);
  return total / static_cast<double>(refs.size());
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < kMaxOrder; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  cand_len += o.cand_len;
  ref_len += o.ref_len;
  return *this;
}

double BleuStats::precision(int n) const {
  const long t = totals[n - 1];
  return t > 0 ? static_cast<double>(matches[n - 1]) / static_cast<double>(t) : 0.0;
}

BleuStats bleu_stats(const Sentence& cand, std::span<const Sentence> refs, int n_max) {
  require_refs(refs, "bleu");
  BleuStats st;
  st.cand_len = static_cast<long>(cand.size());
  long best_diff = std::numeric_limits<long>::max();
  for (const auto& r : refs) {
    const long len = static_cast<long>(r.size());
    const long diff = std::labs(len - st.cand_len);
    if (diff < best_diff || (diff == best_diff && len < st.ref_len)) {
      best_diff = diff;
      st.ref_len = len;
    }
  }
  for (int n = 1; n <= n_max; ++n) {
    const auto cand_counts = ngrams(cand, n);
    std::map<std::string, int> max_ref;
    for (const auto& r : refs) {
      for (const auto& [gram, c] : ngrams(r, n).counts) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    long matched = 0;
    for (const auto& [gram, c] : cand_counts.counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    st.matches[n - 1] = matched;
    st.totals[n - 1] = cand_counts.total();
  }
  return st;
}

namespace {

double brevity_penalty(long c, long r) {
  if (c >= r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

double bleu(const Sentence& cand, std::span<const Sentence> refs, int n_max, double smoothing_eps) {
  const BleuStats st = bleu_stats(cand, refs, n_max);
  if (st.cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    double p = st.precision(n);
    if (p == 0.0) p = smoothing_eps;
    log_sum += std::log(p);
  }
  return brevity_penalty(st.cand_len, st.ref_len) * std::exp(log_sum / n_max);
}

double corpus_bleu(const BleuStats& st, int n_max) {
  if (st.cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const double p = st.precision(n);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return brevity_penalty(st.cand_len, st.ref_len) * std::exp(log_sum / n_max);
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  const auto& x = a.tokens;
  const auto& y = b.tokens;
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double rouge_l(const Sentence& cand, std::span<const Sentence> refs, double beta) {
  require_refs(refs, "rouge_l");
  if (cand.empty()) return 0.0;
  double best = 0.0;
  const double b2 = beta * beta;
  for (const auto& ref : refs) {
    if (ref.empty()) continue;
    const auto lcs = static_cast<double>(lcs_length(cand, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(cand.size());
    const double r = lcs / static_cast<double>(ref.size());
    const double f = ((1.0 + b2) * p * r) / (r + b2 * p);
    best = std::max(best, f);
  }
  return best;
}

double meteor_lite(const Sentence& cand, std::span<const Sentence> refs, const MeteorOptions& opts) {
  require_refs(refs, "meteor_lite");
  auto prepare = [&](const Sentence& s) {
    if (!opts.stem) return s.tokens;
    std::vector<std::string> out;
    out.reserve(s.size());
    for (const auto& t : s.tokens) out.push_back(stem_token(t));
    return out;
  };
  const auto c = prepare(cand);
  double best = 0.0;
  for (const auto& ref : refs) best = std::max(best, meteor_single(c, prepare(ref), opts));
  return best;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["cider"] = cider;
  j["bleu4"] = bleu4;
  j["bleu4_corpus"] = bleu4_corpus;
  j["rouge_l"] = rouge_l;
  j["meteor_lite"] = meteor_lite;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& v : per_video) {
    rows.push_back({{"video_id", v.video_id},
                    {"cider", v.cider},
                    {"bleu4", v.bleu4},
                    {"rouge_l", v.rouge_l},
                    {"meteor_lite", v.meteor_lite}});
  }
  j["per_video"] = std::move(rows);
  return j;
}

std::string MetricReport::to_text() const {
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof(buf), "CIDEr-D      %.1f\n", 100.0 * cider);
  out << buf;
  std::snprintf(buf, sizeof(buf), "METEOR-lite  %.1f\n", 100.0 * meteor_lite);
  out << buf;
  std::snprintf(buf, sizeof(buf), "ROUGE-L      %.1f\n", 100.0 * rouge_l);
  out << buf;
  std::snprintf(buf, sizeof(buf), "BLEU-4       %.1f\n", 100.0 * bleu4_corpus);
  out << buf;
  std::snprintf(buf, sizeof(buf), "BLEU-4 (sentence mean) %.1f\n", 100.0 * bleu4);
  out << buf;
  return out.str();
}

MetricReport corpus_scores(const std::map<std::string, Sentence>& candidates,
                           const std::map<std::string, std::vector<Sentence>>& refs, const ScoreOptions& opts) {
  std::vector<Document> docs;
  docs.reserve(refs.size());
  for (const auto& [id, r] : refs) docs.push_back(r);
  return corpus_scores(candidates, refs, build_idf(docs), opts);
}

MetricReport corpus_scores(const std::map<std::string, Sentence>& candidates,
                           const std::map<std::string, std::vector<Sentence>>& refs, const IdfTable& idf,
                           const ScoreOptions& opts) {
  std::string missing;
  for (const auto& [id, cand] : candidates) {
    auto it = refs.find(id);
    if (it == refs.end() || it->second.empty()) missing += (missing.empty() ? "" : ", ") + id;
  }
  if (!missing.empty()) fail(ErrorKind::kMissingReference, "no references for video(s): " + missing);

  std::vector<const std::pair<const std::string, Sentence>*> items;
  for (const auto& kv : candidates) items.push_back(&kv);

  MetricReport report;
  report.per_video.resize(items.size());
  std::vector<BleuStats> stats(items.size());
  parallel_for(items.size(), opts.workers, [&](std::size_t i) {
    const auto& [id, cand] = *items[i];
    const auto& r = refs.at(id);
    auto& row = report.per_video[i];
    row.video_id = id;
    row.cider = cider_d(cand, r, idf, opts.cider);
    row.bleu4 = bleu(cand, r);
    row.rouge_l = rouge_l(cand, r);
    row.meteor_lite = meteor_lite(cand, r, opts.meteor);
    stats[i] = bleu_stats(cand, r);
  });

  BleuStats total;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& row = report.per_video[i];
    report.cider += row.cider;
    report.bleu4 += row.bleu4;
    report.rouge_l += row.rouge_l;
    report.meteor_lite += row.meteor_lite;
    total += stats[i];
  }
  if (!items.empty()) {
    const auto n = static_cast<double>(items.size());
    report.cider /= n;
    report.bleu4 /= n;
    report.rouge_l /= n;
    report.meteor_lite /= n;
  }
  report.bleu4_corpus = corpus_bleu(total);
  return report;
}

}  // namespace vcons
