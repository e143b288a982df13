#include "vcons/vocab.hpp"

#include <algorithm>
#include <set>

#include "vcons/error.hpp"

namespace vcons {

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  tokens_ = {"<eos>", "<bos>", "<unk>"};
  for (const auto& w : words) {
    if (w.empty() || w.front() == '<') fail(ErrorKind::kData, "invalid vocabulary word '" + w + "'");
    tokens_.push_back(w);
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second) fail(ErrorKind::kData, "duplicate vocabulary word '" + tokens_[i] + "'");
  }
}

Vocabulary Vocabulary::build(std::span<const Sentence> sentences, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  std::vector<std::string> words;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) words.push_back(w);
  }
  return Vocabulary(words);
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const Sentence& s) const {
  std::vector<int> ids;
  ids.reserve(s.size());
  for (const auto& t : s.tokens) ids.push_back(id(t));
  return ids;
}

Sentence Vocabulary::decode(std::span<const int> ids) const {
  Sentence s;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kBos || i == kUnk || i < 0 || i >= size()) continue;
    s.tokens.push_back(tokens_[i]);
  }
  return s;
}

nlohmann::json Vocabulary::to_json() const {
  return std::vector<std::string>(tokens_.begin() + 3, tokens_.end());
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) { return Vocabulary(j.get<std::vector<std::string>>()); }

namespace {

const std::set<std::string>& function_words() {
  static const std::set<std::string> kWords = {"a",  "an",   "the",   "is", "are", "and", "of",    "in",
                                               "on", "to",   "with",  "at", "it",  "its", "there", "someone",
                                               "by", "from", "while", "as", "for", "his", "her",   "their"};
  return kWords;
}

}  // namespace

LabelVocabulary::LabelVocabulary(std::vector<std::string> labels, int threshold)
    : labels_(std::move(labels)), threshold_(threshold) {
  if (labels_.empty()) fail(ErrorKind::kData, "label vocabulary is empty");
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    if (!index_.emplace(labels_[i], i).second) fail(ErrorKind::kData, "duplicate label '" + labels_[i] + "'");
  }
}

LabelVocabulary LabelVocabulary::build(std::span<const Sentence> sentences, int threshold) {
  std::map<std::string, int> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) {
      if (!function_words().count(t)) ++counts[t];
    }
  }
  std::vector<std::string> labels;
  for (const auto& [w, c] : counts) {
    if (c >= threshold) labels.push_back(w);
  }
  return LabelVocabulary(std::move(labels), threshold);
}

int LabelVocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> LabelVocabulary::labels_of(const Sentence& s) const {
  std::set<int> out;
  for (const auto& t : s.tokens) {
    const int i = index(t);
    if (i >= 0) out.insert(i);
  }
  return {out.begin(), out.end()};
}

nlohmann::json LabelVocabulary::to_json() const { return {{"labels", labels_}, {"threshold", threshold_}}; }

LabelVocabulary LabelVocabulary::from_json(const nlohmann::json& j) {
  return LabelVocabulary(j.at("labels").get<std::vector<std::string>>(), j.value("threshold", 1));
}

}  // namespace vcons
