#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/text.hpp"

namespace vcons {

class Vocabulary {
 public:
  static constexpr int kEos = 0;
  static constexpr int kBos = 1;
  static constexpr int kUnk = 2;

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}
  // `words` excludes the reserved tokens; they are prepended.
  explicit Vocabulary(const std::vector<std::string>& words);

  // Sorted words seen at least `min_count` times.
  static Vocabulary build(std::span<const Sentence> sentences, int min_count = 1);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& word) const;
  const std::string& token(int id) const { return tokens_.at(id); }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  // Token ids without reserved markers; unknown words map to kUnk.
  std::vector<int> encode(const Sentence& s) const;
  // Stops at kEos and drops reserved tokens.
  Sentence decode(std::span<const int> ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

// Word labels for multi-label prediction: frequent content words.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> labels, int threshold = 1);

  // Words with count >= threshold, excluding function words, sorted.
  static LabelVocabulary build(std::span<const Sentence> sentences, int threshold);

  int size() const { return static_cast<int>(labels_.size()); }
  int threshold() const { return threshold_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int i) const { return labels_.at(i); }
  int index(const std::string& word) const;  // -1 when absent
  // Sorted unique label indices present in the sentence.
  std::vector<int> labels_of(const Sentence& s) const;

  nlohmann::json to_json() const;
  static LabelVocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int> index_;
  int threshold_ = 1;
};

}  // namespace vcons
