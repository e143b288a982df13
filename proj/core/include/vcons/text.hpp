#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vcons {

// A tokenized caption: lowercase tokens drawn from [a-z0-9'].
struct Sentence {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  std::string str() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
  friend auto operator<=>(const Sentence&, const Sentence&) = default;
};

Sentence tokenize(std::string_view raw);

inline constexpr int kMaxOrder = 4;

// Sliding-window n-gram counts. Keys are space-joined n-token strings.
struct NGramMultiset {
  int n = 1;
  std::map<std::string, int> counts;

  long total() const;
};

NGramMultiset ngrams(const Sentence& s, int n);

// Per-order document frequencies. One document is one video's reference set.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(int num_docs, std::vector<std::map<std::string, int>> df);

  int num_docs() const { return num_docs_; }

  // Unseen n-grams resolve to df = 1.
  int df(int n, const std::string& gram) const;
  double idf(int n, const std::string& gram) const;
  const std::map<std::string, int>& df_table(int n) const;

  nlohmann::json to_json() const;
  static IdfTable from_json(const nlohmann::json& j);

  friend bool operator==(const IdfTable&, const IdfTable&) = default;

 private:
  int num_docs_ = 0;
  std::vector<std::map<std::string, int>> df_;  // index n-1
};

using Document = std::vector<Sentence>;

IdfTable build_idf(std::span<const Document> docs);

void save_idf(const IdfTable& idf, const std::string& path);
IdfTable load_idf(const std::string& path);

}  // namespace vcons
