#include "vcons/text.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "vcons/error.hpp"

namespace vcons {

std::string Sentence::str() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Sentence tokenize(std::string_view raw) {
  Sentence s;
  std::string current;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
    if (keep) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      s.tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) s.tokens.push_back(std::move(current));
  return s;
}

long NGramMultiset::total() const {
  long sum = 0;
  for (const auto& [gram, c] : counts) sum += c;
  return sum;
}

NGramMultiset ngrams(const Sentence& s, int n) {
  if (n < 1 || n > kMaxOrder) {
    fail(ErrorKind::kUsage, "invalid n-gram order " + std::to_string(n) + " (expected 1..4)");
  }
  NGramMultiset out;
  out.n = n;
  const auto len = static_cast<int>(s.tokens.size());
  for (int i = 0; i + n <= len; ++i) {
    std::string key = s.tokens[i];
    for (int k = 1; k < n; ++k) {
      key.push_back(' ');
      key += s.tokens[i + k];
    }
    ++out.counts[key];
  }
  return out;
}

IdfTable::IdfTable(int num_docs, std::vector<std::map<std::string, int>> df)
    : num_docs_(num_docs), df_(std::move(df)) {
  if (num_docs_ < 1) fail(ErrorKind::kData, "idf table needs at least one document");
  df_.resize(kMaxOrder);
  for (const auto& table : df_) {
    for (const auto& [gram, count] : table) {
      if (count < 1 || count > num_docs_) {
        fail(ErrorKind::kData, "document frequency out of range for '" + gram + "'");
      }
    }
  }
}

int IdfTable::df(int n, const std::string& gram) const {
  if (n < 1 || n > kMaxOrder) fail(ErrorKind::kUsage, "invalid n-gram order " + std::to_string(n));
  if (df_.empty()) return 1;
  const auto& table = df_[n - 1];
  auto it = table.find(gram);
  return it == table.end() ? 1 : it->second;
}

double IdfTable::idf(int n, const std::string& gram) const {
  return std::log(static_cast<double>(num_docs_) / static_cast<double>(df(n, gram)));
}

const std::map<std::string, int>& IdfTable::df_table(int n) const {
  static const std::map<std::string, int> kEmpty;
  if (df_.empty()) return kEmpty;
  return df_.at(n - 1);
}

nlohmann::json IdfTable::to_json() const {
  nlohmann::json j;
  j["num_docs"] = num_docs_;
  nlohmann::json df = nlohmann::json::object();
  for (int n = 1; n <= kMaxOrder; ++n) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [gram, count] : df_table(n)) table[gram] = count;
    df[std::to_string(n)] = std::move(table);
  }
  j["df"] = std::move(df);
  return j;
}

IdfTable IdfTable::from_json(const nlohmann::json& j) {
  try {
    const int num_docs = j.at("num_docs").get<int>();
    std::vector<std::map<std::string, int>> df(kMaxOrder);
    for (const auto& [key, table] : j.at("df").items()) {
      const int n = std::stoi(key);
      if (n < 1 || n > kMaxOrder) fail(ErrorKind::kData, "idf file has invalid order " + key);
      for (const auto& [gram, count] : table.items()) df[n - 1][gram] = count.get<int>();
    }
    return IdfTable(num_docs, std::move(df));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed idf table: ") + e.what());
  }
}

IdfTable build_idf(std::span<const Document> docs) {
  if (docs.empty()) fail(ErrorKind::kData, "cannot build idf from an empty corpus");
  std::vector<std::map<std::string, int>> df(kMaxOrder);
  for (const auto& doc : docs) {
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::set<std::string> seen;
      for (const auto& s : doc) {
        for (const auto& [gram, c] : ngrams(s, n).counts) seen.insert(gram);
      }
      for (const auto& gram : seen) ++df[n - 1][gram];
    }
  }
  return IdfTable(static_cast<int>(docs.size()), std::move(df));
}

void save_idf(const IdfTable& idf, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kData, "cannot write " + path);
  out << idf.to_json().dump() << '\n';
}

IdfTable load_idf(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, path + ": " + e.what());
  }
  return IdfTable::from_json(j);
}

}  // namespace vcons
