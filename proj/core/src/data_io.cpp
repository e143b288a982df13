#include "vcons/data.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vcons/error.hpp"

namespace vcons {

using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(ErrorKind::kData, "unknown split '" + s + "'");
}

std::vector<Sentence> VideoRecord::references() const {
  std::vector<Sentence> refs;
  refs.reserve(annotations.size());
  for (const auto& a : annotations) refs.push_back(tokenize(a));
  return refs;
}

json VideoRecord::to_json() const {
  json j;
  j["video_id"] = video_id;
  json rows = json::array();
  for (std::size_t t = 0; t < num_frames(); ++t) {
    std::vector<double> row(frames.ptr() + t * feature_dim(), frames.ptr() + (t + 1) * feature_dim());
    rows.push_back(std::move(row));
  }
  j["frames"] = std::move(rows);
  if (!extra_features.empty()) j["extra_features"] = extra_features;
  j["annotations"] = annotations;
  j["split"] = split_name(split);
  return j;
}

VideoRecord VideoRecord::from_json(const json& j) {
  VideoRecord v;
  v.video_id = j.at("video_id").get<std::string>();
  const auto rows = j.at("frames").get<std::vector<std::vector<double>>>();
  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != dim) fail(ErrorKind::kShape, "video '" + v.video_id + "': frame rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  if (!rows.empty()) v.frames = nn::Tensor({rows.size(), dim}, std::move(flat));
  if (j.contains("extra_features")) {
    v.extra_features = j.at("extra_features").get<std::map<std::string, std::vector<double>>>();
  }
  v.annotations = j.at("annotations").get<std::vector<std::string>>();
  v.split = parse_split(j.at("split").get<std::string>());
  return v;
}

void validate_record(const VideoRecord& v) {
  if (v.video_id.empty()) fail(ErrorKind::kData, "record with empty video_id");
  if (v.num_frames() < 1 || v.feature_dim() < 1) {
    fail(ErrorKind::kData, "video '" + v.video_id + "': needs at least one non-empty frame");
  }
  if (!v.frames.all_finite()) fail(ErrorKind::kData, "video '" + v.video_id + "': non-finite frame value");
  for (const auto& [name, vec] : v.extra_features) {
    if (vec.empty()) fail(ErrorKind::kData, "video '" + v.video_id + "': empty extra feature '" + name + "'");
  }
}

void for_each_jsonl(const std::string& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kData, "cannot read " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path + ":" + std::to_string(lineno) + ": parse error: " + e.what());
    }
    try {
      fn(j, lineno);
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kData, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::kData, "write failed for " + path);
}

namespace {

Corpus finish_corpus(Corpus corpus) {
  std::set<std::string> seen;
  for (const auto& v : corpus) {
    if (!seen.insert(v.video_id).second) fail(ErrorKind::kData, "duplicate video_id '" + v.video_id + "'");
    validate_record(v);
  }
  return corpus;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  for_each_jsonl(path, [&](const json& j, std::size_t) { corpus.push_back(VideoRecord::from_json(j)); });
  return finish_corpus(std::move(corpus));
}

Corpus corpus_from_jsonl(const std::string& text, const std::string& origin) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(VideoRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return finish_corpus(std::move(corpus));
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& v : corpus) {
    out += v.to_json().dump();
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::string& path) { write_text_file(path, corpus_to_jsonl(corpus)); }

std::vector<const VideoRecord*> select_split(const Corpus& corpus, Split split) {
  std::vector<const VideoRecord*> out;
  for (const auto& v : corpus) {
    if (v.split == split) out.push_back(&v);
  }
  return out;
}

std::map<std::string, const VideoRecord*> index_by_id(const Corpus& corpus) {
  std::map<std::string, const VideoRecord*> out;
  for (const auto& v : corpus) out.emplace(v.video_id, &v);
  return out;
}

std::map<std::string, std::vector<Sentence>> reference_map(const Corpus& corpus) {
  std::map<std::string, std::vector<Sentence>> out;
  for (const auto& v : corpus) {
    if (!v.annotations.empty()) out.emplace(v.video_id, v.references());
  }
  return out;
}

std::vector<CandidateRecord> load_candidates(const std::string& path) {
  std::vector<CandidateRecord> rows;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    rows.push_back({j.at("video_id").get<std::string>(), j.at("model_id").get<std::string>(),
                    j.at("sentence").get<std::string>()});
  });
  return rows;
}

void save_candidates(const std::vector<CandidateRecord>& rows, const std::string& path) {
  std::string out;
  for (const auto& r : rows) {
    out += json{{"video_id", r.video_id}, {"model_id", r.model_id}, {"sentence", r.sentence}}.dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

json ConsensusRecord::to_json() const {
  json j;
  j["video_id"] = video_id;
  j["selected"] = selected;
  j["selected_model"] = selected_model;
  j["pool_models"] = pool_models;
  j["phase1"] = phase1;
  j["top_c"] = top_c;
  if (oracle_order) j["oracle_order"] = *oracle_order;
  return j;
}

ConsensusRecord ConsensusRecord::from_json(const json& j) {
  ConsensusRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.selected = j.at("selected").get<std::string>();
  r.selected_model = j.at("selected_model").get<std::string>();
  if (j.contains("pool_models")) r.pool_models = j.at("pool_models").get<std::vector<std::string>>();
  r.phase1 = j.at("phase1").get<std::vector<double>>();
  r.top_c = j.at("top_c").get<std::vector<std::string>>();
  if (j.contains("oracle_order")) r.oracle_order = j.at("oracle_order").get<std::vector<std::string>>();
  return r;
}

std::vector<ConsensusRecord> load_consensus(const std::string& path) {
  std::vector<ConsensusRecord> rows;
  for_each_jsonl(path, [&](const json& j, std::size_t) { rows.push_back(ConsensusRecord::from_json(j)); });
  return rows;
}

void save_consensus(const std::vector<ConsensusRecord>& rows, const std::string& path) {
  std::string out;
  for (const auto& r : rows) {
    out += r.to_json().dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

}  // namespace vcons
