#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/nn/tensor.hpp"
#include "vcons/text.hpp"

namespace vcons {

enum class Split { kTrain, kVal, kTest };

std::string split_name(Split s);
Split parse_split(const std::string& s);

struct VideoRecord {
  std::string video_id;
  nn::Tensor frames;  // [N_t, N_fe]
  std::map<std::string, std::vector<double>> extra_features;
  std::vector<std::string> annotations;
  Split split = Split::kTrain;

  std::size_t num_frames() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  std::size_t feature_dim() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
  std::vector<Sentence> references() const;

  nlohmann::json to_json() const;
  static VideoRecord from_json(const nlohmann::json& j);
};

using Corpus = std::vector<VideoRecord>;

void validate_record(const VideoRecord& v);
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);
std::string corpus_to_jsonl(const Corpus& corpus);
Corpus corpus_from_jsonl(const std::string& text, const std::string& origin = "<memory>");

std::vector<const VideoRecord*> select_split(const Corpus& corpus, Split split);
std::map<std::string, const VideoRecord*> index_by_id(const Corpus& corpus);
// Reference sets keyed by video_id for every record with annotations.
std::map<std::string, std::vector<Sentence>> reference_map(const Corpus& corpus);

struct CandidateRecord {
  std::string video_id;
  std::string model_id;
  std::string sentence;
};

std::vector<CandidateRecord> load_candidates(const std::string& path);
void save_candidates(const std::vector<CandidateRecord>& rows, const std::string& path);

struct ConsensusRecord {
  std::string video_id;
  std::string selected;
  std::string selected_model;
  std::vector<std::string> pool_models;  // order of `phase1`
  std::vector<double> phase1;
  std::vector<std::string> top_c;
  std::optional<std::vector<std::string>> oracle_order;

  nlohmann::json to_json() const;
  static ConsensusRecord from_json(const nlohmann::json& j);
};

std::vector<ConsensusRecord> load_consensus(const std::string& path);
void save_consensus(const std::vector<ConsensusRecord>& rows, const std::string& path);

// Reads a JSON-lines file, calling fn(json, line_number) for every non-blank line.
void for_each_jsonl(const std::string& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn);
void write_text_file(const std::string& path, const std::string& text);

// ---- synthetic corpus -------------------------------------------------------

struct SubjectTerm {
  std::string word;
  std::string synonym;
};

struct VerbTerm {
  std::string ing;    // "riding"
  std::string third;  // "rides"
};

struct SynthSpec {
  int train = 200;
  int val = 20;
  int test = 40;
  int frames = 16;
  int feature_dim = 16;
  int annotations = 20;
  double noise = 1.0;        // per-frame Gaussian noise
  double video_noise = 0.5;  // per-video offset shared by all frames
  int extra_dim = 8;         // "audio" extra feature; 0 disables it
  double extra_noise = 0.5;
  std::vector<SubjectTerm> subjects;
  std::vector<VerbTerm> verbs;
  std::vector<std::string> objects;
  std::uint64_t seed = 1;

  static SynthSpec defaults();
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
  void validate() const;
};

struct Triple {
  int subject = 0;
  int verb = 0;
  int object = 0;
};

// Every caption the templates can produce for a triple.
std::vector<std::string> expand_templates(const SynthSpec& spec, const Triple& t);
int num_templates();
std::string render_template(const SynthSpec& spec, const Triple& t, int template_index);

struct SynthCorpus {
  Corpus corpus;
  std::vector<Triple> triples;  // parallel to corpus
};

SynthCorpus synth_corpus(const SynthSpec& spec);

}  // namespace vcons
