#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcons/data.hpp"
#include "vcons/random.hpp"
#include "vcons/text.hpp"

namespace vcons::testing {

inline std::string fixture_path(const std::string& name) { return std::string(VCONS_FIXTURE_DIR) + "/" + name; }

inline nlohmann::json load_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name));
  return nlohmann::json::parse(in);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Sentence> sentences(const std::vector<std::string>& raw) {
  std::vector<Sentence> out;
  for (const auto& r : raw) out.push_back(tokenize(r));
  return out;
}

inline std::vector<Document> documents(const nlohmann::json& corpus) {
  std::vector<Document> docs;
  for (const auto& d : corpus) docs.push_back(sentences(d.get<std::vector<std::string>>()));
  return docs;
}

// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    std::string templ = (std::filesystem::temp_directory_path() / "vcons_test_XXXXXX").string();
    path_ = mkdtemp(templ.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline VideoRecord random_video(const std::string& id, std::size_t frames, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  VideoRecord v;
  v.video_id = id;
  v.frames = nn::Tensor({frames, dim});
  for (double& x : v.frames.data()) x = rng.normal();
  return v;
}

}  // namespace vcons::testing
