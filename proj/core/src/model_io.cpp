#include "vcons/model_io.hpp"

#include <fstream>
#include <sstream>

#include "vcons/data.hpp"
#include "vcons/error.hpp"

namespace vcons {

using json = nlohmann::json;

json params_to_json(const nn::ParamSet& params) {
  json out = json::object();
  for (const auto& [name, e] : params.entries()) {
    json p = {{"shape", e.value.shape()}, {"data", std::vector<double>(e.value.data().begin(), e.value.data().end())}};
    if (!e.trainable) p["trainable"] = false;
    out[name] = std::move(p);
  }
  return out;
}

void params_from_json(const json& j, nn::ParamSet& target) {
  if (!j.is_object()) fail(ErrorKind::kCorruptModel, "model params must be an object");
  for (const auto& [name, e] : target.entries()) {
    if (!j.contains(name)) fail(ErrorKind::kCorruptModel, "model file lacks parameter " + name);
    const json& p = j.at(name);
    nn::Shape shape;
    std::vector<double> data;
    try {
      shape = p.at("shape").get<nn::Shape>();
      data = p.at("data").get<std::vector<double>>();
    } catch (const json::exception& ex) {
      fail(ErrorKind::kCorruptModel, "parameter " + name + ": " + ex.what());
    }
    if (shape != e.value.shape())
      fail(ErrorKind::kCorruptModel, "parameter " + name + " has shape " + nn::shape_str(shape) + ", expected " +
                                         nn::shape_str(e.value.shape()));
    if (data.size() != e.value.size())
      fail(ErrorKind::kCorruptModel, "parameter " + name + " has " + std::to_string(data.size()) + " values, expected " +
                                         std::to_string(e.value.size()));
    nn::Tensor t(shape, std::move(data));
    if (!t.all_finite()) fail(ErrorKind::kCorruptModel, "parameter " + name + " has non-finite values");
    target.get(name) = std::move(t);
  }
  for (const auto& [name, p] : j.items()) {
    (void)p;
    if (!target.contains(name)) fail(ErrorKind::kCorruptModel, "model file has unexpected parameter " + name);
  }
}

json model_to_json(const CaptionModel& model) {
  json cfg = model.config().to_json();
  cfg["vocab"] = model.vocab().to_json();
  if (model.labels().size() > 0) cfg["labels"] = model.labels().to_json();
  return {{"arch", arch_name(model.config().arch)}, {"config", cfg}, {"params", params_to_json(model.params())}};
}

std::unique_ptr<CaptionModel> model_from_json(const json& j, std::optional<Arch> expected) {
  if (!j.is_object() || !j.contains("arch") || !j.contains("config") || !j.contains("params"))
    fail(ErrorKind::kCorruptModel, "model file needs arch, config and params");
  const std::string arch = j.at("arch").is_string() ? j.at("arch").get<std::string>() : "";
  if (arch == "oracle") fail(ErrorKind::kCorruptModel, "file holds an oracle, not a caption model");
  Arch a;
  try {
    a = parse_arch(arch);
  } catch (const Error&) {
    fail(ErrorKind::kCorruptModel, "unknown architecture '" + arch + "' in model file");
  }
  if (expected && *expected != a)
    fail(ErrorKind::kCorruptModel, "architecture mismatch: file holds " + arch + ", expected " + arch_name(*expected));
  const json& c = j.at("config");
  ModelConfig cfg = ModelConfig::from_json(c);
  if (cfg.arch != a) fail(ErrorKind::kCorruptModel, "config architecture disagrees with file architecture");
  Vocabulary vocab = c.contains("vocab") ? Vocabulary::from_json(c.at("vocab")) : Vocabulary{};
  LabelVocabulary labels = c.contains("labels") ? LabelVocabulary::from_json(c.at("labels")) : LabelVocabulary{};
  auto model = std::make_unique<CaptionModel>(cfg, std::move(vocab), std::move(labels));
  params_from_json(j.at("params"), model->params());
  return model;
}

void save_model(const CaptionModel& model, const std::string& path) {
  write_text_file(path, model_to_json(model).dump() + "\n");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kUsage, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kCorruptModel, path + ": parse error: " + e.what());
  }
}

std::unique_ptr<CaptionModel> load_model(const std::string& path, std::optional<Arch> expected) {
  return model_from_json(read_json_file(path), expected);
}

}  // namespace vcons
