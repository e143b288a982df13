#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vcons/models.hpp"
#include "vcons/nn/param_set.hpp"

namespace vcons {

// {name: {"shape": [...], "data": [...]}}; state buffers carry "trainable": false.
nlohmann::json params_to_json(const nn::ParamSet& params);
// Overwrites every parameter of `target`, which fixes the expected names and shapes.
void params_from_json(const nlohmann::json& j, nn::ParamSet& target);

nlohmann::json model_to_json(const CaptionModel& model);
std::unique_ptr<CaptionModel> model_from_json(const nlohmann::json& j, std::optional<Arch> expected = std::nullopt);

void save_model(const CaptionModel& model, const std::string& path);
std::unique_ptr<CaptionModel> load_model(const std::string& path, std::optional<Arch> expected = std::nullopt);

// Whole-file JSON read with parse errors reported as data errors.
nlohmann::json read_json_file(const std::string& path);

}  // namespace vcons
