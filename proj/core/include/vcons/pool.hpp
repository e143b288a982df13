#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vcons/data.hpp"
#include "vcons/models.hpp"

namespace vcons {

struct PoolMember {
  std::string model_id;
  ModelConfig config;
  std::uint64_t seed = 1;
};

// `size` members cycling through the architectures; later rounds add the extra
// feature channel and vary the hidden size, mirroring the feature-group grid.
std::vector<PoolMember> desk_pool(int size, std::uint64_t seed, const ModelConfig& base = {});

struct TrainedPool {
  std::vector<std::string> ids;
  std::vector<std::unique_ptr<CaptionModel>> models;
  std::vector<TrainingLog> logs;

  std::vector<NamedModel> named() const;
};

// Members train independently, so they may run on separate workers.
TrainedPool train_pool(std::span<const PoolMember> members, const Corpus& corpus, int workers = 1);

// One candidate per (video, model), ordered by video then model_id.
std::vector<CandidateRecord> generate_candidates(std::span<const NamedModel> models,
                                                 std::span<const VideoRecord* const> videos, int workers = 1);

}  // namespace vcons
