#include "vcons/pool.hpp"

#include <algorithm>
#include <cstdio>

#include "vcons/error.hpp"
#include "vcons/parallel.hpp"

namespace vcons {

std::vector<PoolMember> desk_pool(int size, std::uint64_t seed, const ModelConfig& base) {
  if (size < 1) fail(ErrorKind::kUsage, "pool size must be at least 1");
  const Arch order[] = {Arch::kSeq2Seq, Arch::kTwoWings, Arch::kTwoStage, Arch::kTcn, Arch::kSeq2SeqAttn};
  std::vector<PoolMember> out;
  for (int i = 0; i < size; ++i) {
    const int round = i / 5;
    PoolMember m;
    m.config = base;
    m.config.arch = order[i % 5];
    if (round % 2 == 1 && m.config.extra_features.empty()) m.config.extra_features = {"audio"};
    if (round >= 2) m.config.hidden = base.hidden + 16 * (round / 2);
    m.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    char id[64];
    std::snprintf(id, sizeof(id), "m%02d_%s%s", i, arch_name(m.config.arch).c_str(),
                  m.config.extra_features.empty() ? "" : "_x");
    m.model_id = id;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<NamedModel> TrainedPool::named() const {
  std::vector<NamedModel> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], models[i].get()});
  return out;
}

TrainedPool train_pool(std::span<const PoolMember> members, const Corpus& corpus, int workers) {
  TrainedPool pool;
  pool.ids.resize(members.size());
  pool.models.resize(members.size());
  pool.logs.resize(members.size());
  parallel_for(members.size(), workers, [&](std::size_t i) {
    TrainedModel t = train_model(members[i].config, corpus, members[i].seed);
    pool.ids[i] = members[i].model_id;
    pool.models[i] = std::move(t.model);
    pool.logs[i] = std::move(t.log);
  });
  return pool;
}

std::vector<CandidateRecord> generate_candidates(std::span<const NamedModel> models,
                                                 std::span<const VideoRecord* const> videos, int workers) {
  if (models.empty()) fail(ErrorKind::kUsage, "no models given");
  std::vector<CandidatePool> pools(videos.size());
  parallel_for(videos.size(), workers, [&](std::size_t i) { pools[i] = generate_pool(models, *videos[i]); });
  std::vector<CandidateRecord> rows;
  std::vector<std::size_t> order(videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return videos[a]->video_id < videos[b]->video_id; });
  for (std::size_t i : order)
    for (const auto& c : pools[i].candidates) rows.push_back({pools[i].video_id, c.model_id, c.sentence.str()});
  return rows;
}

}  // namespace vcons
