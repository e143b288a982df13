#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vcons {

struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_rel_err < tolerance; }
};

inline constexpr double kOpTolerance = 1e-6;
inline constexpr double kEndToEndTolerance = 1e-4;

// Central differences (h = 1e-5) for every differentiable op on random inputs.
std::vector<GradCheckRow> op_gradchecks(std::uint64_t seed = 1);

// Full training loss of each architecture (and the oracle) on a micro example,
// compared per parameter tensor.
std::vector<GradCheckRow> model_gradchecks(std::uint64_t seed = 1);

}  // namespace vcons
