#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace binpercept {

struct SceneLabels {
  std::string id;
  std::vector<std::string> labels;
};

struct DatasetIndex {
  std::vector<SceneLabels> scenes;

  void validate() const;
};

/// Multi-label iterative stratification. Returns the fold of each scene, in
/// index order. The seed only permutes candidates that tie exactly.
std::vector<int> stratified_folds(const DatasetIndex& index, int k, std::uint64_t seed);

}  // namespace binpercept
