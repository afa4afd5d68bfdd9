#include "binpercept/folds.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "binpercept/errors.hpp"

namespace binpercept {

void DatasetIndex::validate() const {
  if (scenes.empty()) throw InputError("dataset index has no scenes");
  std::set<std::string> ids;
  for (const auto& s : scenes) {
    if (s.labels.empty()) throw InputError("scene '" + s.id + "' has no labels");
    if (!ids.insert(s.id).second) throw InputError("duplicate scene id '" + s.id + "'");
  }
}

std::vector<int> stratified_folds(const DatasetIndex& index, int k, std::uint64_t seed) {
  index.validate();
  const auto n = static_cast<std::int64_t>(index.scenes.size());
  if (k < 2 || k > n) {
    throw InputError("fold count " + std::to_string(k) + " outside [2, " + std::to_string(n) + "]");
  }

  std::map<std::string, int> label_ids;
  std::vector<std::vector<int>> scene_labels(index.scenes.size());
  for (std::size_t s = 0; s < index.scenes.size(); ++s) {
    for (const auto& name : index.scenes[s].labels) label_ids.try_emplace(name, 0);
  }
  int next = 0;
  for (auto& [name, id] : label_ids) id = next++;
  for (std::size_t s = 0; s < index.scenes.size(); ++s) {
    auto& ls = scene_labels[s];
    for (const auto& name : index.scenes[s].labels) ls.push_back(label_ids.at(name));
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  }
  const auto num_labels = static_cast<std::size_t>(next);

  // The seed only decides the order among scenes and among equally rare labels.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> scene_order(index.scenes.size());
  std::iota(scene_order.begin(), scene_order.end(), std::size_t{0});
  std::shuffle(scene_order.begin(), scene_order.end(), rng);
  std::vector<std::size_t> label_rank(num_labels);
  std::iota(label_rank.begin(), label_rank.end(), std::size_t{0});
  std::shuffle(label_rank.begin(), label_rank.end(), rng);

  // Desired counts are kept multiplied by k so comparisons stay exact:
  // label_need[l][j] = |D_l| - k * (scenes with l in fold j), fold_need[j] = N - k * |fold j|.
  std::vector<std::int64_t> remaining(num_labels, 0);
  for (const auto& ls : scene_labels) {
    for (int l : ls) ++remaining[static_cast<std::size_t>(l)];
  }
  std::vector<std::vector<std::int64_t>> label_need(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) label_need[l].assign(static_cast<std::size_t>(k), remaining[l]);
  std::vector<std::int64_t> fold_need(static_cast<std::size_t>(k), n);

  std::vector<int> fold(index.scenes.size(), -1);
  std::size_t unassigned = index.scenes.size();
  while (unassigned > 0) {
    std::size_t label = num_labels;
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (remaining[l] == 0) continue;
      if (label == num_labels || remaining[l] < remaining[label] ||
          (remaining[l] == remaining[label] && label_rank[l] < label_rank[label])) {
        label = l;
      }
    }
    if (label == num_labels) throw InvariantError("stratified_folds: unassigned scene without labels");

    for (std::size_t s : scene_order) {
      if (fold[s] != -1) continue;
      const auto& ls = scene_labels[s];
      if (!std::binary_search(ls.begin(), ls.end(), static_cast<int>(label))) continue;

      std::size_t best = 0;
      for (std::size_t j = 1; j < static_cast<std::size_t>(k); ++j) {
        const auto cand = std::make_pair(label_need[label][j], fold_need[j]);
        const auto cur = std::make_pair(label_need[label][best], fold_need[best]);
        if (cand > cur) best = j;
      }
      fold[s] = static_cast<int>(best);
      --unassigned;
      fold_need[best] -= k;
      for (int l : ls) {
        label_need[static_cast<std::size_t>(l)][best] -= k;
        --remaining[static_cast<std::size_t>(l)];
      }
    }
  }
  return fold;
}

}  // namespace binpercept
