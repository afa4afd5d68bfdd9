#include "binpercept/image.hpp"

#include <atomic>

#include "binpercept/parallel.hpp"

namespace binpercept {

ProbabilityMap::ProbabilityMap(std::vector<FloatImage> planes) : planes_(std::move(planes)) {
  if (planes_.empty()) throw InputError("probability map needs at least one class");
  for (const auto& p : planes_) {
    if (!p.same_shape(planes_.front())) throw InputError("probability planes differ in size");
  }
}

std::string describe_shape(int width, int height) {
  return std::to_string(width) + "x" + std::to_string(height);
}

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }
int thread_count() { return g_threads.load(); }

}  // namespace binpercept
