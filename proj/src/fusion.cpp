#include "binpercept/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "binpercept/parallel.hpp"

namespace binpercept {

void FusionConfig::validate() const {
  if (alphas.empty()) throw ConfigError("fusion needs at least one alpha");
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("fusion alphas must be positive");
  }
  if (!(max_spread > 0.0)) throw ConfigError("fusion max_spread must be positive");
}

FusedDepth fuse(std::span<const DepthMap> sources, const FusionConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw InputError("fuse needs at least one depth source");
  if (cfg.alphas.size() != sources.size()) {
    throw InputError("got " + std::to_string(sources.size()) + " depth sources but " +
                     std::to_string(cfg.alphas.size()) + " alphas");
  }
  const DepthMap& first = sources.front();
  for (const auto& s : sources) {
    if (!s.same_shape(first)) throw InputError("depth sources differ in size");
  }

  const int w = first.width();
  FusedDepth out{DepthMap(w, first.height()), WeightMap(w, first.height(), 0.0)};
  parallel_rows(first.height(), [&](int y) {
    for (int x = 0; x < w; ++x) {
      double num = 0.0;
      double den = 0.0;
      double lo = 0.0;
      double hi = 0.0;
      bool any = false;
      for (std::size_t s = 0; s < sources.size(); ++s) {
        if (!sources[s].valid(x, y)) continue;
        const double d = sources[s].at(x, y);
        num += cfg.alphas[s] * d;
        den += cfg.alphas[s];
        lo = any ? std::min(lo, d) : d;
        hi = any ? std::max(hi, d) : d;
        any = true;
      }
      if (!any) continue;
      const double spread = hi - lo;
      if (spread > cfg.max_spread) continue;
      // rounding in num/den may land a hair outside [lo, hi]
      out.depth.set(x, y, std::clamp(num / den, lo, hi));
      out.weight.at(x, y) = std::exp(-spread);
    }
  });
  return out;
}

}  // namespace binpercept
