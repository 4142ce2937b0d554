#pragma once

#include <cstdint>
#include <random>

namespace regdiff {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based substream factory: one master seed fans out into independent
/// streams keyed by (repetition, agent, iteration). Variants run on common
/// random numbers, so paired comparisons and Monte-Carlo repetitions are
/// reproducible regardless of scheduling order.
class SubstreamRng {
 public:
  explicit SubstreamRng(std::uint64_t master_seed) : master_(master_seed) {}

  std::uint64_t master_seed() const { return master_; }

  std::mt19937_64 stream(std::uint64_t repetition, std::uint64_t agent,
                         std::uint64_t iteration) const {
    std::uint64_t s = splitmix64(master_ ^ splitmix64(repetition));
    s = splitmix64(s ^ splitmix64(agent + 0x100000001ULL));
    s = splitmix64(s ^ splitmix64(iteration + 0x200000002ULL));
    return std::mt19937_64(s);
  }

  /// Stream for per-run setup draws (data models, test sets) that are not tied
  /// to an iteration.
  std::mt19937_64 setup_stream(std::uint64_t tag) const {
    return std::mt19937_64(splitmix64(master_ ^ splitmix64(tag + 0x300000003ULL)));
  }

 private:
  std::uint64_t master_;
};

}  // namespace regdiff
