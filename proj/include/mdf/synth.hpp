#pragma once

// Seeded synthetic feed: per-symbol geometric random-walk prices,
// price' = price * (1 + d) with d uniform in [-0.002, +0.002], trade sizes
// uniform in [1, 1000]. Identical parameters produce identical sequences.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mdf/feedpipe.hpp"
#include "mdf/model.hpp"

namespace mdf {

// Platform-independent helpers over mt19937_64 (whose output sequence is
// fixed by the standard, unlike the std distributions).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  // Uniform integer in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    return lo + (hi == lo ? 0 : engine_() % (hi - lo + 1));
  }
  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool percent(unsigned pct) { return engine_() % 100 < pct; }

 private:
  std::mt19937_64 engine_;
};

struct SyntheticFeedParams {
  std::string source = "SIM1";
  std::uint32_t symbol_count = 4;
  std::uint64_t seed = 1;
  unsigned trade_pct = 50;
  std::string market = "SIM";
};

// Symbol naming used by generated feeds: "SYM" + zero-padded index.
SymbolKey synthetic_symbol(std::uint32_t index, std::uint32_t symbol_count,
                           const std::string& market = "SIM");

class SyntheticFeed {
 public:
  explicit SyntheticFeed(SyntheticFeedParams params);

  // Next valid event stamped with `ts_ms`; sequence numbers start at 1.
  RawFeedEvent next(std::uint64_t ts_ms);

  const std::vector<SymbolKey>& symbols() const noexcept { return symbols_; }
  std::uint64_t last_seq() const noexcept { return seq_; }
  SeededRng& rng() noexcept { return rng_; }

 private:
  SyntheticFeedParams params_;
  SeededRng rng_;
  std::vector<SymbolKey> symbols_;
  std::vector<double> prices_;
  std::uint64_t seq_ = 0;
};

}  // namespace mdf
