#pragma once

// Per-symbol trading-day state, real-time enrichment of notifications, and
// derived-event detection.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mdf/model.hpp"

namespace mdf {

inline constexpr std::uint64_t kMillisPerDay = 86'400'000;
inline constexpr std::string_view kDerivedSource = "DERIVED";

// UTC calendar day of an epoch-millisecond timestamp.
constexpr std::int64_t trading_day_of(std::uint64_t ts_ms) {
  return static_cast<std::int64_t>(ts_ms / kMillisPerDay);
}

struct SymbolDayState {
  SymbolKey symbol;
  std::int64_t trading_day = 0;
  std::optional<Price> open;
  std::optional<Price> high;
  std::optional<Price> low;
  std::optional<Price> last;
  std::uint64_t total_volume = 0;
  std::uint64_t trade_count = 0;
  std::optional<Price> prev_close;
  std::optional<Price> best_bid;
  std::optional<Price> best_ask;

  bool operator==(const SymbolDayState&) const = default;
};

struct TickResult {
  SymbolDayState state;
  EventNotification notification;  // input with the post-update block attached
};

EnrichmentBlock enrichment_of(const SymbolDayState& s);

// Throws ContractViolation when n.symbol differs from state.symbol.
TickResult apply_tick(const SymbolDayState& state, const EventNotification& n);

// Throws ContractViolation unless new_trading_day > state.trading_day.
SymbolDayState roll_day(const SymbolDayState& state, std::int64_t new_trading_day);

struct RuleSet {
  std::optional<std::uint64_t> default_volume_threshold;
  std::map<SymbolKey, std::uint64_t> volume_thresholds;
  std::optional<std::uint32_t> max_spread_bps;

  std::optional<std::uint64_t> volume_threshold_for(const SymbolKey& s) const;

  // key=value lines: max_spread_bps, volume_threshold.default,
  // volume_threshold.<SYMBOL>. '#' starts a comment. Throws LineError.
  static RuleSet parse(std::string_view text);
};

struct DerivedPayload {
  std::optional<Price> price;
  std::optional<Price> bid;
  std::optional<Price> ask;
  std::optional<std::uint64_t> volume;
  std::optional<std::uint64_t> threshold;
  bool operator==(const DerivedPayload&) const = default;
};

struct DerivedEvent {
  DerivedKind kind = DerivedKind::NewDayHigh;
  SymbolKey symbol;
  SourceSeq trigger;
  DerivedPayload payload;
  std::uint64_t ts_ms = 0;
  bool operator==(const DerivedEvent&) const = default;
};

// Emission order: NEW_DAY_HIGH, NEW_DAY_LOW, VOLUME_THRESHOLD_CROSSED,
// QUOTE_SPREAD_ALERT. `after` must be apply_tick(before, n).state.
std::vector<DerivedEvent> detect_derived(const SymbolDayState& before,
                                         const SymbolDayState& after,
                                         const EventNotification& n, const RuleSet& rules);

// Symbol-partitioned enrichment stage. Derived events are also published as
// STATUS notifications on the reserved DERIVED source with their own
// sequence counter.
class Enricher {
 public:
  struct Output {
    EventNotification enriched;
    std::vector<DerivedEvent> derived;
    std::vector<EventNotification> derived_notifications;
  };

  explicit Enricher(RuleSet rules = {}) : rules_(std::move(rules)) {}

  Output apply(const EventNotification& n);

  const SymbolDayState* state(const SymbolKey& s) const;
  std::size_t symbol_count() const noexcept { return states_.size(); }
  const RuleSet& rules() const noexcept { return rules_; }

 private:
  RuleSet rules_;
  std::unordered_map<SymbolKey, SymbolDayState> states_;
  std::uint64_t derived_seq_ = 0;
};

}  // namespace mdf
