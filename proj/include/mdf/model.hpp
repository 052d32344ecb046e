#pragma once

// Canonical market-data domain types shared by every module.

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace mdf {

/// Fixed-point decimal with four fractional digits (1 tick = 0.0001).
class Price {
 public:
  static constexpr std::int64_t kScale = 10000;

  constexpr Price() = default;
  static constexpr Price from_ticks(std::int64_t ticks) noexcept {
    Price p;
    p.ticks_ = ticks;
    return p;
  }
  static Price from_double(double value);

  // Accepts an optional leading '-', digits, and up to four fractional digits.
  static std::optional<Price> parse(std::string_view text);

  constexpr std::int64_t ticks() const noexcept { return ticks_; }
  double to_double() const noexcept { return static_cast<double>(ticks_) / kScale; }

  // Always renders four fractional digits, e.g. "98.2500".
  std::string str() const;

  constexpr auto operator<=>(const Price&) const = default;

 private:
  std::int64_t ticks_ = 0;
};

/// A tradable listing addressed as "CODE.MARKET".
class SymbolKey {
 public:
  SymbolKey() = default;

  static std::optional<SymbolKey> parse(std::string_view rendered);
  // Throws mdf::Error when `rendered` is not a valid symbol.
  static SymbolKey of(std::string_view rendered);

  const std::string& str() const noexcept { return rendered_; }
  std::string_view code() const noexcept { return std::string_view(rendered_).substr(0, dot_); }
  std::string_view market() const noexcept { return std::string_view(rendered_).substr(dot_ + 1); }
  bool empty() const noexcept { return rendered_.empty(); }

  std::size_t hash() const noexcept { return hash_; }

  bool operator==(const SymbolKey& o) const noexcept {
    return hash_ == o.hash_ && rendered_ == o.rendered_;
  }
  std::strong_ordering operator<=>(const SymbolKey& o) const noexcept {
    return rendered_.compare(o.rendered_) <=> 0;
  }

 private:
  std::string rendered_;
  std::size_t hash_ = std::hash<std::string>{}(std::string());
  std::uint8_t dot_ = 0;
};

enum class EventType : std::uint8_t { Trade = 1, Quote = 2, Status = 3 };
enum class InstrumentClass : std::uint8_t { Equity = 1, Fund = 2, Index = 3, Other = 4 };
enum class Qoi : std::uint8_t { Conflated = 1, Complete = 2 };

enum class DerivedKind : std::uint8_t {
  NewDayHigh = 1,
  NewDayLow = 2,
  VolumeThresholdCrossed = 3,
  QuoteSpreadAlert = 4,
};

std::string_view to_string(EventType t) noexcept;
std::string_view to_string(InstrumentClass c) noexcept;
std::string_view to_string(Qoi q) noexcept;
std::string_view to_string(DerivedKind k) noexcept;
std::optional<EventType> parse_event_type(std::string_view s) noexcept;
std::optional<InstrumentClass> parse_instrument_class(std::string_view s) noexcept;
std::optional<Qoi> parse_qoi(std::string_view s) noexcept;

// [A-Z0-9]{1,8}
bool is_valid_source(std::string_view s) noexcept;

struct EnrichmentBlock {
  std::optional<Price> day_open;
  std::optional<Price> day_high;
  std::optional<Price> day_low;
  std::optional<Price> last;
  std::uint64_t total_volume = 0;
  std::uint64_t trade_count = 0;
  std::optional<Price> prev_close;

  bool operator==(const EnrichmentBlock&) const = default;
};

struct EventNotification {
  std::string source;
  std::uint64_t seq = 0;
  SymbolKey symbol;
  EventType event_type = EventType::Status;
  std::optional<InstrumentClass> instrument_class;
  std::optional<Price> price;
  std::optional<std::uint32_t> size;
  std::optional<Price> bid;
  std::optional<Price> ask;
  std::uint64_t source_ts_ms = 0;
  std::uint64_t ingest_ts_ms = 0;
  std::optional<EnrichmentBlock> enriched;
  // Only set on notifications published by the enrichment stage on the
  // reserved DERIVED source.
  std::optional<DerivedKind> derived_kind;

  bool operator==(const EventNotification&) const = default;
};

using NotificationPtr = std::shared_ptr<const EventNotification>;

// Field-presence rules per event type and the price/quote sanity rules.
bool satisfies_payload_rules(const EventNotification& n) noexcept;

struct SourceSeq {
  std::string source;
  std::uint64_t seq = 0;
  auto operator<=>(const SourceSeq&) const = default;
};

}  // namespace mdf

template <>
struct std::hash<mdf::SymbolKey> {
  std::size_t operator()(const mdf::SymbolKey& k) const noexcept {
    return k.hash();
  }
};
