#pragma once

// Conjunctive content filter over (source, instrument class, event type,
// symbol) with wildcard fields, plus the covering/merging algebra used to
// compact interest advertisements.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mdf/bytes.hpp"
#include "mdf/model.hpp"

namespace mdf {

// Bit set over EventType values (bit i-1 for EventType i).
class EventTypeSet {
 public:
  static constexpr std::uint8_t kAll = 0x7;

  constexpr EventTypeSet() = default;
  constexpr explicit EventTypeSet(std::uint8_t mask) : mask_(mask & kAll) {}
  static constexpr EventTypeSet of(std::initializer_list<EventType> types) {
    std::uint8_t m = 0;
    for (auto t : types) m |= bit(t);
    return EventTypeSet(m);
  }

  constexpr bool contains(EventType t) const { return (mask_ & bit(t)) != 0; }
  constexpr bool includes(EventTypeSet o) const { return (o.mask_ & ~mask_) == 0; }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr std::uint8_t mask() const { return mask_; }
  constexpr bool operator==(const EventTypeSet&) const = default;

 private:
  static constexpr std::uint8_t bit(EventType t) {
    return static_cast<std::uint8_t>(1u << (static_cast<unsigned>(t) - 1));
  }
  std::uint8_t mask_ = 0;
};

// Sorted, duplicate-free, non-empty set of symbols.
struct SymbolSet {
  std::vector<SymbolKey> symbols;
  bool contains(const SymbolKey& k) const;
  bool operator==(const SymbolSet&) const = default;
};

struct SymbolPrefix {
  std::string prefix;  // non-empty prefix of the rendered "CODE.MARKET" form
  bool operator==(const SymbolPrefix&) const = default;
};

using SymbolSelector = std::variant<std::monostate, SymbolSet, SymbolPrefix>;

class SubscriptionFilter {
 public:
  SubscriptionFilter() = default;  // all-wildcard

  SubscriptionFilter& source(std::string s);
  SubscriptionFilter& instrument_class(InstrumentClass c);
  SubscriptionFilter& event_types(EventTypeSet types);
  SubscriptionFilter& symbols(std::vector<SymbolKey> syms);
  SubscriptionFilter& symbol_prefix(std::string prefix);

  const std::optional<std::string>& source() const { return source_; }
  const std::optional<InstrumentClass>& instrument_class() const { return class_; }
  const std::optional<EventTypeSet>& event_types() const { return types_; }
  const SymbolSelector& symbol_selector() const { return selector_; }
  const SymbolSet* symbol_set() const { return std::get_if<SymbolSet>(&selector_); }
  const SymbolPrefix* symbol_prefix() const { return std::get_if<SymbolPrefix>(&selector_); }

  bool is_wildcard() const;

  bool operator==(const SubscriptionFilter&) const = default;

 private:
  std::optional<std::string> source_;
  std::optional<InstrumentClass> class_;
  std::optional<EventTypeSet> types_;  // never empty; the full set is stored as absent
  SymbolSelector selector_;
};

struct Subscription {
  std::uint64_t id = 0;
  SubscriptionFilter filter;
  Qoi qoi = Qoi::Complete;
  bool operator==(const Subscription&) const = default;
};

bool filter_matches(const SubscriptionFilter& f, const EventNotification& n);

// Sound field-wise test: true implies every notification matched by `b` is
// matched by `a`.
bool filter_covers(const SubscriptionFilter& a, const SubscriptionFilter& b);

// Removes filters covered by another member. Output is sorted by canonical
// encoding; of two mutually covering filters the canonically smaller survives.
std::vector<SubscriptionFilter> merge_filters(std::vector<SubscriptionFilter> fs);

// Canonical TLV: tag u8, len u8, value. 1=source, 2=class u8, 3=type mask u8,
// 4=symbol (repeated, ascending), 5=prefix. Equal filters encode identically.
void encode_filter(const SubscriptionFilter& f, Bytes& out);
Bytes encode_filter(const SubscriptionFilter& f);
SubscriptionFilter decode_filter(ByteSpan bytes);

// Canonical ordering: bytewise comparison of encode_filter().
bool canonical_less(const SubscriptionFilter& a, const SubscriptionFilter& b);

// Expression form: space-separated key=value pairs, keys source, class,
// type (comma list), symbol (comma list), prefix. Empty text = wildcard.
// Throws ParseError carrying the 0-based character position of the problem.
SubscriptionFilter parse_filter_expr(std::string_view text);
std::string format_filter_expr(const SubscriptionFilter& f);

}  // namespace mdf
