#include "mdf/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "mdf/error.hpp"

namespace mdf {

namespace {

bool is_upper_alnum(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }
bool is_upper_alpha(char c) { return c >= 'A' && c <= 'Z'; }

}  // namespace

Price Price::from_double(double value) {
  return from_ticks(static_cast<std::int64_t>(std::llround(value * kScale)));
}

std::optional<Price> Price::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-') {
    negative = true;
    i = 1;
  }
  constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max() / 10;
  std::int64_t whole = 0;
  std::size_t whole_digits = 0;
  for (; i < text.size() && text[i] != '.'; ++i) {
    char c = text[i];
    if (c < '0' || c > '9') return std::nullopt;
    if (whole > kMax / kScale) return std::nullopt;
    whole = whole * 10 + (c - '0');
    ++whole_digits;
  }
  if (whole_digits == 0) return std::nullopt;
  std::int64_t frac = 0;
  std::size_t frac_digits = 0;
  if (i < text.size()) {
    ++i;  // '.'
    if (i == text.size()) return std::nullopt;
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c < '0' || c > '9' || frac_digits == 4) return std::nullopt;
      frac = frac * 10 + (c - '0');
      ++frac_digits;
    }
  }
  for (; frac_digits < 4; ++frac_digits) frac *= 10;
  std::int64_t ticks = whole * kScale + frac;
  return from_ticks(negative ? -ticks : ticks);
}

std::string Price::str() const {
  std::int64_t t = ticks_;
  bool negative = t < 0;
  std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(t) : static_cast<std::uint64_t>(t);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%llu.%04llu", negative ? "-" : "",
                static_cast<unsigned long long>(mag / kScale),
                static_cast<unsigned long long>(mag % kScale));
  return buf;
}

std::optional<SymbolKey> SymbolKey::parse(std::string_view rendered) {
  auto dot = rendered.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot > 12) return std::nullopt;
  auto market = rendered.substr(dot + 1);
  if (market.empty() || market.size() > 4) return std::nullopt;
  for (std::size_t i = 0; i < dot; ++i)
    if (!is_upper_alnum(rendered[i])) return std::nullopt;
  for (char c : market)
    if (!is_upper_alpha(c)) return std::nullopt;
  SymbolKey k;
  k.rendered_ = std::string(rendered);
  k.hash_ = std::hash<std::string>{}(k.rendered_);
  k.dot_ = static_cast<std::uint8_t>(dot);
  return k;
}

SymbolKey SymbolKey::of(std::string_view rendered) {
  auto k = parse(rendered);
  if (!k) throw Error("invalid symbol '" + std::string(rendered) + "'");
  return *k;
}

std::string_view to_string(EventType t) noexcept {
  switch (t) {
    case EventType::Trade: return "TRADE";
    case EventType::Quote: return "QUOTE";
    case EventType::Status: return "STATUS";
  }
  return "?";
}

std::string_view to_string(InstrumentClass c) noexcept {
  switch (c) {
    case InstrumentClass::Equity: return "EQUITY";
    case InstrumentClass::Fund: return "FUND";
    case InstrumentClass::Index: return "INDEX";
    case InstrumentClass::Other: return "OTHER";
  }
  return "?";
}

std::string_view to_string(Qoi q) noexcept {
  return q == Qoi::Conflated ? "CONFLATED" : "COMPLETE";
}

std::string_view to_string(DerivedKind k) noexcept {
  switch (k) {
    case DerivedKind::NewDayHigh: return "NEW_DAY_HIGH";
    case DerivedKind::NewDayLow: return "NEW_DAY_LOW";
    case DerivedKind::VolumeThresholdCrossed: return "VOLUME_THRESHOLD_CROSSED";
    case DerivedKind::QuoteSpreadAlert: return "QUOTE_SPREAD_ALERT";
  }
  return "?";
}

std::optional<EventType> parse_event_type(std::string_view s) noexcept {
  if (s == "TRADE") return EventType::Trade;
  if (s == "QUOTE") return EventType::Quote;
  if (s == "STATUS") return EventType::Status;
  return std::nullopt;
}

std::optional<InstrumentClass> parse_instrument_class(std::string_view s) noexcept {
  if (s == "EQUITY") return InstrumentClass::Equity;
  if (s == "FUND") return InstrumentClass::Fund;
  if (s == "INDEX") return InstrumentClass::Index;
  if (s == "OTHER") return InstrumentClass::Other;
  return std::nullopt;
}

std::optional<Qoi> parse_qoi(std::string_view s) noexcept {
  if (s == "CONFLATED") return Qoi::Conflated;
  if (s == "COMPLETE") return Qoi::Complete;
  return std::nullopt;
}

bool is_valid_source(std::string_view s) noexcept {
  if (s.empty() || s.size() > 8) return false;
  for (char c : s)
    if (!is_upper_alnum(c)) return false;
  return true;
}

bool satisfies_payload_rules(const EventNotification& n) noexcept {
  auto positive = [](const std::optional<Price>& p) { return !p || p->ticks() > 0; };
  switch (n.event_type) {
    case EventType::Trade:
      if (!n.price || !n.size || n.bid || n.ask) return false;
      break;
    case EventType::Quote:
      if (!n.bid || !n.ask || n.price || n.size) return false;
      break;
    case EventType::Status:
      if (n.price || n.size || n.bid || n.ask) return false;
      break;
  }
  if (!positive(n.price) || !positive(n.bid) || !positive(n.ask)) return false;
  if (n.bid && n.ask && *n.bid > *n.ask) return false;
  return n.seq > 0;
}

}  // namespace mdf
