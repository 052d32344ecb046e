#include "mdf/enrich.hpp"

#include <algorithm>
#include <charconv>

#include "mdf/error.hpp"

namespace mdf {

EnrichmentBlock enrichment_of(const SymbolDayState& s) {
  EnrichmentBlock b;
  b.day_open = s.open;
  b.day_high = s.high;
  b.day_low = s.low;
  b.last = s.last;
  b.total_volume = s.total_volume;
  b.trade_count = s.trade_count;
  b.prev_close = s.prev_close;
  return b;
}

SymbolDayState roll_day(const SymbolDayState& state, std::int64_t new_trading_day) {
  if (new_trading_day <= state.trading_day)
    throw ContractViolation("roll_day requires a later trading day");
  SymbolDayState out = state;
  out.trading_day = new_trading_day;
  if (state.last) out.prev_close = state.last;
  out.open.reset();
  out.high.reset();
  out.low.reset();
  out.last.reset();
  out.total_volume = 0;
  out.trade_count = 0;
  return out;
}

TickResult apply_tick(const SymbolDayState& state, const EventNotification& n) {
  if (n.symbol != state.symbol) throw ContractViolation("apply_tick symbol mismatch");
  const auto day = trading_day_of(n.source_ts_ms);
  SymbolDayState s = day > state.trading_day ? roll_day(state, day) : state;

  switch (n.event_type) {
    case EventType::Trade:
      if (!n.price || !n.size) throw ContractViolation("TRADE without price/size");
      if (day < s.trading_day) break;  // prior-day print: leaves today's state alone
      if (!s.open) s.open = n.price;
      s.high = s.high ? std::max(*s.high, *n.price) : *n.price;
      s.low = s.low ? std::min(*s.low, *n.price) : *n.price;
      s.last = n.price;
      s.total_volume += *n.size;
      s.trade_count += 1;
      break;
    case EventType::Quote:
      s.best_bid = n.bid;
      s.best_ask = n.ask;
      break;
    case EventType::Status:
      break;
  }
  EventNotification out = n;
  out.enriched = enrichment_of(s);
  return {std::move(s), std::move(out)};
}

std::optional<std::uint64_t> RuleSet::volume_threshold_for(const SymbolKey& s) const {
  auto it = volume_thresholds.find(s);
  if (it != volume_thresholds.end()) return it->second;
  return default_volume_threshold;
}

RuleSet RuleSet::parse(std::string_view text) {
  RuleSet rules;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.remove_suffix(1);
    if (line.empty()) continue;

    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw LineError("expected key=value", line_no);
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || v == 0)
      throw LineError("value must be a positive integer", line_no);

    constexpr std::string_view kVol = "volume_threshold.";
    if (key == "max_spread_bps") {
      if (v > UINT32_MAX) throw LineError("max_spread_bps out of range", line_no);
      rules.max_spread_bps = static_cast<std::uint32_t>(v);
    } else if (key == "volume_threshold.default") {
      rules.default_volume_threshold = v;
    } else if (key.substr(0, kVol.size()) == kVol) {
      auto sym = SymbolKey::parse(key.substr(kVol.size()));
      if (!sym) throw LineError("invalid symbol in key", line_no);
      rules.volume_thresholds[*sym] = v;
    } else {
      throw LineError("unknown key '" + std::string(key) + "'", line_no);
    }
    if (nl == text.size()) break;
  }
  return rules;
}

std::vector<DerivedEvent> detect_derived(const SymbolDayState& before,
                                         const SymbolDayState& after,
                                         const EventNotification& n, const RuleSet& rules) {
  const SymbolDayState base =
      after.trading_day > before.trading_day ? roll_day(before, after.trading_day) : before;
  std::vector<DerivedEvent> out;
  auto emit = [&](DerivedKind kind, DerivedPayload payload) {
    out.push_back(DerivedEvent{kind, n.symbol, SourceSeq{n.source, n.seq}, payload, n.source_ts_ms});
  };
  if (base.high && after.high && *after.high > *base.high) {
    DerivedPayload p;
    p.price = after.high;
    emit(DerivedKind::NewDayHigh, p);
  }
  if (base.low && after.low && *after.low < *base.low) {
    DerivedPayload p;
    p.price = after.low;
    emit(DerivedKind::NewDayLow, p);
  }
  if (auto t = rules.volume_threshold_for(n.symbol);
      t && base.total_volume < *t && after.total_volume >= *t) {
    DerivedPayload p;
    p.volume = after.total_volume;
    p.threshold = *t;
    emit(DerivedKind::VolumeThresholdCrossed, p);
  }
  if (n.event_type == EventType::Quote && rules.max_spread_bps && n.bid && n.ask) {
    // (ask - bid) / mid > bps / 10^4  <=>  (ask - bid) * 2 * 10^4 > bps * (ask + bid)
    const __int128 spread = n.ask->ticks() - n.bid->ticks();
    const __int128 sum = n.ask->ticks() + n.bid->ticks();
    if (spread * 20000 > static_cast<__int128>(*rules.max_spread_bps) * sum) {
      DerivedPayload p;
      p.bid = n.bid;
      p.ask = n.ask;
      emit(DerivedKind::QuoteSpreadAlert, p);
    }
  }
  return out;
}

Enricher::Output Enricher::apply(const EventNotification& n) {
  auto it = states_.find(n.symbol);
  if (it == states_.end()) {
    SymbolDayState fresh;
    fresh.symbol = n.symbol;
    fresh.trading_day = trading_day_of(n.source_ts_ms);
    it = states_.emplace(n.symbol, std::move(fresh)).first;
  }
  auto result = apply_tick(it->second, n);
  Output out;
  out.derived = detect_derived(it->second, result.state, n, rules_);
  for (const auto& d : out.derived) {
    EventNotification dn;
    dn.source = std::string(kDerivedSource);
    dn.seq = ++derived_seq_;
    dn.symbol = d.symbol;
    dn.event_type = EventType::Status;
    dn.instrument_class = n.instrument_class;
    dn.source_ts_ms = n.source_ts_ms;
    dn.ingest_ts_ms = n.ingest_ts_ms;
    dn.enriched = result.notification.enriched;
    dn.derived_kind = d.kind;
    out.derived_notifications.push_back(std::move(dn));
  }
  it->second = std::move(result.state);
  out.enriched = std::move(result.notification);
  return out;
}

const SymbolDayState* Enricher::state(const SymbolKey& s) const {
  auto it = states_.find(s);
  return it == states_.end() ? nullptr : &it->second;
}

}  // namespace mdf
