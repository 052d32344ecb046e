#include "mdf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mdf {

SymbolKey synthetic_symbol(std::uint32_t index, std::uint32_t symbol_count,
                           const std::string& market) {
  int width = 4;
  for (std::uint32_t n = symbol_count; n >= 10000; n /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof buf, "SYM%0*u.%s", width, index, market.c_str());
  return SymbolKey::of(buf);
}

SyntheticFeed::SyntheticFeed(SyntheticFeedParams params)
    : params_(std::move(params)), rng_(params_.seed) {
  symbols_.reserve(params_.symbol_count);
  prices_.reserve(params_.symbol_count);
  for (std::uint32_t i = 0; i < params_.symbol_count; ++i) {
    symbols_.push_back(synthetic_symbol(i, params_.symbol_count, params_.market));
    prices_.push_back(20.0 + static_cast<double>(rng_.between(0, 18000)) / 100.0);
  }
}

RawFeedEvent SyntheticFeed::next(std::uint64_t ts_ms) {
  const auto idx = static_cast<std::size_t>(rng_.between(0, symbols_.size() - 1));
  double& px = prices_[idx];
  const double delta = (2.0 * rng_.unit() - 1.0) * 0.002;
  px = std::max(px * (1.0 + delta), 0.01);

  RawFeedEvent e;
  e.source = params_.source;
  e.seq = ++seq_;
  e.symbol = symbols_[idx].str();
  e.source_ts_ms = ts_ms;
  const auto ticks = std::max<std::int64_t>(1, std::llround(px * Price::kScale));
  if (rng_.percent(params_.trade_pct)) {
    e.event_type = EventType::Trade;
    e.price = Price::from_ticks(ticks);
    e.size = static_cast<std::uint32_t>(rng_.between(1, 1000));
  } else {
    e.event_type = EventType::Quote;
    const auto half = std::max<std::int64_t>(1, ticks / 4000);  // ~2.5 bps each side
    e.bid = Price::from_ticks(std::max<std::int64_t>(1, ticks - half));
    e.ask = Price::from_ticks(ticks + half);
  }
  return e;
}

}  // namespace mdf
