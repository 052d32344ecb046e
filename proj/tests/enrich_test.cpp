#include <gtest/gtest.h>

#include <map>

#include "generators.hpp"
#include "mdf/enrich.hpp"
#include "mdf/error.hpp"

using namespace mdf;
using namespace mdf::testing;

namespace {

constexpr std::uint64_t kDay0 = 19'800ULL * kMillisPerDay;

EventNotification tick(EventType t, const char* sym, std::uint64_t ts, std::uint64_t seq = 1) {
  EventNotification n;
  n.source = "SIM1";
  n.seq = seq;
  n.symbol = SymbolKey::of(sym);
  n.event_type = t;
  n.source_ts_ms = ts;
  n.ingest_ts_ms = ts;
  return n;
}

EventNotification trade(const char* px, std::uint32_t size, std::uint64_t ts = kDay0 + 1000,
                        const char* sym = "AAA.SIM") {
  auto n = tick(EventType::Trade, sym, ts);
  n.price = Price::parse(px);
  n.size = size;
  return n;
}

EventNotification quote(const char* bid, const char* ask, std::uint64_t ts = kDay0 + 1000,
                        const char* sym = "AAA.SIM") {
  auto n = tick(EventType::Quote, sym, ts);
  n.bid = Price::parse(bid);
  n.ask = Price::parse(ask);
  return n;
}

SymbolDayState fresh(const char* sym = "AAA.SIM", std::uint64_t ts = kDay0) {
  SymbolDayState s;
  s.symbol = SymbolKey::of(sym);
  s.trading_day = trading_day_of(ts);
  return s;
}

SymbolDayState run(SymbolDayState s, const std::vector<EventNotification>& ticks) {
  for (const auto& n : ticks) s = apply_tick(s, n).state;
  return s;
}

}  // namespace

TEST(ApplyTick, FirstTrade) {
  auto r = apply_tick(fresh(), trade("100.0000", 500));
  EXPECT_EQ(r.state.open, Price::parse("100"));
  EXPECT_EQ(r.state.high, Price::parse("100"));
  EXPECT_EQ(r.state.low, Price::parse("100"));
  EXPECT_EQ(r.state.last, Price::parse("100"));
  EXPECT_EQ(r.state.total_volume, 500u);
  EXPECT_EQ(r.state.trade_count, 1u);
  ASSERT_TRUE(r.notification.enriched);
  EXPECT_EQ(*r.notification.enriched, enrichment_of(r.state));
}

TEST(ApplyTick, HighLowLastVolume) {
  auto s = run(fresh(), {trade("100", 1), trade("105", 1), trade("98", 1)});
  EXPECT_EQ(s.high->str(), "105.0000");
  EXPECT_EQ(s.low->str(), "98.0000");
  EXPECT_EQ(s.last->str(), "98.0000");
  EXPECT_EQ(s.open->str(), "100.0000");
  EXPECT_EQ(s.total_volume, 3u);

  auto q = apply_tick(s, quote("99.90", "100.10")).state;
  EXPECT_EQ(q.best_bid, Price::parse("99.90"));
  EXPECT_EQ(q.best_ask, Price::parse("100.10"));
  q.best_bid.reset();
  q.best_ask.reset();
  EXPECT_EQ(q, s);
}

TEST(ApplyTick, StatusLeavesStateAlone) {
  auto s = run(fresh(), {trade("100", 7)});
  auto r = apply_tick(s, tick(EventType::Status, "AAA.SIM", kDay0 + 5000));
  EXPECT_EQ(r.state, s);
  EXPECT_EQ(*r.notification.enriched, enrichment_of(s));
}

TEST(ApplyTick, SymbolMismatchIsContractViolation) {
  EXPECT_THROW(apply_tick(fresh("BBB.SIM"), trade("1", 1)), ContractViolation);
}

TEST(ApplyTick, RolloverBeforeApplying) {
  auto s = run(fresh(), {trade("100", 10), trade("98", 5)});
  auto r = apply_tick(s, trade("101", 3, kDay0 + kMillisPerDay + 10));
  EXPECT_EQ(r.state.trading_day, s.trading_day + 1);
  EXPECT_EQ(r.state.prev_close, Price::parse("98"));
  EXPECT_EQ(r.state.open, Price::parse("101"));
  EXPECT_EQ(r.state.total_volume, 3u);
  EXPECT_EQ(r.state.trade_count, 1u);
}

TEST(ApplyTick, EarlierDayTradeDoesNotTouchToday) {
  auto s = run(fresh(), {trade("100", 10, kDay0 + kMillisPerDay)});
  auto r = apply_tick(s, trade("50", 10, kDay0 + 10));
  EXPECT_EQ(r.state, s);
}

TEST(RollDay, Examples) {
  auto s = run(fresh(), {trade("98", 4)});
  s.best_bid = Price::parse("97");
  auto r = roll_day(s, s.trading_day + 1);
  EXPECT_EQ(r.prev_close->str(), "98.0000");
  EXPECT_EQ(r.total_volume, 0u);
  EXPECT_EQ(r.trade_count, 0u);
  EXPECT_FALSE(r.open || r.high || r.low || r.last);
  EXPECT_EQ(r.best_bid, Price::parse("97"));

  auto empty = fresh();
  empty.prev_close = Price::parse("12");
  EXPECT_EQ(roll_day(empty, empty.trading_day + 3).prev_close, Price::parse("12"));

  EXPECT_THROW(roll_day(s, s.trading_day), ContractViolation);
  EXPECT_THROW(roll_day(s, s.trading_day - 1), ContractViolation);
}

TEST(RollDay, TwoRollsEqualOne) {
  Rng rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    auto s = fresh();
    auto k = uniform(rng, 0, 5);
    for (std::uint64_t i = 0; i < k; ++i) {
      auto px = Price::from_ticks(static_cast<std::int64_t>(uniform(rng, 1, 2'000'000)));
      auto n = trade("1", static_cast<std::uint32_t>(uniform(rng, 1, 100)));
      n.price = px;
      s = apply_tick(s, n).state;
    }
    const auto a = static_cast<std::int64_t>(uniform(rng, 1, 5));
    const auto b = a + static_cast<std::int64_t>(uniform(rng, 1, 5));
    auto twice = roll_day(roll_day(s, s.trading_day + a), s.trading_day + b);
    auto once = roll_day(s, s.trading_day + b);
    EXPECT_EQ(twice, once);
    EXPECT_EQ(once.prev_close, s.last ? s.last : s.prev_close);
  }
}

TEST(DetectDerived, FirstTradeNoHigh) {
  auto before = fresh();
  auto n = trade("100", 1);
  auto after = apply_tick(before, n).state;
  EXPECT_TRUE(detect_derived(before, after, n, {}).empty());
}

TEST(DetectDerived, NewHighPayload) {
  auto s0 = fresh();
  auto n1 = trade("100", 1);
  auto s1 = apply_tick(s0, n1).state;
  auto n2 = trade("105", 1);
  auto s2 = apply_tick(s1, n2).state;
  auto d1 = detect_derived(s0, s1, n1, {});
  auto d2 = detect_derived(s1, s2, n2, {});
  EXPECT_TRUE(d1.empty());
  ASSERT_EQ(d2.size(), 1u);
  EXPECT_EQ(d2[0].kind, DerivedKind::NewDayHigh);
  EXPECT_EQ(d2[0].payload.price->str(), "105.0000");
}

TEST(DetectDerived, VolumeThresholdCrossedOnce) {
  RuleSet rules;
  rules.default_volume_threshold = 1000;
  auto s0 = fresh();
  auto n1 = trade("100", 600);
  auto s1 = apply_tick(s0, n1).state;
  auto n2 = trade("100", 600);
  auto s2 = apply_tick(s1, n2).state;
  auto n3 = trade("100", 600);
  auto s3 = apply_tick(s2, n3).state;
  EXPECT_TRUE(detect_derived(s0, s1, n1, rules).empty());
  auto d = detect_derived(s1, s2, n2, rules);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, DerivedKind::VolumeThresholdCrossed);
  EXPECT_EQ(d[0].payload.volume, 1200u);
  EXPECT_TRUE(detect_derived(s2, s3, n3, rules).empty());
}

TEST(DetectDerived, SpreadAlertBoundary) {
  RuleSet rules;
  rules.max_spread_bps = 50;
  auto s = fresh();
  // spread 0.5 on mid 100 is exactly 50 bps: not strictly greater.
  auto at = quote("99.75", "100.25");
  EXPECT_TRUE(detect_derived(s, apply_tick(s, at).state, at, rules).empty());
  auto over = quote("99.74", "100.25");
  auto d = detect_derived(s, apply_tick(s, over).state, over, rules);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].kind, DerivedKind::QuoteSpreadAlert);
}

TEST(DetectDerived, EmissionOrder) {
  RuleSet rules;
  rules.default_volume_threshold = 10;
  auto s = run(fresh(), {trade("100", 1), trade("90", 1)});
  auto n = trade("110", 50);
  auto d = detect_derived(s, apply_tick(s, n).state, n, rules);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].kind, DerivedKind::NewDayHigh);
  EXPECT_EQ(d[1].kind, DerivedKind::VolumeThresholdCrossed);
  EXPECT_EQ(d[0].trigger, (SourceSeq{"SIM1", 1}));
}

TEST(RuleSetParse, KeysAndErrors) {
  auto r = RuleSet::parse(
      "# rules\n"
      "max_spread_bps=50\n"
      "\n"
      "volume_threshold.default=100000\n"
      "volume_threshold.AAA.SIM=5000  # override\n");
  EXPECT_EQ(r.max_spread_bps, 50u);
  EXPECT_EQ(r.volume_threshold_for(SymbolKey::of("AAA.SIM")), 5000u);
  EXPECT_EQ(r.volume_threshold_for(SymbolKey::of("BBB.SIM")), 100000u);

  auto line_of = [](const char* text) -> std::size_t {
    try {
      RuleSet::parse(text);
    } catch (const LineError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("max_spread_bps=50\nbogus=1\n"), 2u);
  EXPECT_EQ(line_of("volume_threshold.default=0"), 1u);
  EXPECT_EQ(line_of("\n\nmax_spread_bps"), 3u);
  EXPECT_EQ(line_of("volume_threshold.aaa=5"), 1u);
}

// Per-(symbol, day) brute force: first/max/min/last/sum/count.
TEST(Enricher, OracleEquivalenceAndConsistency) {
  Rng rng(42);
  const int kSymbols = 32;
  std::vector<std::string> syms;
  for (int i = 0; i < kSymbols; ++i) syms.push_back("S" + std::to_string(i) + ".SIM");

  std::vector<EventNotification> ticks;
  std::uint64_t ts = kDay0;
  for (std::uint64_t i = 0; i < 10'000; ++i) {
    ts += uniform(rng, 0, 60'000);
    const auto& sym = syms[rng() % syms.size()];
    EventNotification n;
    if (coin(rng, 70)) {
      n = trade("1", static_cast<std::uint32_t>(uniform(rng, 1, 1000)), ts, sym.c_str());
      n.price = Price::from_ticks(static_cast<std::int64_t>(uniform(rng, 1, 5'000'000)));
    } else if (coin(rng, 80)) {
      auto bid = static_cast<std::int64_t>(uniform(rng, 1, 5'000'000));
      n = quote("1", "1", ts, sym.c_str());
      n.bid = Price::from_ticks(bid);
      n.ask = Price::from_ticks(bid + static_cast<std::int64_t>(uniform(rng, 0, 10'000)));
    } else {
      n = tick(EventType::Status, sym.c_str(), ts);
    }
    n.seq = i + 1;
    ticks.push_back(n);
  }

  struct Agg {
    std::vector<std::int64_t> prices;
    std::uint64_t volume = 0;
  };
  std::map<std::pair<std::string, std::int64_t>, Agg> oracle;
  std::map<std::string, std::int64_t> last_day;
  for (const auto& n : ticks) {
    last_day[n.symbol.str()] = trading_day_of(n.source_ts_ms);
    if (n.event_type != EventType::Trade) continue;
    auto& a = oracle[{n.symbol.str(), trading_day_of(n.source_ts_ms)}];
    a.prices.push_back(n.price->ticks());
    a.volume += *n.size;
  }

  Enricher e;
  for (const auto& n : ticks) {
    auto out = e.apply(n);
    ASSERT_EQ(*out.enriched.enriched, enrichment_of(*e.state(n.symbol)));
  }

  for (const auto& [sym, day] : last_day) {
    const auto* st = e.state(SymbolKey::of(sym));
    ASSERT_NE(st, nullptr);
    EXPECT_EQ(st->trading_day, day);
    auto it = oracle.find({sym, day});
    if (it == oracle.end()) {
      EXPECT_FALSE(st->open);
      EXPECT_EQ(st->total_volume, 0u);
      continue;
    }
    const auto& p = it->second.prices;
    EXPECT_EQ(st->open->ticks(), p.front());
    EXPECT_EQ(st->last->ticks(), p.back());
    EXPECT_EQ(st->high->ticks(), *std::max_element(p.begin(), p.end()));
    EXPECT_EQ(st->low->ticks(), *std::min_element(p.begin(), p.end()));
    EXPECT_EQ(st->total_volume, it->second.volume);
    EXPECT_EQ(st->trade_count, p.size());
  }
}

TEST(Enricher, ReplayYieldsIdenticalDerivedEvents) {
  RuleSet rules;
  rules.default_volume_threshold = 5000;
  rules.max_spread_bps = 20;
  Rng rng(3);
  std::vector<EventNotification> ticks;
  std::uint64_t ts = kDay0;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    ts += uniform(rng, 0, 200'000);
    const char* sym = coin(rng) ? "AAA.SIM" : "BBB.SIM";
    EventNotification n;
    auto px = static_cast<std::int64_t>(uniform(rng, 900'000, 1'100'000));
    if (coin(rng)) {
      n = trade("1", static_cast<std::uint32_t>(uniform(rng, 1, 800)), ts, sym);
      n.price = Price::from_ticks(px);
    } else {
      n = quote("1", "1", ts, sym);
      n.bid = Price::from_ticks(px);
      n.ask = Price::from_ticks(px + static_cast<std::int64_t>(uniform(rng, 0, 4000)));
    }
    n.seq = i + 1;
    ticks.push_back(n);
  }
  auto collect = [&] {
    Enricher e(rules);
    std::vector<DerivedEvent> ds;
    std::vector<EventNotification> ns;
    for (const auto& n : ticks) {
      auto out = e.apply(n);
      ds.insert(ds.end(), out.derived.begin(), out.derived.end());
      ns.insert(ns.end(), out.derived_notifications.begin(), out.derived_notifications.end());
    }
    return std::make_pair(ds, ns);
  };
  auto a = collect();
  auto b = collect();
  EXPECT_FALSE(a.first.empty());
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    EXPECT_EQ(a.second[i].source, "DERIVED");
    EXPECT_EQ(a.second[i].seq, i + 1);
    EXPECT_EQ(a.second[i].event_type, EventType::Status);
    EXPECT_EQ(a.second[i].derived_kind, a.first[i].kind);
  }
}
