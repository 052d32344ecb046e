// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "generators.hpp"
#include "mdf/broker.hpp"
#include "mdf/codec.hpp"
#include "mdf/enrich.hpp"
#include "mdf/feedpipe.hpp"
#include "mdf/plant.hpp"
#include "mdf/simnet.hpp"
#include "mdf/store.hpp"
#include "mdf/synth.hpp"
#include "scenario_gen.hpp"
#include "sim_oracle.hpp"

using namespace mdf;
using namespace mdf::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string first_failure;

  void fail(const std::string& why) {
    if (pass) first_failure = why;
    pass = false;
  }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// --- 1: filter algebra -------------------------------------------------------

bool subset(const std::vector<bool>& a, const std::vector<bool>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

std::vector<bool> union_of(const std::vector<std::vector<bool>>& sets, std::size_t n) {
  std::vector<bool> out(n, false);
  for (const auto& s : sets)
    for (std::size_t i = 0; i < n; ++i) out[i] = out[i] || s[i];
  return out;
}

Outcome criterion1() {
  constexpr int kPairs = 10'000, kSets = 10'000;
  Outcome o;
  const auto t0 = Clock::now();
  Universe u;
  const auto universe = u.enumerate();
  Rng rng(1001);
  int covered = 0;
  for (int i = 0; i < kPairs && o.pass; ++i) {
    auto a = random_filter(rng, u);
    auto b = coin(rng, 30) ? a : random_filter(rng, u);
    if (coin(rng, 20)) b = SubscriptionFilter(a).source(u.sources[rng() % u.sources.size()]);
    const auto ma = match_set(a, universe), mb = match_set(b, universe);
    for (std::size_t k = 0; k < universe.size(); ++k)
      if (filter_matches(a, universe[k]) != ma[k]) {
        o.fail("filter_matches disagrees with oracle for " + format_filter_expr(a));
        break;
      }
    if (filter_covers(a, b)) {
      ++covered;
      if (!subset(mb, ma)) o.fail("unsound cover: " + format_filter_expr(a) + " / " + format_filter_expr(b));
    }
  }
  for (int i = 0; i < kSets && o.pass; ++i) {
    std::vector<SubscriptionFilter> fs;
    const auto k = uniform(rng, 0, 6);
    for (std::uint64_t j = 0; j < k; ++j) fs.push_back(random_filter(rng, u));
    const auto out = merge_filters(fs);
    std::vector<std::vector<bool>> in_sets, out_sets;
    for (const auto& f : fs) in_sets.push_back(match_set(f, universe));
    for (const auto& f : out) out_sets.push_back(match_set(f, universe));
    if (union_of(in_sets, universe.size()) != union_of(out_sets, universe.size()))
      o.fail("merge_filters changed the matched union");
    if (out.size() > fs.size()) o.fail("merge_filters grew the list");
    for (std::size_t x = 0; x < out.size(); ++x)
      for (std::size_t y = 0; y < out.size(); ++y)
        if (x != y && filter_covers(out[x], out[y])) o.fail("merge_filters left a covered filter");
  }
  const double secs = seconds_since(t0);
  if (secs >= 60) o.fail(fmt("runtime %.1f s >= 60 s", secs));
  o.detail = fmt("%d pairs (%d covering), %d sets vs brute-force oracle, %.1f s", kPairs, covered, kSets, secs);
  return o;
}

// --- 2: codec ----------------------------------------------------------------

Outcome criterion2() {
  constexpr int kCases = 100'000;
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2002);
  int failures = 0;
  for (int i = 0; i < kCases; ++i) {
    const auto n = random_notification(rng);
    try {
      if (decode_notification(encode_notification(n)) != n) ++failures;
    } catch (const std::exception& e) {
      ++failures;
    }
  }
  if (failures) o.fail(fmt("%d round-trip failures", failures));
  o.detail = fmt("%d random notifications, %d failures, %.1f s", kCases, failures, seconds_since(t0));
  return o;
}

// --- 3: ticker plant ---------------------------------------------------------

enum class Inject { None, Malformed, Crossed, Stale, Future, NonPositive, Duplicate };

struct FeedFileResult {
  std::uint64_t events = 0;
  std::uint64_t injected = 0;
};

// One random feed file through FeedHandler + TickerPlant, checked against
// what the generator knows about every record it wrote.
FeedFileResult run_feed_file(std::uint64_t seed, Outcome& o) {
  Rng rng(seed);
  const bool binary = coin(rng, 40);
  const auto symbols = static_cast<std::uint32_t>(uniform(rng, 1, 32));
  const auto events = uniform(rng, 1, 10'000);
  const int bad_pct = static_cast<int>(uniform(rng, 0, 15));
  SyntheticFeed gen({"PLANT", symbols, seed, static_cast<unsigned>(uniform(rng, 10, 90)), "SIM"});

  Broker broker(BrokerConfig{"P", "S"});
  EventStore store;
  TickerPlant plant(broker, &store);
  std::uint64_t now = 19'800ULL * kMillisPerDay + uniform(rng, 0, kMillisPerDay);
  FeedConfig cfg;
  cfg.feed_id = "file";
  cfg.expected_source = "PLANT";
  FeedHandler handler(
      cfg, [&] { return now; }, [&](EventNotification n) { plant.ingest(n, now); });

  std::array<std::uint64_t, kRejectCodeCount> want_reasons{};
  std::uint64_t want_accepted = 0;
  std::optional<RawFeedEvent> last_accepted;
  std::map<std::string, std::vector<RawFeedEvent>> accepted_by_symbol;
  FeedFileResult r;

  for (std::uint64_t i = 0; i < events; ++i) {
    now += uniform(rng, 0, 60'000);
    auto e = gen.next(now);
    Inject inj = Inject::None;
    if (coin(rng, bad_pct)) {
      inj = static_cast<Inject>(uniform(rng, binary ? 2 : 1, 6));
      if (inj == Inject::Duplicate && !last_accepted) inj = Inject::Stale;
    }
    std::string text;
    switch (inj) {
      case Inject::None:
        break;
      case Inject::Malformed:
        text = format_text_line(e);
        text = text.substr(0, text.find('|', text.find('|') + 1));  // two fields only
        want_reasons[static_cast<std::size_t>(RejectCode::Malformed)]++;
        break;
      case Inject::Crossed: {
        const auto p = e.price ? *e.price : *e.bid;
        e.event_type = EventType::Quote;
        e.price.reset();
        e.size.reset();
        e.bid = Price::from_ticks(p.ticks() + 100);
        e.ask = p;
        want_reasons[static_cast<std::size_t>(RejectCode::CrossedQuote)]++;
        break;
      }
      case Inject::Stale:
        e.source_ts_ms = now - cfg.max_past_skew_ms - 1 - uniform(rng, 0, 100'000);
        want_reasons[static_cast<std::size_t>(RejectCode::StaleTimestamp)]++;
        break;
      case Inject::Future:
        e.source_ts_ms = now + cfg.max_future_skew_ms + 1 + uniform(rng, 0, 100'000);
        want_reasons[static_cast<std::size_t>(RejectCode::FutureTimestamp)]++;
        break;
      case Inject::NonPositive:
        e.event_type = EventType::Trade;
        e.bid.reset();
        e.ask.reset();
        e.price = Price::from_ticks(0);
        e.size = 10;
        want_reasons[static_cast<std::size_t>(RejectCode::NonPositivePrice)]++;
        break;
      case Inject::Duplicate:
        e = *last_accepted;
        e.source_ts_ms = now;
        want_reasons[static_cast<std::size_t>(RejectCode::DuplicateOrRegressedSeq)]++;
        break;
    }
    if (inj == Inject::None) {
      ++want_accepted;
      last_accepted = e;
      accepted_by_symbol[e.symbol].push_back(e);
    } else {
      ++r.injected;
    }

    // Deliver the record in up to three pieces.
    Bytes bytes;
    if (binary) {
      bytes = encode_binary_event(e);
    } else {
      if (text.empty()) text = format_text_line(e);
      text += '\n';
      bytes.assign(text.begin(), text.end());
    }
    std::size_t pos = 0;
    while (pos < bytes.size()) {
      const auto len = coin(rng, 70) ? bytes.size() - pos : uniform(rng, 1, bytes.size() - pos);
      const ByteSpan chunk(bytes.data() + pos, len);
      if (binary)
        handler.feed_binary(chunk);
      else
        handler.feed_text(std::string_view(reinterpret_cast<const char*>(chunk.data()), chunk.size()));
      pos += len;
    }
  }
  handler.finish();
  r.events = events;

  const auto& st = handler.stats();
  const auto tag = fmt("file seed=%llu: ", static_cast<unsigned long long>(seed));
  if (st.parsed != st.accepted + st.rejected) o.fail(tag + "parsed != accepted + rejected");
  if (st.parsed != events) o.fail(tag + fmt("parsed %llu of %llu records", (unsigned long long)st.parsed, (unsigned long long)events));
  if (st.accepted != want_accepted) o.fail(tag + "accepted count differs from oracle");
  if (st.by_reason != want_reasons) o.fail(tag + "reject reasons differ from oracle");
  if (plant.published() != want_accepted || store.end() != want_accepted) o.fail(tag + "plant/store count differs");

  // Brute-force OHLC and volume for the trading day of each symbol's last
  // accepted event.
  for (const auto& [sym, evs] : accepted_by_symbol) {
    const auto day = trading_day_of(evs.back().source_ts_ms);
    std::vector<std::int64_t> prices;
    std::uint64_t volume = 0;
    for (const auto& e : evs)
      if (e.event_type == EventType::Trade && trading_day_of(e.source_ts_ms) == day) {
        prices.push_back(e.price->ticks());
        volume += *e.size;
      }
    const auto* s = plant.enricher().state(SymbolKey::of(sym));
    if (!s) {
      o.fail(tag + "no enrichment state for " + sym);
      continue;
    }
    bool ok = s->trading_day == day && s->total_volume == volume && s->trade_count == prices.size();
    if (prices.empty()) {
      ok = ok && !s->open && !s->high && !s->low && !s->last;
    } else {
      ok = ok && s->open && s->open->ticks() == prices.front() && s->last->ticks() == prices.back() &&
           s->high->ticks() == *std::max_element(prices.begin(), prices.end()) &&
           s->low->ticks() == *std::min_element(prices.begin(), prices.end());
    }
    if (!ok) o.fail(tag + "enrichment state differs from oracle for " + sym);
  }
  return r;
}

Outcome criterion3() {
  constexpr int kFiles = 120;
  Outcome o;
  const auto t0 = Clock::now();
  std::uint64_t events = 0, injected = 0;
  for (int f = 0; f < kFiles; ++f) {
    const auto r = run_feed_file(3000 + static_cast<std::uint64_t>(f), o);
    events += r.events;
    injected += r.injected;
  }
  o.detail = fmt("%d feed files, %llu records (%llu injected bad), %.1f s", kFiles,
                 (unsigned long long)events, (unsigned long long)injected, seconds_since(t0));
  return o;
}

// --- 4: random simnet scenarios ---------------------------------------------

Outcome criterion4() {
  constexpr int kScenarios = 200;
  Outcome o;
  const auto t0 = Clock::now();
  int faults = 0, complete = 0, conflated = 0;
  for (int i = 0; i < kScenarios; ++i) {
    const auto text = random_scenario(4000 + static_cast<std::uint64_t>(i));
    const auto sc = sim::load_scenario(text);
    faults += !sc.events.empty();
    for (const auto& s : sc.subs) (s.qoi == Qoi::Complete ? complete : conflated)++;
    const auto r = sim::run(sc);
    if (!r.report.violations.empty())
      o.fail(fmt("scenario seed=%d: ", 4000 + i) + r.report.violations.front());
  }
  const double secs = seconds_since(t0);
  if (secs >= 300) o.fail(fmt("runtime %.1f s >= 300 s", secs));
  o.detail = fmt("%d scenarios (%d with a link fault, %d COMPLETE / %d CONFLATED subs), %.1f s",
                 kScenarios, faults, complete, conflated, secs);
  return o;
}

// --- 5: traffic shaping on the 3-site chain ---------------------------------

const char* kChain = R"(site NY
site LDN
site TYO
broker A site=NY store=mem
broker B site=LDN
broker C site=TYO
link A B latency_ms=35
link B C latency_ms=110
feed F broker=A source=SIM market=SIM symbols=6 rate=300 seed=7 trade_pct=70
sub far broker=C qoi=COMPLETE filter="symbol=SYM0000.SIM" drain=1000
sub far2 broker=C qoi=CONFLATED filter="symbol=SYM0000.SIM,SYM0002.SIM" drain=50
sub mid broker=B qoi=COMPLETE filter="symbol=SYM0002.SIM,SYM0003.SIM" drain=1000
sub home broker=A qoi=COMPLETE filter="symbol=SYM0001.SIM" drain=1000
sub home2 broker=A qoi=CONFLATED filter="" drain=100
end 8000
)";

Outcome criterion5() {
  Outcome o;
  const auto sc = sim::load_scenario(kChain);
  const auto r = sim::run(sc);
  if (!r.report.violations.empty()) o.fail(r.report.violations.front());
  const auto pubs = published_from_log(r.log);
  const auto want = oracle_crossings(sc, pubs, true);
  if (r.report.inter_site_pub_crossings != want)
    o.fail(fmt("inter-site crossings %llu != oracle %llu", (unsigned long long)r.report.inter_site_pub_crossings,
               (unsigned long long)want));
  std::set<std::uint64_t> local;
  for (const auto& p : pubs)
    if (p.n.symbol.str() == "SYM0001.SIM") local.insert(p.n.seq);
  std::uint64_t local_crossings = 0;
  for (auto line : log_lines(r.log, "XMIT"))
    if (log_field(line, "kind") == "PUB" && local.count(std::stoull(std::string(log_field(line, "seq")))))
      ++local_crossings;
  if (local_crossings) o.fail(fmt("local-only symbol crossed %llu times", (unsigned long long)local_crossings));
  if (local.empty()) o.fail("no local-only publications");
  o.detail = fmt("inter-site PUB crossings %llu, oracle %llu; local-only symbol: %zu published, %llu crossings",
                 (unsigned long long)r.report.inter_site_pub_crossings, (unsigned long long)want, local.size(),
                 (unsigned long long)local_crossings);
  return o;
}

// --- 6: fan-out --------------------------------------------------------------

Outcome criterion6() {
  Outcome o;
  std::string detail;
  for (int n : {10, 100}) {
    std::string text =
        "site S1\nsite S2\nbroker P site=S1 store=mem\nbroker L site=S2\nlink P L latency_ms=20\n"
        "feed F broker=P source=SIM market=SIM symbols=3 rate=150 seed=5 trade_pct=80\n";
    for (int i = 0; i < n; ++i)
      text += "sub U" + std::to_string(i) + " broker=L qoi=COMPLETE filter=\"source=SIM\" drain=1000\n";
    text += "end 4000\n";
    const auto sc = sim::load_scenario(text);
    const auto r = sim::run(sc);
    if (!r.report.violations.empty()) o.fail(r.report.violations.front());
    std::map<std::uint64_t, int> inbound, delivered;
    for (auto line : log_lines(r.log, "XMIT"))
      if (log_field(line, "kind") == "PUB" && log_field(line, "to") == "L")
        ++inbound[std::stoull(std::string(log_field(line, "seq")))];
    for (auto line : log_lines(r.log, "DELIVER")) ++delivered[std::stoull(std::string(log_field(line, "seq")))];
    const auto pubs = published_from_log(r.log);
    int bad_in = 0, bad_out = 0;
    for (const auto& p : pubs) {
      bad_in += inbound[p.n.seq] != 1;
      bad_out += delivered[p.n.seq] != n;
    }
    if (pubs.empty()) o.fail("nothing published");
    if (bad_in) o.fail(fmt("N=%d: %d notifications without exactly one inbound copy", n, bad_in));
    if (bad_out) o.fail(fmt("N=%d: %d notifications not delivered exactly N times", n, bad_out));
    detail += fmt("%sN=%d: %zu notifications, each 1 inbound copy and %d local deliveries", detail.empty() ? "" : "; ",
                  n, pubs.size(), n);
  }
  o.detail = detail;
  return o;
}

// --- 7: ring resilience ------------------------------------------------------

const char* kRing = R"(site S1
site S2
site S3
broker A site=S1 store=mem
broker B site=S2
broker C site=S3
link A B latency_ms=5
link B C latency_ms=5
link A C latency_ms=20
feed F broker=A source=SIM market=SIM symbols=8 rate=200 seed=3 trade_pct=50
sub c1 broker=C qoi=COMPLETE filter="" drain=2000
sub b1 broker=B qoi=COMPLETE filter="type=TRADE" drain=2000
sub c2 broker=C qoi=CONFLATED filter="prefix=SYM000" drain=20
sub c3 broker=C qoi=COMPLETE filter="symbol=SYM0003.SIM" drain=0
at 6000 link_down B C
at 13000 link_up B C
end 20000
)";

Outcome criterion7() {
  Outcome o;
  const auto sc = sim::load_scenario(kRing);
  const auto r = sim::run(sc);
  if (!r.report.violations.empty()) o.fail(r.report.violations.front());
  const auto pubs = published_from_log(r.log);
  std::map<std::string, std::multiset<std::uint64_t>> got;
  for (auto line : log_lines(r.log, "DELIVER"))
    got[std::string(log_field(line, "sub"))].insert(std::stoull(std::string(log_field(line, "seq"))));
  int checked = 0;
  for (const auto& s : sc.subs) {
    if (s.qoi != Qoi::Complete) continue;
    ++checked;
    std::multiset<std::uint64_t> want;
    for (const auto& p : pubs)
      if (filter_matches(s.filter, p.n)) want.insert(p.n.seq);
    if (got[s.id] != want)
      o.fail(fmt("%s delivered %zu, expected exactly the %zu matching publications", s.id.c_str(), got[s.id].size(),
                 want.size()));
  }
  std::uint64_t worst = 0;
  if (r.report.faults.size() != 2) o.fail("expected two fault records");
  for (const auto& f : r.report.faults) worst = std::max(worst, f.reconvergence_ms);
  if (worst > 5000) o.fail(fmt("reconvergence %llu ms > 5000 ms", (unsigned long long)worst));
  o.detail = fmt("%d COMPLETE subscribers exactly-once over %zu publications, replayed %llu, worst reconvergence %llu ms",
                 checked, pubs.size(), (unsigned long long)r.report.replay_crossings, (unsigned long long)worst);
  return o;
}

// --- 8: throughput -----------------------------------------------------------

struct Throughput {
  double best = 0;
  std::vector<double> runs;
  double fanout = 0;  // session matches per notification
};

// One broker with `kSubs` client subscriptions over a 2000-symbol source;
// `firehose_pct` of them take every trade of the source, `prefix_pct` take a
// 100-symbol prefix, the rest a 10-symbol watchlist. Best of `trials` timed
// passes over pre-parsed notifications, draining every 1000.
Throughput measure_throughput(int firehose_pct, int prefix_pct, int trials, std::size_t count) {
  constexpr int kSubs = 1000;
  constexpr std::uint32_t kSymbols = 2000;
  Rng rng(8008);
  Broker broker(BrokerConfig{"T", "S"});
  broker.host_source("THR");
  std::vector<SymbolKey> syms;
  for (std::uint32_t i = 0; i < kSymbols; ++i) syms.push_back(synthetic_symbol(i, kSymbols));
  std::vector<SessionId> sessions;
  for (int i = 0; i < kSubs; ++i) {
    const auto s = broker.open_session();
    sessions.push_back(s);
    SubscriptionFilter f;
    const auto roll = static_cast<int>(uniform(rng, 0, 99));
    if (roll < firehose_pct) {
      f.source("THR").event_types(EventTypeSet::of({EventType::Trade}));
    } else if (roll < firehose_pct + prefix_pct) {
      f.symbol_prefix(fmt("SYM%02d", static_cast<int>(uniform(rng, 0, 19))));
    } else {
      std::vector<SymbolKey> pick;
      for (int j = 0; j < 10; ++j) pick.push_back(syms[rng() % syms.size()]);
      f.symbols(std::move(pick));
    }
    broker.subscribe(s, Subscription{1, f, coin(rng) ? Qoi::Complete : Qoi::Conflated});
  }

  SyntheticFeed gen({"THR", kSymbols, 8, 50, "SIM"});
  std::vector<EventNotification> input;
  input.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto e = gen.next(1'700'000'000'000 + i);
    EventNotification n;
    n.source = e.source;
    n.seq = e.seq;
    n.symbol = SymbolKey::of(e.symbol);
    n.event_type = e.event_type;
    n.price = e.price;
    n.size = e.size;
    n.bid = e.bid;
    n.ask = e.ask;
    n.source_ts_ms = n.ingest_ts_ms = e.source_ts_ms;
    input.push_back(std::move(n));
  }

  Throughput t;
  for (int trial = 0; trial < trials; ++trial) {
    // Each pass republishes with seqs past the previous pass.
    std::vector<NotificationPtr> batch;
    batch.reserve(count);
    for (const auto& n : input) {
      auto c = n;
      c.seq += static_cast<std::uint64_t>(trial) * count;
      batch.push_back(std::make_shared<const EventNotification>(std::move(c)));
    }
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      broker.publish_local(batch[i]);
      if (i % 1000 == 999)
        for (auto s : sessions) broker.drain(s, SIZE_MAX);
    }
    for (auto s : sessions) broker.drain(s, SIZE_MAX);
    t.runs.push_back(static_cast<double>(count) / seconds_since(t0));
  }
  t.best = *std::max_element(t.runs.begin(), t.runs.end());
  t.fanout = static_cast<double>(broker.stats().local_deliveries) / static_cast<double>(trials * count);
  return t;
}

Outcome criterion8() {
  Outcome o;
  const auto gate = measure_throughput(1, 5, 3, 300'000);
  const auto heavy = measure_throughput(10, 20, 1, 100'000);
  if (gate.best < 50'000) o.fail(fmt("%.0f notifications/s below the 50000/s floor", gate.best));
  o.detail = fmt("%.0f notifications/s best of 3 (runs %.0f/%.0f/%.0f; target 100000, floor 50000), "
                 "1000 subscriptions, %.1f matches per notification; heavy mix (%.1f matches each): %.0f/s",
                 gate.best, gate.runs[0], gate.runs[1], gate.runs[2], gate.fanout, heavy.fanout, heavy.best);
  if (gate.best < 100'000) o.detail += " [below target]";
  return o;
}

// --- 9: symbol universe ------------------------------------------------------

Outcome criterion9() {
  constexpr std::uint32_t kSymbols = 100'000;
  Outcome o;
  const auto t0 = Clock::now();
  const auto dir = std::filesystem::temp_directory_path() / ("mdf-accept-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::size_t enriched_symbols = 0;
  std::uint64_t stored = 0;
  try {
    StoreOptions opts;
    opts.flush_each_append = false;
    auto store = EventStore::open(dir, opts);
    Broker broker(BrokerConfig{"U", "S"});
    TickerPlant plant(broker, store.get());
    broker.host_source("BIG");
    Rng rng(9009);
    std::uint64_t seq = 0, ts = 19'900ULL * kMillisPerDay;
    auto emit = [&](std::uint32_t i) {
      EventNotification n;
      n.source = "BIG";
      n.seq = ++seq;
      n.symbol = synthetic_symbol(i, kSymbols, "BIG");
      n.source_ts_ms = n.ingest_ts_ms = ++ts;
      const auto px = static_cast<std::int64_t>(uniform(rng, 10'000, 5'000'000));
      if (coin(rng, 60)) {
        n.event_type = EventType::Trade;
        n.price = Price::from_ticks(px);
        n.size = static_cast<std::uint32_t>(uniform(rng, 1, 1000));
      } else {
        n.event_type = EventType::Quote;
        n.bid = Price::from_ticks(px);
        n.ask = Price::from_ticks(px + static_cast<std::int64_t>(uniform(rng, 0, 500)));
      }
      plant.ingest(n, ts);
    };
    for (std::uint32_t i = 0; i < kSymbols; ++i) emit(i);
    for (std::uint32_t k = 0; k < 2 * kSymbols; ++k) emit(static_cast<std::uint32_t>(rng() % kSymbols));
    store->flush();
    enriched_symbols = plant.enricher().symbol_count();
    stored = store->end();
    if (enriched_symbols != kSymbols) o.fail(fmt("enricher holds %zu symbols", enriched_symbols));

    std::unordered_map<SymbolKey, NotificationPtr> last;
    store->replay(SubscriptionFilter(), 0, store->end(),
                  [&](std::uint64_t, const NotificationPtr& n) { last[n->symbol] = n; });
    if (last.size() != kSymbols) o.fail(fmt("replay saw %zu symbols", last.size()));
    for (int k = 0; k < 1000; ++k) {
      const auto sym = synthetic_symbol(static_cast<std::uint32_t>(rng() % kSymbols), kSymbols, "BIG");
      const auto got = store->latest(sym);
      auto it = last.find(sym);
      if (!got || it == last.end() || *got != *it->second) {
        o.fail("latest() disagrees with replay for " + sym.str());
        break;
      }
    }
  } catch (const std::exception& e) {
    o.fail(std::string("error: ") + e.what());
  }
  std::filesystem::remove_all(dir);
  o.detail = fmt("%zu symbols enriched, %llu events stored on disk, 1000 sampled latest() == replay, %.1f s",
                 enriched_symbols, (unsigned long long)stored, seconds_since(t0));
  return o;
}

// --- 10: determinism ---------------------------------------------------------

Outcome criterion10() {
  Outcome o;
  std::vector<std::string> texts{kChain, kRing};
  for (std::uint64_t s = 0; s < 8; ++s) texts.push_back(random_scenario(10'000 + s));
  std::size_t bytes = 0;
  for (const auto& text : texts) {
    const auto sc = sim::load_scenario(text);
    const auto a = sim::run(sc);
    const auto b = sim::run(sc);
    bytes += a.log.size();
    if (a.log != b.log) o.fail("event logs differ");
    if (a.report.records() != b.report.records() || a.report.table() != b.report.table())
      o.fail("reports differ");
  }
  o.detail = fmt("%zu scenarios run twice, reports and %zu log bytes identical", texts.size(), bytes);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"filter algebra oracle", criterion1},    {"codec round-trip", criterion2},
      {"ticker plant oracle", criterion3},      {"delivery semantics (random simnet)", criterion4},
      {"traffic shaping (3-site chain)", criterion5}, {"fan-out", criterion6},
      {"resilience (ring cut and heal)", criterion7}, {"throughput smoke", criterion8},
      {"symbol universe smoke", criterion9},    {"determinism", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("criterion %2zu %s: %s: %s%s%s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), o.pass ? "" : " -- ", o.first_failure.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
