#pragma once

// Deterministic discrete-event simulation of a broker network. Brokers run
// in-process over simulated links with latency and a per-direction message
// rate cap; feeds and subscribers are driven from a line-oriented scenario.
//
//   site <id>
//   broker <id> site=<id> [store=mem|dir]
//   link <a> <b> latency_ms=<n> [bandwidth_mps=<n>]
//   feed <id> broker=<id> source=<NAME> symbols=<n> rate=<n> seed=<n> trade_pct=<n>
//        [market=<MKT>] [bad_pct=<n>] [start=<ms>] [stop=<ms>]
//   sub <id> broker=<id> qoi=CONFLATED|COMPLETE filter="<expr>" drain=<n>
//        [start=<ms>] [stop=<ms>]
//   at <t_ms> link_down <a> <b> | link_up <a> <b> | crash <broker>
//   end <t_ms>
//   seed <n>
//   bug duplicate_delivery <sub>      (verifier self-test only)

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mdf/filter.hpp"
#include "mdf/model.hpp"
#include "mdf/wire.hpp"

namespace mdf::sim {

enum class StoreKind { None, Memory, Directory };

struct BrokerSpec {
  std::string id;
  std::string site;
  StoreKind store = StoreKind::None;
};

struct LinkSpec {
  std::string a, b;
  std::uint32_t latency_ms = 1;
  std::uint32_t bandwidth_mps = 0;  // 0: unlimited
};

struct FeedSpec {
  std::string id;
  std::string broker;
  std::string source;
  std::string market;
  std::uint32_t symbols = 1;
  std::uint32_t rate = 1;  // events per second
  std::uint64_t seed = 1;
  unsigned trade_pct = 50;
  unsigned bad_pct = 0;  // share of deliberately invalid lines
  std::uint64_t start_ms = 1000;
  std::optional<std::uint64_t> stop_ms;
};

struct SubSpec {
  std::string id;
  std::string broker;
  Qoi qoi = Qoi::Complete;
  SubscriptionFilter filter;
  std::uint32_t drain = 0;  // notifications per second; 0 blocks until quiescence
  std::uint64_t start_ms = 0;
  std::optional<std::uint64_t> stop_ms;
};

enum class FaultKind { LinkDown, LinkUp, Crash };

struct TimedEvent {
  std::uint64_t t_ms = 0;
  FaultKind kind = FaultKind::LinkDown;
  std::string a, b;  // b empty for crash
};

struct Scenario {
  std::vector<std::string> sites;
  std::vector<BrokerSpec> brokers;
  std::vector<LinkSpec> links;
  std::vector<FeedSpec> feeds;
  std::vector<SubSpec> subs;
  std::vector<TimedEvent> events;
  std::uint64_t end_ms = 0;
  std::uint64_t seed = 0;
  std::set<std::string> duplicate_delivery_bug;

  const BrokerSpec* broker(const std::string& id) const;
  const SubSpec* sub(const std::string& id) const;
  const FeedSpec* feed_for_source(const std::string& source) const;
};

// Throws LineError on syntax errors, duplicate ids and undefined references
// (the message names the missing id).
Scenario load_scenario(std::string_view text);

struct LinkReport {
  std::string a, b;  // a < b
  bool inter_site = false;
  std::map<FrameKind, std::uint64_t> frames;  // both directions
};

struct SubReport {
  std::string id;
  std::string broker;
  Qoi qoi = Qoi::Complete;
  std::uint64_t matched = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_superseded = 0;
  std::uint64_t latency_p50_ms = 0;
  std::uint64_t latency_p99_ms = 0;
  std::optional<bool> complete;  // COMPLETE subscribers only
};

struct FeedReport {
  std::string id;
  std::string source;
  std::uint64_t parsed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
};

struct FaultReport {
  std::uint64_t t_ms = 0;
  std::string what;
  std::uint64_t reconvergence_ms = 0;
};

struct MetricsReport {
  std::uint64_t end_ms = 0;
  std::uint64_t quiesced_ms = 0;
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t pub_crossings = 0;
  std::uint64_t inter_site_pub_crossings = 0;
  std::uint64_t replay_crossings = 0;
  std::vector<LinkReport> links;
  std::vector<SubReport> subs;
  std::vector<FeedReport> feeds;
  std::vector<FaultReport> faults;
  std::vector<std::string> violations;

  std::string table() const;
  // One `key=value ...` record per line.
  std::string records() const;
};

struct RunResult {
  MetricsReport report;
  std::string log;
};

// Runs to end_ms, stops the feeds, then continues until the network is
// quiet and drains every subscriber. The report's violations come from
// verify() over the produced log.
RunResult run(const Scenario& scenario);

// Checks the system invariants from the raw event log: COMPLETE
// exactly-once and order, CONFLATED monotonicity and last value, at most one
// PUB copy per link and notification, and interest-driven forwarding.
std::vector<std::string> verify(const MetricsReport& report, const Scenario& scenario,
                                std::string_view log);

// A delivered notification must have been published at least this long
// after the subscription for COMPLETE/last-value expectations to apply.
inline constexpr std::uint64_t kSettleMs = 2000;

}  // namespace mdf::sim
