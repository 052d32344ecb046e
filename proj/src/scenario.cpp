#include <algorithm>
#include <charconv>
#include <cstdarg>
#include <cstdio>
#include <sstream>

#include "mdf/error.hpp"
#include "mdf/simnet.hpp"

namespace mdf::sim {

namespace {

struct Line {
  std::size_t number = 0;
  std::vector<std::string> words;  // positional tokens
  std::map<std::string, std::string> keys;
};

Line tokenize(std::string_view text, std::size_t number) {
  Line out;
  out.number = number;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
    if (i >= text.size() || text[i] == '#') break;
    std::string tok;
    bool quoted = false;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '"') {
        quoted = !quoted;
        ++i;
        continue;
      }
      if (!quoted && (c == ' ' || c == '\t' || c == '\r' || c == '#')) break;
      tok += c;
      ++i;
    }
    if (quoted) throw LineError("unterminated quote", number);
    auto eq = tok.find('=');
    if (eq == std::string::npos || out.words.empty()) {
      if (!out.keys.empty()) throw LineError("positional argument after key=value: " + tok, number);
      out.words.push_back(tok);
    } else {
      auto key = tok.substr(0, eq);
      if (!out.keys.emplace(key, tok.substr(eq + 1)).second)
        throw LineError("repeated key '" + key + "'", number);
    }
  }
  return out;
}

std::uint64_t to_u64(const std::string& s, const Line& l, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw LineError("invalid " + what + " '" + s + "'", l.number);
  return v;
}

class KeyReader {
 public:
  explicit KeyReader(const Line& l) : l_(l) {}

  const std::string& required(const std::string& key) {
    auto it = l_.keys.find(key);
    if (it == l_.keys.end()) throw LineError("missing " + key + "=", l_.number);
    used_.insert(key);
    return it->second;
  }
  std::optional<std::string> optional(const std::string& key) {
    auto it = l_.keys.find(key);
    if (it == l_.keys.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }
  std::uint64_t number(const std::string& key) { return to_u64(required(key), l_, key); }
  std::optional<std::uint64_t> opt_number(const std::string& key) {
    auto v = optional(key);
    if (!v) return std::nullopt;
    return to_u64(*v, l_, key);
  }
  std::uint32_t bounded(const std::string& key, std::uint64_t lo, std::uint64_t hi) {
    auto v = number(key);
    if (v < lo || v > hi)
      throw LineError(key + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                      l_.number);
    return static_cast<std::uint32_t>(v);
  }
  void done() {
    for (const auto& [k, _] : l_.keys)
      if (!used_.count(k)) throw LineError("unknown key '" + k + "'", l_.number);
  }

 private:
  const Line& l_;
  std::set<std::string> used_;
};

void arity(const Line& l, std::size_t n) {
  if (l.words.size() != n)
    throw LineError("'" + l.words[0] + "' expects " + std::to_string(n - 1) + " argument(s)",
                    l.number);
}

std::string default_market(std::size_t index) {
  std::string m = "F";
  m += static_cast<char>('A' + (index / 26) % 26);
  m += static_cast<char>('A' + index % 26);
  return m;
}

bool valid_market(const std::string& m) {
  return !m.empty() && m.size() <= 4 &&
         std::all_of(m.begin(), m.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

}  // namespace

const BrokerSpec* Scenario::broker(const std::string& id) const {
  for (const auto& b : brokers)
    if (b.id == id) return &b;
  return nullptr;
}

const SubSpec* Scenario::sub(const std::string& id) const {
  for (const auto& s : subs)
    if (s.id == id) return &s;
  return nullptr;
}

const FeedSpec* Scenario::feed_for_source(const std::string& source) const {
  for (const auto& f : feeds)
    if (f.source == source) return &f;
  return nullptr;
}

Scenario load_scenario(std::string_view text) {
  Scenario sc;
  std::map<std::string, std::size_t> site_lines, broker_lines, feed_ids, sub_ids;
  std::set<std::pair<std::string, std::string>> link_keys;
  std::set<std::string> sources;
  // References are resolved after the whole file is read.
  std::vector<std::pair<std::size_t, std::string>> site_refs, broker_refs, sub_refs;
  std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> link_refs;
  bool have_end = false;

  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++number;
    auto l = tokenize(raw, number);
    if (l.words.empty()) {
      if (!l.keys.empty()) throw LineError("missing directive", number);
      continue;
    }
    const auto& d = l.words[0];
    KeyReader k(l);

    if (d == "site") {
      arity(l, 2);
      if (!site_lines.emplace(l.words[1], number).second)
        throw LineError("duplicate site id '" + l.words[1] + "'", number);
      sc.sites.push_back(l.words[1]);
    } else if (d == "broker") {
      arity(l, 2);
      BrokerSpec b;
      b.id = l.words[1];
      if (!broker_lines.emplace(b.id, number).second)
        throw LineError("duplicate broker id '" + b.id + "'", number);
      b.site = k.required("site");
      site_refs.emplace_back(number, b.site);
      if (auto st = k.optional("store")) {
        if (*st == "mem")
          b.store = StoreKind::Memory;
        else if (*st == "dir")
          b.store = StoreKind::Directory;
        else
          throw LineError("store must be mem or dir", number);
      }
      sc.brokers.push_back(std::move(b));
    } else if (d == "link") {
      arity(l, 3);
      LinkSpec ls;
      ls.a = l.words[1];
      ls.b = l.words[2];
      if (ls.a == ls.b) throw LineError("link endpoints must differ", number);
      auto key = std::minmax(ls.a, ls.b);
      if (!link_keys.emplace(key.first, key.second).second)
        throw LineError("duplicate link " + ls.a + " " + ls.b, number);
      ls.latency_ms = k.bounded("latency_ms", 1, 60'000);
      if (auto bw = k.opt_number("bandwidth_mps")) ls.bandwidth_mps = static_cast<std::uint32_t>(*bw);
      broker_refs.emplace_back(number, ls.a);
      broker_refs.emplace_back(number, ls.b);
      sc.links.push_back(std::move(ls));
    } else if (d == "feed") {
      arity(l, 2);
      FeedSpec f;
      f.id = l.words[1];
      if (!feed_ids.emplace(f.id, number).second)
        throw LineError("duplicate feed id '" + f.id + "'", number);
      f.broker = k.required("broker");
      broker_refs.emplace_back(number, f.broker);
      f.source = k.required("source");
      if (!is_valid_source(f.source)) throw LineError("invalid source '" + f.source + "'", number);
      if (!sources.insert(f.source).second)
        throw LineError("source '" + f.source + "' fed twice", number);
      f.market = k.optional("market").value_or(default_market(sc.feeds.size()));
      if (!valid_market(f.market)) throw LineError("invalid market '" + f.market + "'", number);
      f.symbols = k.bounded("symbols", 1, 1'000'000);
      f.rate = k.bounded("rate", 1, 1'000'000);
      f.seed = k.number("seed");
      f.trade_pct = k.bounded("trade_pct", 0, 100);
      if (k.optional("bad_pct")) f.bad_pct = k.bounded("bad_pct", 0, 100);
      if (auto s = k.opt_number("start")) f.start_ms = *s;
      f.stop_ms = k.opt_number("stop");
      sc.feeds.push_back(std::move(f));
    } else if (d == "sub") {
      arity(l, 2);
      SubSpec s;
      s.id = l.words[1];
      if (!sub_ids.emplace(s.id, number).second)
        throw LineError("duplicate sub id '" + s.id + "'", number);
      s.broker = k.required("broker");
      broker_refs.emplace_back(number, s.broker);
      auto q = parse_qoi(k.required("qoi"));
      if (!q) throw LineError("qoi must be CONFLATED or COMPLETE", number);
      s.qoi = *q;
      try {
        s.filter = parse_filter_expr(k.required("filter"));
      } catch (const ParseError& e) {
        throw LineError(std::string("filter: ") + e.what(), number);
      }
      s.drain = k.bounded("drain", 0, 100'000'000);
      if (auto v = k.opt_number("start")) s.start_ms = *v;
      s.stop_ms = k.opt_number("stop");
      sc.subs.push_back(std::move(s));
    } else if (d == "at") {
      if (l.words.size() < 3) throw LineError("'at' expects <t_ms> <event> ...", number);
      TimedEvent e;
      e.t_ms = to_u64(l.words[1], l, "time");
      const auto& what = l.words[2];
      if (what == "link_down" || what == "link_up") {
        if (l.words.size() != 5) throw LineError(what + " expects two brokers", number);
        e.kind = what == "link_down" ? FaultKind::LinkDown : FaultKind::LinkUp;
        e.a = l.words[3];
        e.b = l.words[4];
        link_refs.push_back({number, {e.a, e.b}});
      } else if (what == "crash") {
        if (l.words.size() != 4) throw LineError("crash expects one broker", number);
        e.kind = FaultKind::Crash;
        e.a = l.words[3];
        broker_refs.emplace_back(number, e.a);
      } else {
        throw LineError("unknown timed event '" + what + "'", number);
      }
      sc.events.push_back(std::move(e));
    } else if (d == "end") {
      arity(l, 2);
      sc.end_ms = to_u64(l.words[1], l, "end time");
      if (sc.end_ms == 0) throw LineError("end must be > 0", number);
      have_end = true;
    } else if (d == "seed") {
      arity(l, 2);
      sc.seed = to_u64(l.words[1], l, "seed");
    } else if (d == "bug") {
      if (l.words.size() != 3 || l.words[1] != "duplicate_delivery")
        throw LineError("bug expects 'duplicate_delivery <sub>'", number);
      sc.duplicate_delivery_bug.insert(l.words[2]);
      sub_refs.emplace_back(number, l.words[2]);
    } else {
      throw LineError("unknown directive '" + d + "'", number);
    }
    k.done();
    if (nl == text.size()) break;
  }

  for (const auto& [line, id] : site_refs)
    if (!site_lines.count(id)) throw LineError("undefined site '" + id + "'", line);
  for (const auto& [line, id] : broker_refs)
    if (!broker_lines.count(id)) throw LineError("undefined broker '" + id + "'", line);
  for (const auto& [line, id] : sub_refs)
    if (!sub_ids.count(id)) throw LineError("undefined sub '" + id + "'", line);
  for (const auto& [line, ab] : link_refs) {
    auto key = std::minmax(ab.first, ab.second);
    if (!link_keys.count({key.first, key.second}))
      throw LineError("undefined link " + ab.first + " " + ab.second, line);
  }
  if (!have_end) throw LineError("missing 'end' directive", number);
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
  return sc;
}

namespace {

constexpr FrameKind kAllKinds[] = {
    FrameKind::Hello, FrameKind::Sub,       FrameKind::Unsub,  FrameKind::Pub,
    FrameKind::Lsa,   FrameKind::SubAdv,    FrameKind::Heartbeat, FrameKind::Credit,
    FrameKind::Resume, FrameKind::Replay,   FrameKind::ReplayEnd,
};

std::uint64_t count_of(const LinkReport& l, FrameKind k) {
  auto it = l.frames.find(k);
  return it == l.frames.end() ? 0 : it->second;
}

std::string verdict(const SubReport& s) {
  if (!s.complete) return "-";
  return *s.complete ? "PASS" : "FAIL";
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

using ull = unsigned long long;

}  // namespace

std::string MetricsReport::records() const {
  std::string out;
  out += fmt("run end_ms=%llu quiesced_ms=%llu published=%llu delivered=%llu pub_crossings=%llu "
             "inter_site_pub_crossings=%llu replay_crossings=%llu violations=%zu\n",
             ull(end_ms), ull(quiesced_ms), ull(published), ull(delivered), ull(pub_crossings),
             ull(inter_site_pub_crossings), ull(replay_crossings), violations.size());
  for (const auto& l : links) {
    out += "link a=" + l.a + " b=" + l.b + " inter_site=" + (l.inter_site ? "1" : "0");
    for (auto k : kAllKinds) out += fmt(" %s=%llu", std::string(to_string(k)).c_str(), ull(count_of(l, k)));
    out += '\n';
  }
  for (const auto& f : feeds)
    out += fmt("feed id=%s source=%s parsed=%llu accepted=%llu rejected=%llu\n", f.id.c_str(),
               f.source.c_str(), ull(f.parsed), ull(f.accepted), ull(f.rejected));
  for (const auto& s : subs)
    out += fmt("sub id=%s broker=%s qoi=%s matched=%llu delivered=%llu dropped_superseded=%llu "
               "latency_p50_ms=%llu latency_p99_ms=%llu complete=%s\n",
               s.id.c_str(), s.broker.c_str(), std::string(to_string(s.qoi)).c_str(), ull(s.matched),
               ull(s.delivered), ull(s.dropped_superseded), ull(s.latency_p50_ms),
               ull(s.latency_p99_ms), verdict(s).c_str());
  for (const auto& f : faults)
    out += fmt("fault t_ms=%llu what=%s reconvergence_ms=%llu\n", ull(f.t_ms), f.what.c_str(),
               ull(f.reconvergence_ms));
  for (const auto& v : violations) out += "violation " + v + "\n";
  return out;
}

std::string MetricsReport::table() const {
  std::string out;
  out += fmt("simulated %llu ms (quiet at %llu ms)\n", ull(end_ms), ull(quiesced_ms));
  out += fmt("published %llu, delivered %llu, PUB link crossings %llu (inter-site %llu), "
             "replayed %llu\n\n",
             ull(published), ull(delivered), ull(pub_crossings), ull(inter_site_pub_crossings),
             ull(replay_crossings));
  out += fmt("%-20s %5s %8s %8s %8s %8s %8s\n", "link", "xsite", "PUB", "REPLAY", "LSA", "SUBADV",
             "HB");
  for (const auto& l : links)
    out += fmt("%-20s %5s %8llu %8llu %8llu %8llu %8llu\n", (l.a + "-" + l.b).c_str(),
               l.inter_site ? "yes" : "no", ull(count_of(l, FrameKind::Pub)),
               ull(count_of(l, FrameKind::Replay)), ull(count_of(l, FrameKind::Lsa)),
               ull(count_of(l, FrameKind::SubAdv)), ull(count_of(l, FrameKind::Heartbeat)));
  out += '\n';
  out += fmt("%-12s %-8s %-9s %8s %9s %8s %6s %6s %8s\n", "sub", "broker", "qoi", "matched",
             "delivered", "dropped", "p50", "p99", "complete");
  for (const auto& s : subs)
    out += fmt("%-12s %-8s %-9s %8llu %9llu %8llu %6llu %6llu %8s\n", s.id.c_str(), s.broker.c_str(),
               std::string(to_string(s.qoi)).c_str(), ull(s.matched), ull(s.delivered),
               ull(s.dropped_superseded), ull(s.latency_p50_ms), ull(s.latency_p99_ms),
               verdict(s).c_str());
  if (!feeds.empty()) {
    out += '\n';
    out += fmt("%-12s %-8s %8s %8s %8s\n", "feed", "source", "parsed", "accepted", "rejected");
    for (const auto& f : feeds)
      out += fmt("%-12s %-8s %8llu %8llu %8llu\n", f.id.c_str(), f.source.c_str(), ull(f.parsed),
                 ull(f.accepted), ull(f.rejected));
  }
  if (!faults.empty()) {
    out += '\n';
    for (const auto& f : faults)
      out += fmt("t=%llu %s: reconverged after %llu ms\n", ull(f.t_ms), f.what.c_str(),
                 ull(f.reconvergence_ms));
  }
  out += '\n';
  if (violations.empty()) {
    out += "verify: no violations\n";
  } else {
    out += fmt("verify: %zu violation(s)\n", violations.size());
    for (const auto& v : violations) out += "  " + v + "\n";
  }
  return out;
}

}  // namespace mdf::sim
