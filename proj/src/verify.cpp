#include <algorithm>
#include <deque>
#include <unordered_map>

#include "mdf/simnet.hpp"

namespace mdf::sim {

namespace {

struct LogLine {
  std::uint64_t t = 0;
  std::string_view event;
  std::vector<std::pair<std::string_view, std::string_view>> kv;

  std::string_view get(std::string_view key) const {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    return {};
  }
  std::uint64_t num(std::string_view key) const {
    auto v = get(key);
    std::uint64_t out = 0;
    for (char c : v) out = out * 10 + static_cast<std::uint64_t>(c - '0');
    return out;
  }
};

std::vector<LogLine> parse_log(std::string_view log) {
  std::vector<LogLine> out;
  std::size_t pos = 0;
  while (pos < log.size()) {
    auto nl = log.find('\n', pos);
    if (nl == std::string_view::npos) nl = log.size();
    auto line = log.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    LogLine l;
    std::size_t i = 0;
    int field = 0;
    while (i < line.size()) {
      auto sp = line.find(' ', i);
      if (sp == std::string_view::npos) sp = line.size();
      auto tok = line.substr(i, sp - i);
      i = sp + 1;
      if (tok.empty()) continue;
      if (field == 0) {
        if (tok.substr(0, 2) == "t=")
          for (char c : tok.substr(2)) l.t = l.t * 10 + static_cast<std::uint64_t>(c - '0');
      } else if (field == 1) {
        l.event = tok;
      } else {
        auto eq = tok.find('=');
        if (eq != std::string_view::npos) l.kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
      }
      ++field;
    }
    out.push_back(std::move(l));
  }
  return out;
}

struct Published {
  std::uint64_t t = 0;
  std::string broker;
  EventNotification n;  // only the filterable fields are populated
};

using Key = std::pair<std::string, std::uint64_t>;

struct SubTrace {
  const SubSpec* spec = nullptr;
  std::optional<std::uint64_t> t0;
  std::optional<std::uint64_t> t1;
  bool crashed = false;
  std::vector<Key> delivered;
  std::set<Key> superseded;
  std::uint64_t superseded_count = 0;
};

class Graph {
 public:
  void add(const std::string& a, const std::string& b) {
    adj_[a].insert(b);
    adj_[b].insert(a);
  }
  void remove(const std::string& a, const std::string& b) {
    adj_[a].erase(b);
    adj_[b].erase(a);
  }
  // Nodes reachable from `start` without entering `avoid`.
  std::set<std::string> reach(const std::string& start, const std::string& avoid = {}) const {
    std::set<std::string> seen{start};
    std::deque<std::string> q{start};
    while (!q.empty()) {
      auto cur = q.front();
      q.pop_front();
      auto it = adj_.find(cur);
      if (it == adj_.end()) continue;
      for (const auto& nb : it->second)
        if (nb != avoid && seen.insert(nb).second) q.push_back(nb);
    }
    return seen;
  }

 private:
  std::map<std::string, std::set<std::string>> adj_;
};

std::string key_str(const Key& k) { return "source=" + k.first + " seq=" + std::to_string(k.second); }

}  // namespace

std::vector<std::string> verify(const MetricsReport& report, const Scenario& sc,
                                std::string_view log_text) {
  std::vector<std::string> v;
  const auto lines = parse_log(log_text);

  std::map<Key, Published> pubs;
  std::map<std::string, SubTrace> subs;
  for (const auto& s : sc.subs) subs[s.id].spec = &s;
  std::set<std::string> dead;
  std::set<std::pair<std::string, std::string>> down;

  // First pass: publications, subscriptions, final liveness.
  for (const auto& l : lines) {
    if (l.event == "PUBLISH") {
      Key k{std::string(l.get("source")), l.num("seq")};
      Published p;
      p.t = l.t;
      p.broker = std::string(l.get("broker"));
      p.n.source = k.first;
      p.n.seq = k.second;
      p.n.symbol = SymbolKey::of(l.get("symbol"));
      p.n.event_type = parse_event_type(l.get("type")).value_or(EventType::Status);
      p.n.instrument_class = parse_instrument_class(l.get("class"));
      if (!pubs.emplace(k, std::move(p)).second) v.push_back("published twice: " + key_str(k));
    } else if (l.event == "SUBSCRIBE") {
      auto it = subs.find(std::string(l.get("sub")));
      if (it != subs.end()) it->second.t0 = l.t;
    } else if (l.event == "UNSUBSCRIBE") {
      auto it = subs.find(std::string(l.get("sub")));
      if (it == subs.end()) continue;
      it->second.t1 = l.t;
      it->second.crashed = l.get("reason") == "crash";
    } else if (l.event == "DELIVER") {
      auto it = subs.find(std::string(l.get("sub")));
      if (it != subs.end()) it->second.delivered.emplace_back(std::string(l.get("source")), l.num("seq"));
    } else if (l.event == "DROP_SUPERSEDED") {
      auto it = subs.find(std::string(l.get("sub")));
      if (it == subs.end()) continue;
      it->second.superseded.emplace(std::string(l.get("source")), l.num("seq"));
      ++it->second.superseded_count;
    } else if (l.event == "CRASH") {
      dead.insert(std::string(l.get("broker")));
    } else if (l.event == "LINK_DOWN") {
      down.insert(std::minmax(std::string(l.get("a")), std::string(l.get("b"))));
    } else if (l.event == "LINK_UP") {
      down.erase(std::minmax(std::string(l.get("a")), std::string(l.get("b"))));
    }
  }

  Graph full, final;
  for (const auto& ls : sc.links) {
    full.add(ls.a, ls.b);
    if (!down.count(std::minmax(ls.a, ls.b)) && !dead.count(ls.a) && !dead.count(ls.b))
      final.add(ls.a, ls.b);
  }
  std::map<std::string, std::set<std::string>> reach_final;
  auto reachable = [&](const std::string& from, const std::string& to) {
    if (dead.count(from) || dead.count(to)) return false;
    auto it = reach_final.find(from);
    if (it == reach_final.end()) it = reach_final.emplace(from, final.reach(from)).first;
    return it->second.count(to) != 0;
  };

  // Delivery semantics per subscriber.
  for (const auto& [id, s] : subs) {
    const auto& f = s.spec->filter;
    const std::string who = "sub=" + id + " ";
    if (!s.t0) {
      if (!s.delivered.empty()) v.push_back(who + "delivered without subscribing");
      continue;
    }
    for (const auto& k : s.delivered) {
      auto p = pubs.find(k);
      if (p == pubs.end())
        v.push_back(who + "delivered unpublished " + key_str(k));
      else if (!filter_matches(f, p->second.n))
        v.push_back(who + "delivered non-matching " + key_str(k));
    }
    // Full expectations hold for a subscriber that lived to quiescence and
    // can still reach the ingress; otherwise only gaps below the highest
    // delivered seq count.
    auto full_mode = [&](const Published& p) {
      return !s.crashed && reachable(s.spec->broker, p.broker);
    };
    auto in_window = [&](const Published& p) {
      if (p.t < *s.t0 + kSettleMs) return false;
      if (s.t1 && p.t + kSettleMs > *s.t1) return false;
      return filter_matches(f, p.n);
    };

    if (s.spec->qoi == Qoi::Complete) {
      std::map<std::string, std::uint64_t> last;
      std::set<Key> got;
      for (const auto& k : s.delivered) {
        auto& prev = last[k.first];
        if (k.second <= prev) {
          v.push_back(who + (got.count(k) ? "duplicate delivery " : "out-of-order delivery ") +
                      key_str(k));
        }
        prev = std::max(prev, k.second);
        got.insert(k);
      }
      for (const auto& [k, p] : pubs) {
        if (!in_window(p) || got.count(k)) continue;
        if (full_mode(p) || k.second < last[k.first]) v.push_back(who + "missing " + key_str(k));
      }
    } else {
      std::map<std::pair<std::string, std::string>, std::uint64_t> last;
      std::set<Key> got;
      for (const auto& k : s.delivered) {
        auto p = pubs.find(k);
        if (p == pubs.end()) continue;
        auto& prev = last[{k.first, p->second.n.symbol.str()}];
        if (k.second <= prev) v.push_back(who + "conflated value went backwards " + key_str(k));
        prev = std::max(prev, k.second);
        if (s.superseded.count(k)) v.push_back(who + "superseded value delivered " + key_str(k));
        got.insert(k);
      }
      if (!s.crashed && !s.t1) {
        std::map<std::pair<std::string, std::string>, const Published*> newest;
        std::set<std::pair<std::string, std::string>> expected;
        for (const auto& [k, p] : pubs) {
          if (!filter_matches(f, p.n)) continue;
          const std::pair<std::string, std::string> sk{k.first, p.n.symbol.str()};
          newest[sk] = &p;  // map order: ascending seq per source
          if (in_window(p) && full_mode(p)) expected.insert(sk);
        }
        for (const auto& sk : expected) {
          const auto want = newest[sk]->n.seq;
          const auto have = last[sk];
          if (have != want)
            v.push_back(who + "last value for source=" + sk.first + " symbol=" + sk.second +
                        " is seq=" + std::to_string(have) + ", last published seq=" +
                        std::to_string(want));
        }
      }
    }
  }

  for (const auto& r : report.subs) {
    auto it = subs.find(r.id);
    if (it == subs.end()) continue;
    if (r.delivered != it->second.delivered.size())
      v.push_back("sub=" + r.id + " report delivered=" + std::to_string(r.delivered) +
                  " but log has " + std::to_string(it->second.delivered.size()));
    if (!it->second.crashed && r.matched != r.delivered + r.dropped_superseded)
      v.push_back("sub=" + r.id + " matched != delivered + dropped_superseded");
  }
  for (const auto& f : report.feeds)
    if (f.parsed != f.accepted + f.rejected) v.push_back("feed=" + f.id + " parsed != accepted + rejected");

  // Link economy.
  std::map<std::pair<std::string, std::string>, std::set<std::string>> beyond;
  std::map<std::tuple<std::string, std::string, std::string, std::uint64_t>, int> copies;
  for (const auto& l : lines) {
    if (l.event != "XMIT" || l.get("kind") != "PUB") continue;
    const std::string from(l.get("from")), to(l.get("to"));
    const Key k{std::string(l.get("source")), l.num("seq")};
    auto ends = std::minmax(from, to);
    if (++copies[{ends.first, ends.second, k.first, k.second}] == 2)
      v.push_back("link=" + ends.first + "-" + ends.second + " carried more than one copy of " +
                  key_str(k));

    auto p = pubs.find(k);
    if (p == pubs.end()) continue;
    auto b = beyond.find({from, to});
    if (b == beyond.end()) b = beyond.emplace(std::make_pair(from, to), full.reach(to, from)).first;
    bool justified = false;
    for (const auto& [id, s] : subs) {
      if (!s.t0 || *s.t0 > l.t) continue;
      if (s.t1 && *s.t1 + kSettleMs < l.t) continue;
      if (!b->second.count(s.spec->broker)) continue;
      if (filter_matches(s.spec->filter, p->second.n)) {
        justified = true;
        break;
      }
    }
    if (!justified)
      v.push_back("link=" + from + "->" + to + " carried " + key_str(k) +
                  " with no matching subscription beyond it");
  }
  return v;
}

}  // namespace mdf::sim
