#pragma once

// Brute-force traffic oracle for simnet runs over a static topology: each
// published notification should cross exactly the shortest-path-tree edges
// whose far side hosts a matching subscription.

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mdf/filter.hpp"
#include "mdf/simnet.hpp"

namespace mdf::testing {

struct LoggedPub {
  std::string broker;
  EventNotification n;
};

inline std::string_view log_field(std::string_view line, std::string_view key) {
  std::string pat = " " + std::string(key) + "=";
  auto p = line.find(pat);
  if (p == std::string_view::npos) return {};
  p += pat.size();
  auto e = line.find(' ', p);
  return line.substr(p, e == std::string_view::npos ? std::string_view::npos : e - p);
}

inline std::vector<std::string_view> log_lines(std::string_view log, std::string_view event) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  const std::string tag = " " + std::string(event) + " ";
  while (pos < log.size()) {
    auto nl = log.find('\n', pos);
    auto line = log.substr(pos, nl - pos);
    if (line.find(tag) != std::string_view::npos) out.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::vector<LoggedPub> published_from_log(std::string_view log) {
  std::vector<LoggedPub> out;
  for (auto line : log_lines(log, "PUBLISH")) {
    LoggedPub p;
    p.broker = std::string(log_field(line, "broker"));
    p.n.source = std::string(log_field(line, "source"));
    p.n.seq = std::stoull(std::string(log_field(line, "seq")));
    p.n.symbol = SymbolKey::of(log_field(line, "symbol"));
    p.n.event_type = *parse_event_type(log_field(line, "type"));
    p.n.instrument_class = parse_instrument_class(log_field(line, "class"));
    out.push_back(std::move(p));
  }
  return out;
}

// Expected PUB crossings (all links, or inter-site links only), assuming
// every subscription is active for every publication.
inline std::uint64_t oracle_crossings(const sim::Scenario& sc, const std::vector<LoggedPub>& pubs,
                                      bool inter_site_only) {
  std::vector<std::string> ids;
  std::map<std::string, std::string> site;
  for (const auto& b : sc.brokers) {
    ids.push_back(b.id);
    site[b.id] = b.site;
  }
  std::sort(ids.begin(), ids.end());
  const std::size_t n = ids.size();
  auto index = [&](const std::string& id) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  const std::uint64_t inf = std::numeric_limits<std::uint64_t>::max() / 4;
  std::vector<std::vector<std::uint64_t>> w(n, std::vector<std::uint64_t>(n, 0)), d(n, std::vector<std::uint64_t>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& l : sc.links) {
    auto a = index(l.a), b = index(l.b);
    w[a][b] = w[b][a] = l.latency_ms;
    d[a][b] = d[b][a] = l.latency_ms;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);

  std::uint64_t total = 0;
  for (const auto& p : pubs) {
    const auto r = index(p.broker);
    std::vector<std::size_t> parent(n, SIZE_MAX);
    for (std::size_t x = 0; x < n; ++x) {
      if (x == r || d[r][x] >= inf) continue;
      for (std::size_t u = 0; u < n; ++u)
        if (w[u][x] && d[r][u] + w[u][x] == d[r][x]) {
          parent[x] = u;
          break;
        }
    }
    std::vector<bool> wants(n, false);
    for (const auto& s : sc.subs)
      if (filter_matches(s.filter, p.n)) wants[index(s.broker)] = true;
    // Edge parent[x] -> x carries a copy iff x's subtree wants it.
    for (std::size_t x = 0; x < n; ++x) {
      if (parent[x] == SIZE_MAX) continue;
      bool needed = false;
      for (std::size_t y = 0; y < n && !needed; ++y) {
        if (!wants[y]) continue;
        for (std::size_t c = y; c != SIZE_MAX; c = parent[c])
          if (c == x) {
            needed = true;
            break;
          }
      }
      if (needed && (!inter_site_only || site[ids[x]] != site[ids[parent[x]]])) ++total;
    }
  }
  return total;
}

}  // namespace mdf::testing
