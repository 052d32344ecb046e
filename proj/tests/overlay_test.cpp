#include <gtest/gtest.h>

#include <limits>

#include "generators.hpp"
#include "mdf/error.hpp"
#include "mdf/overlay.hpp"
#include "mdf/wire.hpp"

using namespace mdf;
using namespace mdf::testing;

namespace {

LsaMsg lsa(std::string origin, std::uint64_t seq, std::vector<LsaNeighbor> nbs,
           std::vector<std::string> sources = {}) {
  return LsaMsg{std::move(origin), seq, "S1", std::move(nbs), std::move(sources)};
}

std::set<std::string> ids(int n) {
  std::set<std::string> out;
  for (int i = 0; i < n; ++i) out.insert(std::string(1, static_cast<char>('A' + i)));
  return out;
}

}  // namespace

TEST(Wire, RoundTripEveryKind) {
  auto n = std::make_shared<const EventNotification>(random_notification(*new Rng(1)));
  std::vector<Message> msgs{
      HelloMsg{"B1", PeerKind::Broker, "FRA"},
      SubMsg{7, Qoi::Conflated, parse_filter_expr("source=XETRA symbol=AAA.SIM,BBB.SIM")},
      UnsubMsg{7},
      PubMsg{n},
      LsaMsg{"B1", 9, "FRA", {{"B2", 5}, {"B3", 12}}, {"SIM1"}},
      SubAdvMsg{"B1", 3, {parse_filter_expr("prefix=AA"), parse_filter_expr("type=TRADE")}},
      HeartbeatMsg{123456},
      CreditMsg{64},
      ResumeMsg{11, "B3", "SIM1", 40, {SubscriptionFilter()}},
      ReplayMsg{11, "B3", n},
      ReplayEndMsg{11, "B3", "SIM1", 99},
  };
  for (const auto& m : msgs) {
    auto bytes = encode_message(m);
    EXPECT_EQ(bytes[4], static_cast<std::uint8_t>(kind_of(m)));
    const std::uint32_t len = (bytes[0] << 24) | (bytes[1] << 16) | (bytes[2] << 8) | bytes[3];
    EXPECT_EQ(len + 4, bytes.size());
    EXPECT_EQ(decode_message(bytes), m) << to_string(kind_of(m));
  }
}

TEST(Wire, FrameReaderChunksAndErrors) {
  Bytes stream;
  for (std::uint64_t i = 0; i < 50; ++i) encode_message(HeartbeatMsg{i}, stream);
  FrameReader r;
  std::uint64_t expect = 0;
  for (std::size_t i = 0; i < stream.size(); i += 7) {
    r.feed(ByteSpan(stream).subspan(i, std::min<std::size_t>(7, stream.size() - i)));
    while (auto m = r.next()) EXPECT_EQ(std::get<HeartbeatMsg>(*m).ts_ms, expect++);
  }
  EXPECT_EQ(expect, 50u);

  Bytes bad{0, 0, 0, 2, 99, 0};
  EXPECT_THROW(decode_message(bad), MalformedFrame);
  Bytes huge{0xFF, 0xFF, 0xFF, 0xFF, 1};
  FrameReader r2;
  r2.feed(huge);
  EXPECT_THROW(r2.next(), MalformedFrame);
  auto hb = encode_message(HeartbeatMsg{1});
  hb.push_back(0);
  hb[3] += 1;
  EXPECT_THROW(decode_message(hb), MalformedFrame);  // trailing byte inside frame
}

TEST(TopologyView, StaleAndNew) {
  TopologyView v("A");
  EXPECT_TRUE(v.apply_lsa(lsa("A", 1, {{"B", 3}})).changed);
  auto r = v.apply_lsa(lsa("B", 2, {{"A", 3}}, {"SIM1"}));
  EXPECT_TRUE(r.newer && r.changed);
  EXPECT_EQ(v.nodes(), (std::set<std::string>{"A", "B"}));
  ASSERT_EQ(v.edges().size(), 1u);
  EXPECT_EQ(v.edges()[0], (Edge{"A", "B", 3}));
  EXPECT_EQ(v.ingress_of("SIM1"), "B");

  const auto before = v;
  auto stale = v.apply_lsa(lsa("B", 2, {}));
  EXPECT_FALSE(stale.newer || stale.changed);
  EXPECT_EQ(v, before);

  auto refresh = v.apply_lsa(lsa("B", 3, {{"A", 3}}, {"SIM1"}));
  EXPECT_TRUE(refresh.newer);
  EXPECT_FALSE(refresh.changed);
}

TEST(TopologyView, OneSidedEdgeIsUnusableAndPurge) {
  TopologyView v("A");
  v.apply_lsa(lsa("A", 1, {{"B", 1}}), 0);
  v.apply_lsa(lsa("B", 1, {}), 0);
  EXPECT_TRUE(v.edges().empty());
  EXPECT_FALSE(v.purge(20'000, 30'000));
  EXPECT_TRUE(v.purge(31'000, 30'000));
  EXPECT_EQ(v.nodes(), std::set<std::string>{"A"});
}

TEST(ComputeTree, Examples) {
  auto single = compute_tree({"A"}, {}, "A");
  EXPECT_TRUE(single.children_of("A").empty());
  EXPECT_THROW(compute_tree({"A"}, {}, "Z"), UnknownId);

  auto tri = compute_tree({"A", "B", "C"}, {{"A", "B", 1}, {"B", "C", 1}, {"A", "C", 10}}, "A");
  EXPECT_EQ(tri.parent_of("B"), "A");
  EXPECT_EQ(tri.parent_of("C"), "B");
  EXPECT_EQ(tri.distance.at("C"), 2u);

  // Diamond: D reachable through B or C at equal cost; B wins by id.
  std::vector<Edge> diamond{{"A", "C", 1}, {"A", "B", 1}, {"C", "D", 1}, {"B", "D", 1}};
  auto d1 = compute_tree({"A", "B", "C", "D"}, diamond, "A");
  std::reverse(diamond.begin(), diamond.end());
  auto d2 = compute_tree({"D", "C", "B", "A"}, diamond, "A");
  EXPECT_EQ(d1.parent_of("D"), "B");
  EXPECT_EQ(d1, d2);
  EXPECT_EQ(d1.subtree("B"), (std::set<std::string>{"B", "D"}));
  EXPECT_EQ(d1.child_toward("A", "D"), "B");
}

// Brute force: Floyd-Warshall distances, parent = smallest id among
// neighbors on a shortest path.
TEST(ComputeTree, ShortestPathOracle) {
  Rng rng(99);
  for (int iter = 0; iter < 500; ++iter) {
    const int n = static_cast<int>(uniform(rng, 1, 6));
    auto nodes = ids(n);
    std::vector<std::string> v(nodes.begin(), nodes.end());
    std::vector<Edge> edges;
    const std::uint64_t inf = std::numeric_limits<std::uint64_t>::max() / 4;
    std::vector<std::vector<std::uint64_t>> d(n, std::vector<std::uint64_t>(n, inf));
    std::vector<std::vector<std::uint64_t>> w(n, std::vector<std::uint64_t>(n, 0));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (coin(rng, 50)) {
          auto lat = static_cast<std::uint32_t>(uniform(rng, 1, 4));
          edges.push_back({v[i], v[j], lat});
          d[i][j] = d[j][i] = w[i][j] = w[j][i] = lat;
        }
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);

    const int root = static_cast<int>(uniform(rng, 0, n - 1));
    auto t = compute_tree(nodes, edges, v[root]);
    for (int x = 0; x < n; ++x) {
      ASSERT_EQ(t.contains(v[x]), d[root][x] < inf);
      if (!t.contains(v[x])) continue;
      EXPECT_EQ(t.distance.at(v[x]), d[root][x]);
      if (x == root) {
        EXPECT_FALSE(t.parent_of(v[x]));
        continue;
      }
      std::optional<std::string> best;
      for (int u = 0; u < n; ++u)
        if (w[u][x] && d[root][u] + w[u][x] == d[root][x]) {
          best = v[u];
          break;  // v is sorted
        }
      EXPECT_EQ(t.parent_of(v[x]), best);
    }
    // parent/children consistency and acyclicity (every node reaches root)
    for (const auto& [c, p] : t.parent) {
      const auto& cs = t.children_of(p);
      EXPECT_TRUE(std::find(cs.begin(), cs.end(), c) != cs.end());
      std::string cur = c;
      int steps = 0;
      while (cur != v[root] && steps++ < n) cur = *t.parent_of(cur);
      EXPECT_EQ(cur, v[root]);
    }
  }
}

TEST(InterestTable, CoverReductionAndAdvertise) {
  InterestTable t("C");
  EXPECT_FALSE(t.set_local({}));
  auto f = parse_filter_expr("prefix=AA");
  auto fprime = parse_filter_expr("symbol=AAA.SIM type=TRADE");
  auto adv = t.set_local({fprime, f});
  ASSERT_TRUE(adv);
  EXPECT_EQ(adv->filters, std::vector<SubscriptionFilter>{f});
  EXPECT_FALSE(t.set_local({f, fprime}));  // unchanged merge: nothing new

  auto out = advertise(t, "C", {"A", "B"}, std::string("B"));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].first, "A");

  EXPECT_FALSE(t.apply(SubAdvMsg{"C", 99, {}}));  // own origin
  EXPECT_TRUE(t.apply(SubAdvMsg{"X", 2, {fprime}}));
  EXPECT_FALSE(t.apply(SubAdvMsg{"X", 1, {}}));
  EXPECT_EQ(*t.filters_of("X"), std::vector<SubscriptionFilter>{fprime});
}

TEST(InterestTable, NoSubscriptionsMeansEmptyAdvertisements) {
  InterestTable t("A");
  EXPECT_TRUE(advertise(t, "A", {"B"}, std::nullopt).empty());
  SpanningTree tree = compute_tree({"A", "B"}, {{"A", "B", 1}}, "A");
  EXPECT_TRUE(subtree_interest(tree, t, "B").empty());
}
