#pragma once

// Mesh topology (link-state), per-ingress shortest-path trees and
// subscription-interest bookkeeping.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdf/filter.hpp"
#include "mdf/wire.hpp"

namespace mdf {

struct Edge {
  std::string a;  // a < b
  std::string b;
  std::uint32_t latency_ms = 0;
  auto operator<=>(const Edge&) const = default;
};

class TopologyView {
 public:
  struct ApplyResult {
    bool newer = false;    // seq advanced: re-flood
    bool changed = false;  // adjacency, site or sources differ
  };

  explicit TopologyView(std::string self = {}) : self_(std::move(self)) {}

  // Ignores lsas with lsa_seq <= the recorded seq for the origin.
  ApplyResult apply_lsa(const LsaMsg& lsa, std::uint64_t now_ms = 0);
  // Drops entries (other than self) last refreshed before now - max_age.
  bool purge(std::uint64_t now_ms, std::uint64_t max_age_ms);

  const std::string& self() const noexcept { return self_; }
  std::uint64_t version() const noexcept { return version_; }
  const std::map<std::string, LsaMsg>& lsas() const noexcept { return lsas_; }
  std::optional<std::uint64_t> seq_of(const std::string& origin) const;

  // Brokers with an LSA on record, plus self.
  std::set<std::string> nodes() const;
  // Edges listed by both endpoints; latency is the larger advertised value.
  std::vector<Edge> edges() const;
  std::optional<std::string> site_of(const std::string& node) const;
  // Broker hosting the feed source (smallest id if several claim it).
  std::optional<std::string> ingress_of(const std::string& source) const;

  bool operator==(const TopologyView& o) const { return lsas_ == o.lsas_; }

 private:
  std::string self_;
  std::map<std::string, LsaMsg> lsas_;
  std::map<std::string, std::uint64_t> refreshed_;
  std::uint64_t version_ = 0;
};

struct SpanningTree {
  std::string root;
  std::map<std::string, std::string> parent;
  std::map<std::string, std::vector<std::string>> children;  // sorted
  std::map<std::string, std::uint64_t> distance;

  bool contains(const std::string& node) const { return distance.count(node) != 0; }
  std::optional<std::string> parent_of(const std::string& node) const;
  const std::vector<std::string>& children_of(const std::string& node) const;
  // Nodes in the subtree rooted at `node`, including it.
  std::set<std::string> subtree(const std::string& node) const;
  // The child of `ancestor` on the path to `node`, if node is strictly below it.
  std::optional<std::string> child_toward(const std::string& ancestor,
                                          const std::string& node) const;
  bool operator==(const SpanningTree&) const = default;
};

// Shortest-path tree by summed latency. Among equal-distance candidate
// parents the smallest id wins. Throws UnknownId when root is not in the view.
SpanningTree compute_tree(const TopologyView& view, const std::string& root);
SpanningTree compute_tree(const std::set<std::string>& nodes, const std::vector<Edge>& edges,
                          const std::string& root);

// Interest announced by each broker: the cover-reduced filters of its own
// client subscriptions, versioned by advert_seq.
class InterestTable {
 public:
  explicit InterestTable(std::string self = {}) : self_(std::move(self)) {}

  // Replaces the local filter set; returns the new advertisement when the
  // merged list changed.
  std::optional<SubAdvMsg> set_local(std::vector<SubscriptionFilter> filters);
  // Records a remote advertisement; true when it is newer than what is held.
  bool apply(const SubAdvMsg& adv);

  const SubAdvMsg& local() const noexcept { return local_; }
  const std::map<std::string, SubAdvMsg>& adverts() const noexcept { return adverts_; }
  const std::vector<SubscriptionFilter>* filters_of(const std::string& origin) const;
  std::uint64_t version() const noexcept { return version_; }

 private:
  std::string self_;
  SubAdvMsg local_;
  std::map<std::string, SubAdvMsg> adverts_;  // includes self
  std::uint64_t version_ = 0;
};

// Merged interest of every broker in the subtree rooted at `child`.
std::vector<SubscriptionFilter> subtree_interest(const SpanningTree& tree,
                                                 const InterestTable& interest,
                                                 const std::string& child);

// Per-neighbor SUBADV payloads for the advertisement of `origin`: every
// neighbor except the one it arrived on.
std::vector<std::pair<std::string, SubAdvMsg>> advertise(
    const InterestTable& interest, const std::string& origin,
    const std::vector<std::string>& neighbors, const std::optional<std::string>& arrival);

}  // namespace mdf
