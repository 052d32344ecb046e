#include "mdf/overlay.hpp"

#include <algorithm>
#include <limits>

#include "mdf/error.hpp"

namespace mdf {

TopologyView::ApplyResult TopologyView::apply_lsa(const LsaMsg& lsa, std::uint64_t now_ms) {
  ApplyResult r;
  auto it = lsas_.find(lsa.origin);
  if (it != lsas_.end() && lsa.lsa_seq <= it->second.lsa_seq) return r;
  r.newer = true;
  refreshed_[lsa.origin] = now_ms;
  if (it == lsas_.end()) {
    lsas_.emplace(lsa.origin, lsa);
    r.changed = true;
  } else {
    r.changed = it->second.site != lsa.site || it->second.neighbors != lsa.neighbors ||
                it->second.sources != lsa.sources;
    it->second = lsa;
  }
  if (r.changed) ++version_;
  return r;
}

bool TopologyView::purge(std::uint64_t now_ms, std::uint64_t max_age_ms) {
  bool any = false;
  for (auto it = lsas_.begin(); it != lsas_.end();) {
    const auto seen = refreshed_[it->first];
    if (it->first != self_ && now_ms > seen + max_age_ms) {
      refreshed_.erase(it->first);
      it = lsas_.erase(it);
      any = true;
    } else {
      ++it;
    }
  }
  if (any) ++version_;
  return any;
}

std::optional<std::uint64_t> TopologyView::seq_of(const std::string& origin) const {
  auto it = lsas_.find(origin);
  if (it == lsas_.end()) return std::nullopt;
  return it->second.lsa_seq;
}

std::set<std::string> TopologyView::nodes() const {
  std::set<std::string> out;
  if (!self_.empty()) out.insert(self_);
  for (const auto& [id, _] : lsas_) out.insert(id);
  return out;
}

std::vector<Edge> TopologyView::edges() const {
  std::vector<Edge> out;
  for (const auto& [id, lsa] : lsas_) {
    for (const auto& nb : lsa.neighbors) {
      if (!(id < nb.id)) continue;
      auto other = lsas_.find(nb.id);
      if (other == lsas_.end()) continue;
      for (const auto& back : other->second.neighbors)
        if (back.id == id) {
          out.push_back(Edge{id, nb.id, std::max(nb.latency_ms, back.latency_ms)});
          break;
        }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> TopologyView::site_of(const std::string& node) const {
  auto it = lsas_.find(node);
  if (it == lsas_.end()) return std::nullopt;
  return it->second.site;
}

std::optional<std::string> TopologyView::ingress_of(const std::string& source) const {
  for (const auto& [id, lsa] : lsas_)  // ascending id
    if (std::binary_search(lsa.sources.begin(), lsa.sources.end(), source)) return id;
  return std::nullopt;
}

std::optional<std::string> SpanningTree::parent_of(const std::string& node) const {
  auto it = parent.find(node);
  if (it == parent.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& SpanningTree::children_of(const std::string& node) const {
  static const std::vector<std::string> kNone;
  auto it = children.find(node);
  return it == children.end() ? kNone : it->second;
}

std::set<std::string> SpanningTree::subtree(const std::string& node) const {
  std::set<std::string> out;
  if (!contains(node)) return out;
  std::vector<std::string> stack{node};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (const auto& c : children_of(n)) stack.push_back(c);
    out.insert(std::move(n));
  }
  return out;
}

std::optional<std::string> SpanningTree::child_toward(const std::string& ancestor,
                                                      const std::string& node) const {
  std::string cur = node;
  while (true) {
    auto p = parent.find(cur);
    if (p == parent.end()) return std::nullopt;
    if (p->second == ancestor) return cur;
    cur = p->second;
  }
}

SpanningTree compute_tree(const std::set<std::string>& nodes, const std::vector<Edge>& edges,
                          const std::string& root) {
  if (!nodes.count(root)) throw UnknownId("tree root '" + root + "' not in topology");
  std::map<std::string, std::vector<std::pair<std::string, std::uint32_t>>> adj;
  for (const auto& e : edges) {
    const auto w = std::max<std::uint32_t>(e.latency_ms, 1);
    adj[e.a].emplace_back(e.b, w);
    adj[e.b].emplace_back(e.a, w);
  }

  SpanningTree t;
  t.root = root;
  std::set<std::pair<std::uint64_t, std::string>> frontier{{0, root}};
  std::map<std::string, std::uint64_t> best{{root, 0}};
  while (!frontier.empty()) {
    auto [d, u] = *frontier.begin();
    frontier.erase(frontier.begin());
    t.distance[u] = d;
    for (const auto& [v, w] : adj[u]) {
      if (t.distance.count(v)) continue;
      const auto nd = d + w;
      auto it = best.find(v);
      if (it == best.end() || nd < it->second) {
        if (it != best.end()) frontier.erase({it->second, v});
        best[v] = nd;
        t.parent[v] = u;
        frontier.insert({nd, v});
      } else if (nd == it->second && u < t.parent[v]) {
        t.parent[v] = u;
      }
    }
  }
  for (const auto& [child, par] : t.parent) t.children[par].push_back(child);
  for (auto& [_, cs] : t.children) std::sort(cs.begin(), cs.end());
  return t;
}

SpanningTree compute_tree(const TopologyView& view, const std::string& root) {
  return compute_tree(view.nodes(), view.edges(), root);
}

std::optional<SubAdvMsg> InterestTable::set_local(std::vector<SubscriptionFilter> filters) {
  auto merged = merge_filters(std::move(filters));
  if (merged == local_.filters && local_.advert_seq != 0) return std::nullopt;
  if (merged == local_.filters && merged.empty()) return std::nullopt;
  local_.origin = self_;
  local_.filters = std::move(merged);
  local_.advert_seq += 1;
  adverts_[self_] = local_;
  ++version_;
  return local_;
}

bool InterestTable::apply(const SubAdvMsg& adv) {
  if (adv.origin == self_) return false;
  auto it = adverts_.find(adv.origin);
  if (it != adverts_.end() && adv.advert_seq <= it->second.advert_seq) return false;
  const bool differs = it == adverts_.end() || it->second.filters != adv.filters;
  adverts_[adv.origin] = adv;
  if (differs) ++version_;
  return true;
}

const std::vector<SubscriptionFilter>* InterestTable::filters_of(const std::string& origin) const {
  auto it = adverts_.find(origin);
  return it == adverts_.end() ? nullptr : &it->second.filters;
}

std::vector<SubscriptionFilter> subtree_interest(const SpanningTree& tree,
                                                 const InterestTable& interest,
                                                 const std::string& child) {
  std::vector<SubscriptionFilter> all;
  for (const auto& node : tree.subtree(child))
    if (const auto* fs = interest.filters_of(node)) all.insert(all.end(), fs->begin(), fs->end());
  return merge_filters(std::move(all));
}

std::vector<std::pair<std::string, SubAdvMsg>> advertise(
    const InterestTable& interest, const std::string& origin,
    const std::vector<std::string>& neighbors, const std::optional<std::string>& arrival) {
  std::vector<std::pair<std::string, SubAdvMsg>> out;
  auto it = interest.adverts().find(origin);
  if (it == interest.adverts().end()) return out;
  for (const auto& nb : neighbors)
    if (!arrival || nb != *arrival) out.emplace_back(nb, it->second);
  return out;
}

}  // namespace mdf
