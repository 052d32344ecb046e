#include "mdf/broker.hpp"

#include <algorithm>

#include "mdf/error.hpp"
#include "mdf/store.hpp"

namespace mdf {

// ---------------------------------------------------------------- Session

Session::Session(SessionId id, PeerKind kind, std::size_t capacity)
    : id_(id), kind_(kind), capacity_(capacity) {}

void Session::subscribe(Subscription sub) {
  const auto id = sub.id;
  if (!subs_.emplace(id, std::move(sub)).second)
    throw DuplicateKey("subscription id " + std::to_string(id) + " already in use");
}

void Session::unsubscribe(std::uint64_t sub_id) {
  if (subs_.erase(sub_id) == 0) throw UnknownId("unknown subscription id " + std::to_string(sub_id));
}

std::uint32_t Session::credits() const noexcept {
  return complete_pending_ >= capacity_ ? 0
                                        : static_cast<std::uint32_t>(capacity_ - complete_pending_);
}

std::uint64_t& Session::SourceSeqs::at(const std::string& source) {
  if (first_.empty()) first_ = source;
  if (first_ == source) return first_seq_;
  for (auto& [src, seq] : more_)
    if (src == source) return seq;
  return more_.emplace_back(source, 0).second;
}

std::uint64_t Session::SourceSeqs::get(const std::string& source) const {
  if (first_ == source) return first_seq_;
  for (const auto& [src, seq] : more_)
    if (src == source) return seq;
  return 0;
}

bool Session::enqueue(const NotificationPtr& n, Qoi qoi, NotificationPtr* superseded) {
  auto& seen = complete_horizon_.at(n->source);
  if (qoi == Qoi::Complete) {
    if (n->seq <= seen) return false;
    seen = n->seq;
    if (track_symbols_) {
      auto& ss = symbols_[n->symbol];
      auto& ch = ss.horizon.at(n->source);
      ch = std::max(ch, n->seq);
      // A later conflatable entry must not overtake this one.
      ss.slot.reset();
    }
    queue_.push_back(Entry{n, nullptr});
    ++complete_pending_;
    ++stats_.matched;
    return true;
  }

  if (!track_symbols_) {
    track_symbols_ = true;
    conflated_floor_ = complete_horizon_;
  }
  if (n->seq <= conflated_floor_.get(n->source)) return false;
  auto& ss = symbols_[n->symbol];
  auto& ch = ss.horizon.at(n->source);
  if (n->seq <= ch) return false;
  ch = n->seq;
  ++stats_.matched;
  if (ss.slot) {
    auto& e = queue_[static_cast<std::size_t>(*ss.slot - head_)];
    if (superseded) *superseded = e.n;
    e.n = n;
    ++stats_.dropped_superseded;
    return true;
  }
  queue_.push_back(Entry{n, &ss});
  ss.slot = head_ + queue_.size() - 1;
  return true;
}

std::vector<NotificationPtr> Session::drain(std::size_t max_count) {
  std::vector<NotificationPtr> out;
  out.reserve(std::min(max_count, queue_.size()));
  while (!queue_.empty() && out.size() < max_count) {
    auto& e = queue_.front();
    if (e.slot_owner) {
      if (e.slot_owner->slot == head_) e.slot_owner->slot.reset();
    } else {
      --complete_pending_;
    }
    out.push_back(std::move(e.n));
    queue_.pop_front();
    ++head_;
  }
  stats_.delivered += out.size();
  return out;
}

bool DedupeWindow::insert(std::uint64_t seq) {
  if (!set_.insert(seq).second) return false;
  order_.push_back(seq);
  if (order_.size() > capacity_) {
    set_.erase(order_.front());
    order_.pop_front();
  }
  return true;
}

// ---------------------------------------------------------------- Broker

Broker::Broker(BrokerConfig cfg, EventStore* store)
    : cfg_(std::move(cfg)), store_(store), view_(cfg_.id), interest_(cfg_.id) {
  originate_lsa(0);
}

void Broker::send(LinkId link, Message m) { outbox_.push_back(Outbound{link, std::move(m), false}); }

std::optional<LinkId> Broker::link_of(const std::string& peer) const {
  auto it = neighbor_links_.find(peer);
  if (it == neighbor_links_.end()) return std::nullopt;
  return it->second;
}

void Broker::send_to(const std::string& peer, Message m) {
  if (auto l = link_of(peer)) send(*l, std::move(m));
}

std::vector<Outbound> Broker::take_outbox() {
  std::vector<Outbound> out;
  out.swap(outbox_);
  return out;
}

std::vector<std::string> Broker::neighbors() const {
  std::vector<std::string> out;
  for (const auto& [peer, _] : neighbor_links_) out.push_back(peer);
  return out;
}

void Broker::on_connect(LinkId link, std::uint32_t latency_ms, std::uint64_t now_ms) {
  Link l;
  l.id = link;
  l.latency_ms = latency_ms;
  l.last_rx = now_ms;
  l.last_hb = now_ms;
  links_[link] = l;
  send(link, HelloMsg{cfg_.id, PeerKind::Broker, cfg_.site});
}

void Broker::on_disconnect(LinkId link, std::uint64_t now_ms) { link_down(link, now_ms, false); }

void Broker::on_protocol_error(LinkId link, std::uint64_t now_ms) {
  ++stats_.protocol_errors;
  link_down(link, now_ms, true);
}

void Broker::link_down(LinkId link, std::uint64_t now, bool close) {
  auto it = links_.find(link);
  if (it == links_.end()) return;
  Link l = std::move(it->second);
  links_.erase(it);
  if (close) outbox_.push_back(Outbound{link, std::nullopt, true});
  if (l.kind == PeerKind::Broker) {
    auto nl = neighbor_links_.find(l.peer);
    if (nl != neighbor_links_.end() && nl->second == link) {
      neighbor_links_.erase(nl);
      for (auto& [_, st] : sources_) st.attached.erase(l.peer);
      originate_lsa(now);
    }
  }
  if (l.session) close_session(*l.session);
}

void Broker::on_frame(LinkId link, const Message& msg, std::uint64_t now) {
  auto it = links_.find(link);
  if (it == links_.end()) return;
  Link& l = it->second;
  l.last_rx = now;

  if (const auto* hello = std::get_if<HelloMsg>(&msg)) {
    if (l.kind) return on_protocol_error(link, now);
    handle_hello(l, *hello, now);
    pump_clients();
    return;
  }
  if (!l.kind) return on_protocol_error(link, now);

  if (*l.kind == PeerKind::Client) {
    try {
      if (const auto* sub = std::get_if<SubMsg>(&msg)) {
        subscribe(*l.session, Subscription{sub->sub_id, sub->filter, sub->qoi});
      } else if (const auto* unsub = std::get_if<UnsubMsg>(&msg)) {
        unsubscribe(*l.session, unsub->sub_id);
      } else if (const auto* credit = std::get_if<CreditMsg>(&msg)) {
        l.window += credit->n;
      } else if (!std::holds_alternative<HeartbeatMsg>(msg)) {
        ++stats_.protocol_errors;
      }
    } catch (const Error&) {
      ++stats_.protocol_errors;
    }
    pump_clients();
    return;
  }

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PubMsg>) {
          handle_pub(l, m.n, now);
        } else if constexpr (std::is_same_v<T, LsaMsg>) {
          handle_lsa(l, m, now);
        } else if constexpr (std::is_same_v<T, SubAdvMsg>) {
          handle_subadv(l, m);
        } else if constexpr (std::is_same_v<T, ResumeMsg>) {
          handle_resume(l, m);
        } else if constexpr (std::is_same_v<T, ReplayMsg>) {
          handle_replay(m, now);
        } else if constexpr (std::is_same_v<T, ReplayEndMsg>) {
          handle_replay_end(m);
        } else if constexpr (std::is_same_v<T, HeartbeatMsg>) {
        } else {
          ++stats_.protocol_errors;
        }
      },
      msg);
  pump_clients();
}

void Broker::handle_hello(Link& l, const HelloMsg& m, std::uint64_t now) {
  l.kind = m.kind;
  l.peer = m.node_id;
  const auto link = l.id;
  if (m.kind == PeerKind::Broker) {
    if (m.node_id == cfg_.id) return on_protocol_error(link, now);
    // A second connection to an already-connected peer replaces the first.
    if (auto old = neighbor_links_.find(m.node_id);
        old != neighbor_links_.end() && old->second != link)
      link_down(old->second, now, true);
    neighbor_links_[m.node_id] = link;
    for (const auto& [origin, lsa] : view_.lsas())
      if (origin != cfg_.id) send(link, lsa);
    for (const auto& [origin, adv] : interest_.adverts()) send(link, adv);
    originate_lsa(now);
  } else if (m.kind == PeerKind::Client) {
    const auto s = open_session();
    links_.at(link).session = s;
  }
}

void Broker::originate_lsa(std::uint64_t now) {
  LsaMsg m;
  m.origin = cfg_.id;
  m.lsa_seq = ++lsa_seq_;
  m.site = cfg_.site;
  for (const auto& [peer, link] : neighbor_links_)
    m.neighbors.push_back(LsaNeighbor{peer, links_.at(link).latency_ms});
  m.sources.assign(hosted_.begin(), hosted_.end());
  last_lsa_ = now;
  const auto r = view_.apply_lsa(m, now);
  for (const auto& [peer, link] : neighbor_links_) send(link, m);
  if (r.changed) topology_changed(now);
}

void Broker::handle_lsa(Link& l, const LsaMsg& m, std::uint64_t now) {
  if (m.origin == cfg_.id) return;
  const auto r = view_.apply_lsa(m, now);
  if (r.newer)
    for (const auto& [peer, link] : neighbor_links_)
      if (peer != l.peer) send(link, m);
  if (r.changed) topology_changed(now);
}

void Broker::handle_subadv(Link& l, const SubAdvMsg& m) {
  if (!interest_.apply(m)) return;
  for (const auto& [peer, payload] : advertise(interest_, m.origin, neighbors(), l.peer))
    send_to(peer, payload);
}

void Broker::refresh_interest() {
  std::vector<SubscriptionFilter> all;
  for (const auto& [_, s] : sessions_)
    for (const auto& [__, sub] : s.subscriptions()) all.push_back(sub.filter);
  if (interest_.set_local(std::move(all)))
    for (const auto& [peer, payload] : advertise(interest_, cfg_.id, neighbors(), std::nullopt))
      send_to(peer, payload);
}

void Broker::topology_changed(std::uint64_t now) {
  ++topology_changes_;
  if (on_topology_change) on_topology_change(now);

  std::set<std::string> all;
  for (const auto& [_, lsa] : view_.lsas()) all.insert(lsa.sources.begin(), lsa.sources.end());
  for (const auto& [s, _] : sources_) all.insert(s);
  for (const auto& s : all) {
    std::optional<std::string> parent;
    if (auto ing = ingress_of(s); ing && *ing != cfg_.id) parent = tree_for(*ing).parent_of(cfg_.id);
    auto& st = sources_[s];
    if (parent) st.attached.erase(*parent);
    if (parent == st.parent) continue;
    st.parent = parent;
    st.recovery.reset();
    if (parent) start_recovery(s, now);
  }
}

void Broker::start_recovery(const std::string& source, std::uint64_t now) {
  auto& st = sources_[source];
  auto ing = ingress_of(source);
  if (!ing || !st.parent) return;
  // Sent even without interest: the RESUME also attaches us to the parent.
  auto filters = subtree_interest(tree_for(*ing), interest_, cfg_.id);
  st.recovery = Recovery{next_request_++, now};
  ++stats_.resumes_sent;
  send_to(*st.parent,
          ResumeMsg{st.recovery->request_id, cfg_.id, source, st.accepted, std::move(filters)});
}

bool Broker::recovering(const std::string& source) const {
  auto it = sources_.find(source);
  return it != sources_.end() && it->second.recovery.has_value();
}

std::optional<std::string> Broker::child_toward_requester(const std::string& source,
                                                          const std::string& requester) {
  auto ing = ingress_of(source);
  if (!ing) return std::nullopt;
  auto c = tree_for(*ing).child_toward(cfg_.id, requester);
  if (!c || !neighbor_links_.count(*c)) return std::nullopt;
  return c;
}

void Broker::handle_resume(const Link& l, const ResumeMsg& m) {
  sources_[m.source].attached.insert(l.peer);
  auto ing = ingress_of(m.source);
  if (!ing) return;
  if (*ing != cfg_.id) {
    if (auto p = tree_for(*ing).parent_of(cfg_.id)) send_to(*p, m);
    return;
  }
  ++stats_.replays_served;
  auto c = child_toward_requester(m.source, m.requester);
  if (!c) return;
  std::uint64_t last = std::max(m.after_seq, sources_[m.source].accepted);
  if (store_) {
    for (const auto& n : store_->since(m.source, m.after_seq)) {
      const bool wanted = std::any_of(m.filters.begin(), m.filters.end(),
                                      [&](const auto& f) { return filter_matches(f, *n); });
      if (wanted) send_to(*c, ReplayMsg{m.request_id, m.requester, n});
      last = std::max(last, n->seq);
    }
  }
  send_to(*c, ReplayEndMsg{m.request_id, m.requester, m.source, last});
}

void Broker::handle_replay(const ReplayMsg& m, std::uint64_t) {
  if (m.requester != cfg_.id) {
    if (auto c = child_toward_requester(m.n->source, m.requester)) send_to(*c, m);
    return;
  }
  auto& st = sources_[m.n->source];
  if (!st.recovery || st.recovery->request_id != m.request_id) return;
  if (m.n->seq <= st.accepted) return;
  accept(m.n, st.parent.value_or(std::string()));
}

void Broker::handle_replay_end(const ReplayEndMsg& m) {
  if (m.requester != cfg_.id) {
    if (auto c = child_toward_requester(m.source, m.requester)) send_to(*c, m);
    return;
  }
  auto& st = sources_[m.source];
  if (st.recovery && st.recovery->request_id == m.request_id) st.recovery.reset();
}

void Broker::handle_pub(Link& l, const NotificationPtr& n, std::uint64_t) {
  ++stats_.pub_received;
  dedupe_[l.peer].try_emplace(n->source, cfg_.dedupe_window).first->second.insert(n->seq);
  auto ing = ingress_of(n->source);
  if (ing && *ing == cfg_.id) {
    ++stats_.pub_duplicate;
    return;
  }
  auto& st = sources_[n->source];
  if (ing) {
    auto parent = tree_for(*ing).parent_of(cfg_.id);
    if (!parent || *parent != l.peer) {
      ++stats_.pub_not_parent;
      return;
    }
    if (st.recovery) {
      ++stats_.pub_recovering;
      return;
    }
  }
  if (n->seq <= st.accepted) {
    ++stats_.pub_duplicate;
    return;
  }
  ++stats_.pub_accepted;
  accept(n, l.peer);
}

void Broker::accept(const NotificationPtr& n, const std::string& arrival) {
  auto& st = sources_[n->source];
  st.accepted = std::max(st.accepted, n->seq);
  deliver_local(n);
  forward(n, arrival);
}

void Broker::host_source(const std::string& source, std::uint64_t now_ms) {
  if (hosted_.insert(source).second) {
    ingress_cache_.clear();
    originate_lsa(now_ms);
  }
}

void Broker::publish_local(const EventNotification& n, std::uint64_t now_ms) {
  publish_local(std::make_shared<const EventNotification>(n), now_ms);
}

void Broker::publish_local(NotificationPtr n, std::uint64_t now_ms) {
  if (!hosted_.count(n->source)) host_source(n->source, now_ms);
  ++stats_.published_local;
  accept(n, std::string());
  pump_clients();
}

bool Broker::backpressured() const {
  return std::any_of(sessions_.begin(), sessions_.end(),
                     [](const auto& kv) { return kv.second.backpressured(); });
}

void Broker::deliver_local(const NotificationPtr& n) {
  // One delivery per session; COMPLETE wins when several subscriptions match.
  match_scratch_.clear();
  const auto stamp = ++match_stamp_;
  auto take = [&](const IndexEntry& e) {
    Session* s = e.session;
    if (s->match_stamp_ != stamp) {
      s->match_stamp_ = stamp;
      s->match_index_ = match_scratch_.size();
      match_scratch_.emplace_back(s, e.qoi);
    } else if (e.qoi == Qoi::Complete) {
      match_scratch_[s->match_index_].second = Qoi::Complete;
    }
  };
  auto consider = [&](const IndexEntry& e) {
    if (!e.residual || filter_matches(*e.filter, *n)) take(e);
  };
  if (auto it = by_symbol_.find(n->symbol); it != by_symbol_.end())
    for (const auto& e : it->second) consider(e);
  if (!by_prefix_.empty()) {
    const std::string_view sym = n->symbol.str();
    for (std::size_t len = 1; len <= std::min(max_prefix_, sym.size()); ++len)
      if (auto it = by_prefix_.find(sym.substr(0, len)); it != by_prefix_.end())
        for (const auto& e : it->second) consider(e);
  }
  for (const auto& group : unkeyed_) {
    if (group.front().residual && !filter_matches(*group.front().filter, *n)) continue;
    for (const auto& e : group) take(e);
  }

  for (const auto& [s, qoi] : match_scratch_) {
    NotificationPtr old;
    if (s->enqueue(n, qoi, &old)) {
      ++stats_.local_deliveries;
      if (old && on_superseded) on_superseded(s->id(), *old);
    }
  }
}

void Broker::forward(const NotificationPtr& n, const std::string& arrival) {
  for (const auto& peer : route(*n, arrival)) {
    auto& window = dedupe_[peer].try_emplace(n->source, cfg_.dedupe_window).first->second;
    if (!window.insert(n->seq)) continue;
    ++stats_.pub_sent;
    send_to(peer, PubMsg{n});
  }
}

std::vector<std::string> Broker::route(const EventNotification& n, const std::string& arrival) {
  std::vector<std::string> out;
  auto ing = ingress_of(n.source);
  if (!ing) {
    for (const auto& [peer, _] : neighbor_links_)
      if (peer != arrival) out.push_back(peer);
    return out;
  }
  const auto& tree = tree_for(*ing);
  if (!tree.contains(cfg_.id)) return out;
  auto st = sources_.find(n.source);
  if (st == sources_.end()) return out;
  for (const auto& child : tree.children_of(cfg_.id)) {
    if (child == arrival || !neighbor_links_.count(child) || !st->second.attached.count(child)) continue;
    const auto& fs = interest_for(*ing, child);
    if (std::any_of(fs.begin(), fs.end(), [&](const auto& f) { return filter_matches(f, n); }))
      out.push_back(child);
  }
  return out;
}

std::optional<std::string> Broker::ingress_of(const std::string& source) const {
  if (hosted_.count(source)) return cfg_.id;
  if (ingress_cache_version_ != view_.version()) {
    ingress_cache_.clear();
    ingress_cache_version_ = view_.version();
  }
  auto it = ingress_cache_.find(source);
  if (it == ingress_cache_.end()) it = ingress_cache_.emplace(source, view_.ingress_of(source)).first;
  return it->second;
}

const SpanningTree& Broker::tree_for(const std::string& ingress) {
  if (cache_view_version_ != view_.version()) {
    tree_cache_.clear();
    interest_cache_.clear();
    cache_view_version_ = view_.version();
  }
  auto it = tree_cache_.find(ingress);
  if (it != tree_cache_.end()) return it->second;
  SpanningTree t;
  try {
    t = compute_tree(view_, ingress);
  } catch (const UnknownId&) {
    t.root = ingress;
  }
  return tree_cache_.emplace(ingress, std::move(t)).first->second;
}

const std::vector<SubscriptionFilter>& Broker::interest_for(const std::string& ingress,
                                                            const std::string& child) {
  const auto& tree = tree_for(ingress);
  if (cache_interest_version_ != interest_.version()) {
    interest_cache_.clear();
    cache_interest_version_ = interest_.version();
  }
  auto key = std::make_pair(ingress, child);
  auto it = interest_cache_.find(key);
  if (it == interest_cache_.end())
    it = interest_cache_.emplace(key, subtree_interest(tree, interest_, child)).first;
  return it->second;
}

void Broker::on_timer(std::uint64_t now) {
  std::vector<LinkId> ids;
  for (const auto& [id, _] : links_) ids.push_back(id);
  for (auto id : ids) {
    auto it = links_.find(id);
    if (it == links_.end()) continue;
    auto& l = it->second;
    if (l.kind == PeerKind::Client) continue;
    if (now > l.last_rx + cfg_.dead_after_ms) {
      link_down(id, now, true);
      continue;
    }
    if (l.kind == PeerKind::Broker && now >= l.last_hb + cfg_.heartbeat_ms) {
      l.last_hb = now;
      send(id, HeartbeatMsg{now});
    }
  }
  if (now >= last_lsa_ + cfg_.lsa_refresh_ms) originate_lsa(now);
  if (view_.purge(now, cfg_.lsa_max_age_ms)) topology_changed(now);
  for (auto& [source, st] : sources_)
    if (st.recovery && now >= st.recovery->sent_at + cfg_.resume_retry_ms) start_recovery(source, now);
  pump_clients();
}

void Broker::pump_clients() {
  for (auto& [id, l] : links_) {
    if (!l.session || l.window == 0) continue;
    auto batch = drain(*l.session, static_cast<std::size_t>(std::min<std::uint64_t>(l.window, 512)));
    l.window -= batch.size();
    for (auto& n : batch) send(id, PubMsg{std::move(n)});
  }
}

SessionId Broker::open_session() {
  const auto id = next_session_++;
  sessions_.emplace(id, Session(id, PeerKind::Client, cfg_.queue_capacity));
  return id;
}

void Broker::close_session(SessionId s) {
  if (sessions_.erase(s) == 0) return;
  rebuild_index();
  refresh_interest();
}

Session& Broker::session_ref(SessionId s) {
  auto it = sessions_.find(s);
  if (it == sessions_.end()) throw UnknownId("unknown session " + std::to_string(s));
  return it->second;
}

const Session& Broker::session(SessionId s) const {
  auto it = sessions_.find(s);
  if (it == sessions_.end()) throw UnknownId("unknown session " + std::to_string(s));
  return it->second;
}

std::vector<SessionId> Broker::session_ids() const {
  std::vector<SessionId> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

void Broker::subscribe(SessionId s, Subscription sub) {
  session_ref(s).subscribe(std::move(sub));
  rebuild_index();
  refresh_interest();
}

void Broker::unsubscribe(SessionId s, std::uint64_t sub_id) {
  session_ref(s).unsubscribe(sub_id);
  rebuild_index();
  refresh_interest();
}

std::vector<NotificationPtr> Broker::drain(SessionId s, std::size_t max_count) {
  return session_ref(s).drain(max_count);
}

void Broker::rebuild_index() {
  by_symbol_.clear();
  by_prefix_.clear();
  max_prefix_ = 0;
  unkeyed_.clear();
  auto less = [](const SubscriptionFilter* a, const SubscriptionFilter* b) { return canonical_less(*a, *b); };
  std::map<const SubscriptionFilter*, std::size_t, decltype(less)> groups(less);
  for (auto& [sid, s] : sessions_) {
    for (const auto& [_, sub] : s.subscriptions()) {
      const auto& f = sub.filter;
      IndexEntry e{&s, sub.qoi, &f, f.source() || f.instrument_class() || f.event_types()};
      if (const auto* set = sub.filter.symbol_set()) {
        for (const auto& sym : set->symbols) by_symbol_[sym].push_back(e);
      } else if (const auto* p = sub.filter.symbol_prefix()) {
        by_prefix_[p->prefix].push_back(e);
        max_prefix_ = std::max(max_prefix_, p->prefix.size());
      } else {
        e.residual = !f.is_wildcard();
        auto [g, fresh] = groups.try_emplace(&f, unkeyed_.size());
        if (fresh) unkeyed_.emplace_back();
        unkeyed_[g->second].push_back(e);
      }
    }
  }
}

}  // namespace mdf
