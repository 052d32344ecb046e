#pragma once

// Content-based broker node. The broker is a transport-agnostic state
// machine: the owner feeds it connection events, decoded frames and timer
// ticks, and transmits whatever it leaves in the outbox.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mdf/filter.hpp"
#include "mdf/model.hpp"
#include "mdf/overlay.hpp"
#include "mdf/wire.hpp"

namespace mdf {

class EventStore;

using LinkId = std::uint64_t;
using SessionId = std::uint64_t;

struct SessionStats {
  std::uint64_t matched = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_superseded = 0;
};

// A client session: subscriptions plus the QoI-aware delivery queue.
//
// COMPLETE entries consume credits from a window of `capacity`; entries
// beyond the window are staged (never dropped) and the session reports
// backpressure. A CONFLATED entry whose symbol already has a replaceable
// pending entry overwrites it in place.
class Session {
 public:
  Session(SessionId id, PeerKind kind, std::size_t capacity = 1024);

  SessionId id() const noexcept { return id_; }
  PeerKind kind() const noexcept { return kind_; }

  // Throws DuplicateKey when the id is in use.
  void subscribe(Subscription sub);
  // Throws UnknownId.
  void unsubscribe(std::uint64_t sub_id);
  const std::map<std::uint64_t, Subscription>& subscriptions() const noexcept { return subs_; }

  // `n` matched a subscription with the given QoI. Returns false when the
  // session already saw this or a newer notification from the source.
  // `superseded` receives the replaced notification on conflation.
  bool enqueue(const NotificationPtr& n, Qoi qoi, NotificationPtr* superseded = nullptr);
  std::vector<NotificationPtr> drain(std::size_t max_count);

  std::size_t pending() const noexcept { return queue_.size(); }
  std::uint32_t credits() const noexcept;
  bool backpressured() const noexcept { return complete_pending_ > capacity_; }
  const SessionStats& stats() const noexcept { return stats_; }

 private:
  struct SymbolState;
  struct Entry {
    NotificationPtr n;
    SymbolState* slot_owner;  // set for conflatable entries
  };
  // Highest seq per source; sessions rarely see more than one source, so
  // the first is stored inline.
  class SourceSeqs {
   public:
    std::uint64_t& at(const std::string& source);
    std::uint64_t get(const std::string& source) const;

   private:
    std::string first_;
    std::uint64_t first_seq_ = 0;
    std::vector<std::pair<std::string, std::uint64_t>> more_;
  };
  struct SymbolState {
    // Absolute index of the replaceable pending entry, if any.
    std::optional<std::uint64_t> slot;
    SourceSeqs horizon;  // highest seq enqueued for the symbol
  };

  SessionId id_;
  PeerKind kind_;
  std::size_t capacity_;
  std::map<std::uint64_t, Subscription> subs_;
  std::deque<Entry> queue_;
  std::uint64_t head_ = 0;  // absolute index of queue_.front()
  // Per-symbol state is kept only once the session has seen a CONFLATED
  // entry; older COMPLETE history is summarized by conflated_floor_.
  bool track_symbols_ = false;
  std::unordered_map<SymbolKey, SymbolState> symbols_;
  SourceSeqs conflated_floor_;
  std::size_t complete_pending_ = 0;
  SourceSeqs complete_horizon_;
  SessionStats stats_;

  // Per-publication match bookkeeping owned by the broker.
  friend class Broker;
  std::uint64_t match_stamp_ = 0;
  std::size_t match_index_ = 0;
};

// Remembers the last `capacity` (source, seq) keys per source.
class DedupeWindow {
 public:
  explicit DedupeWindow(std::size_t capacity = 1u << 16) : capacity_(capacity) {}
  // True when the key was not present (and records it).
  bool insert(std::uint64_t seq);
  bool contains(std::uint64_t seq) const { return set_.count(seq) != 0; }

 private:
  std::size_t capacity_;
  std::unordered_set<std::uint64_t> set_;
  std::deque<std::uint64_t> order_;
};

struct BrokerConfig {
  std::string id;
  std::string site;
  std::size_t queue_capacity = 1024;
  std::uint64_t heartbeat_ms = 1000;
  std::uint64_t dead_after_ms = 3000;
  std::uint64_t lsa_refresh_ms = 10'000;
  std::uint64_t lsa_max_age_ms = 30'000;
  std::uint64_t resume_retry_ms = 3000;
  std::size_t dedupe_window = 1u << 16;
};

struct BrokerStats {
  std::uint64_t published_local = 0;
  std::uint64_t pub_received = 0;
  std::uint64_t pub_accepted = 0;
  std::uint64_t pub_not_parent = 0;
  std::uint64_t pub_recovering = 0;
  std::uint64_t pub_duplicate = 0;
  std::uint64_t pub_sent = 0;
  std::uint64_t local_deliveries = 0;  // session enqueues
  std::uint64_t resumes_sent = 0;
  std::uint64_t replays_served = 0;
  std::uint64_t protocol_errors = 0;
};

struct Outbound {
  LinkId link = 0;
  std::optional<Message> msg;
  bool close = false;  // transport should drop the connection
};

class Broker {
 public:
  explicit Broker(BrokerConfig cfg, EventStore* store = nullptr);

  const std::string& id() const noexcept { return cfg_.id; }
  const BrokerConfig& config() const noexcept { return cfg_; }

  // --- transport events ---
  // A new stream connection. Sends HELLO; the peer's HELLO decides whether it
  // is a neighbor broker or a client.
  void on_connect(LinkId link, std::uint32_t latency_ms, std::uint64_t now_ms);
  void on_frame(LinkId link, const Message& msg, std::uint64_t now_ms);
  void on_disconnect(LinkId link, std::uint64_t now_ms);
  // Undecodable input on a link: counted and the link is closed.
  void on_protocol_error(LinkId link, std::uint64_t now_ms);
  void on_timer(std::uint64_t now_ms);
  std::vector<Outbound> take_outbox();

  // --- local ingress ---
  void host_source(const std::string& source, std::uint64_t now_ms = 0);
  // Delivers and routes a notification from a local feed (already enriched
  // and stored by the ticker plant).
  void publish_local(const EventNotification& n, std::uint64_t now_ms = 0);
  void publish_local(NotificationPtr n, std::uint64_t now_ms = 0);
  bool backpressured() const;

  // --- in-process client sessions ---
  SessionId open_session();
  void close_session(SessionId s);
  void subscribe(SessionId s, Subscription sub);      // DuplicateKey, UnknownId
  void unsubscribe(SessionId s, std::uint64_t sub_id);  // UnknownId
  std::vector<NotificationPtr> drain(SessionId s, std::size_t max_count);
  const Session& session(SessionId s) const;
  std::vector<SessionId> session_ids() const;

  // --- introspection ---
  const TopologyView& view() const noexcept { return view_; }
  const InterestTable& interest() const noexcept { return interest_; }
  const SpanningTree& tree_for(const std::string& ingress);
  std::optional<std::string> ingress_of(const std::string& source) const;
  // Neighbor broker ids selected for `n` arriving from `arrival` (empty for local).
  std::vector<std::string> route(const EventNotification& n, const std::string& arrival = {});
  std::vector<std::string> neighbors() const;
  bool recovering(const std::string& source) const;
  const BrokerStats& stats() const noexcept { return stats_; }
  std::uint64_t topology_changes() const noexcept { return topology_changes_; }

  // Observation hooks.
  std::function<void(SessionId, const EventNotification& superseded)> on_superseded;
  std::function<void(std::uint64_t now_ms)> on_topology_change;

 private:
  struct Link {
    LinkId id = 0;
    std::uint32_t latency_ms = 0;
    std::optional<PeerKind> kind;
    std::string peer;
    std::uint64_t last_rx = 0;
    std::uint64_t last_hb = 0;
    std::optional<SessionId> session;
    std::uint64_t window = 0;  // client credit window
  };
  struct Recovery {
    std::uint64_t request_id = 0;
    std::uint64_t sent_at = 0;
  };
  struct SourceState {
    std::uint64_t accepted = 0;
    std::optional<std::string> parent;
    std::optional<Recovery> recovery;
    // Children that asked to receive this source (by RESUME) over their
    // current link. Live PUBs go only to attached children.
    std::set<std::string> attached;
  };
  struct IndexEntry {
    Session* session;
    Qoi qoi;
    const SubscriptionFilter* filter;
    bool residual;  // constraints beyond the symbol selector it is indexed by
  };

  void send(LinkId link, Message m);
  void send_to(const std::string& peer, Message m);
  std::optional<LinkId> link_of(const std::string& peer) const;

  void handle_hello(Link& l, const HelloMsg& m, std::uint64_t now);
  void handle_pub(Link& l, const NotificationPtr& n, std::uint64_t now);
  void handle_lsa(Link& l, const LsaMsg& m, std::uint64_t now);
  void handle_subadv(Link& l, const SubAdvMsg& m);
  void handle_resume(const Link& l, const ResumeMsg& m);
  void handle_replay(const ReplayMsg& m, std::uint64_t now);
  void handle_replay_end(const ReplayEndMsg& m);
  void link_down(LinkId link, std::uint64_t now, bool close);

  void originate_lsa(std::uint64_t now);
  void topology_changed(std::uint64_t now);
  void start_recovery(const std::string& source, std::uint64_t now);
  void refresh_interest();
  void rebuild_index();

  void accept(const NotificationPtr& n, const std::string& arrival);
  void deliver_local(const NotificationPtr& n);
  void forward(const NotificationPtr& n, const std::string& arrival);
  const std::vector<SubscriptionFilter>& interest_for(const std::string& ingress,
                                                      const std::string& child);
  std::optional<std::string> child_toward_requester(const std::string& source,
                                                    const std::string& requester);
  void pump_clients();
  Session& session_ref(SessionId s);

  BrokerConfig cfg_;
  EventStore* store_;
  std::vector<Outbound> outbox_;

  std::map<LinkId, Link> links_;
  std::map<std::string, LinkId> neighbor_links_;
  std::map<SessionId, Session> sessions_;
  SessionId next_session_ = 1;

  TopologyView view_;
  InterestTable interest_;
  std::uint64_t lsa_seq_ = 0;
  std::uint64_t last_lsa_ = 0;
  std::set<std::string> hosted_;
  std::map<std::string, SourceState> sources_;
  std::uint64_t next_request_ = 1;
  std::map<std::string, std::unordered_map<std::string, DedupeWindow>> dedupe_;

  std::uint64_t cache_view_version_ = UINT64_MAX;
  std::uint64_t cache_interest_version_ = UINT64_MAX;
  std::map<std::string, SpanningTree> tree_cache_;
  std::map<std::pair<std::string, std::string>, std::vector<SubscriptionFilter>> interest_cache_;
  mutable std::uint64_t ingress_cache_version_ = UINT64_MAX;
  mutable std::unordered_map<std::string, std::optional<std::string>> ingress_cache_;

  std::unordered_map<SymbolKey, std::vector<IndexEntry>> by_symbol_;
  std::unordered_map<std::string_view, std::vector<IndexEntry>> by_prefix_;  // views into subs_
  std::size_t max_prefix_ = 0;
  std::uint64_t match_stamp_ = 0;
  std::vector<std::vector<IndexEntry>> unkeyed_;  // grouped by identical filter
  std::vector<std::pair<Session*, Qoi>> match_scratch_;

  BrokerStats stats_;
  std::uint64_t topology_changes_ = 0;
};

}  // namespace mdf
