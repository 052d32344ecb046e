#include "mdf/simnet.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <queue>

#include "mdf/broker.hpp"
#include "mdf/feedpipe.hpp"
#include "mdf/plant.hpp"
#include "mdf/store.hpp"
#include "mdf/synth.hpp"

namespace mdf::sim {

namespace {

constexpr std::uint64_t kTickMs = 100;
constexpr std::uint64_t kReconnectMs = 1000;
constexpr std::uint64_t kQuietMs = 4000;
constexpr std::uint64_t kMaxOvertimeMs = 120'000;
constexpr std::uint64_t kBackpressureRetryMs = 10;

struct Node {
  const BrokerSpec* spec = nullptr;
  std::unique_ptr<EventStore> store;
  std::unique_ptr<Broker> broker;
  std::unique_ptr<TickerPlant> plant;
  bool alive = true;
  std::vector<Edge> edges;
};

struct Conn {
  std::size_t link = 0;  // scenario link index
  std::string end[2];
  LinkId ids[2] = {0, 0};
  std::uint64_t free_us[2] = {0, 0};  // serializer: earliest next departure
  bool open = true;
};

struct FeedState {
  const FeedSpec* spec = nullptr;
  std::unique_ptr<SyntheticFeed> gen;
  std::unique_ptr<FeedHandler> handler;
  std::uint64_t next_us = 0;
};

struct SubState {
  const SubSpec* spec = nullptr;
  std::optional<SessionId> session;
  bool closed = false;
  std::uint64_t tokens = 0;  // drain allowance in 1/1000 notifications
  SessionStats stats;
  std::uint64_t log_delivered = 0;
  std::vector<std::uint64_t> latencies;
};

struct QueuedEvent {
  std::uint64_t t;
  std::uint64_t seq;
  std::function<void()> fn;
  bool operator>(const QueuedEvent& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

std::uint64_t mix_seed(std::uint64_t feed_seed, std::uint64_t master) {
  if (master == 0) return feed_seed;
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return feed_seed ^ (z ^ (z >> 31));
}

class Simulation {
 public:
  explicit Simulation(const Scenario& sc) : sc_(sc) {}
  ~Simulation() {
    nodes_.clear();
    std::error_code ec;
    if (!tmp_root_.empty()) std::filesystem::remove_all(tmp_root_, ec);
  }

  RunResult run() {
    setup();
    while (!queue_.empty() && !finished_) {
      auto ev = std::move(const_cast<QueuedEvent&>(queue_.top()));
      queue_.pop();
      now_ = ev.t;
      ev.fn();
    }
    finish();
    RunResult r;
    r.report = build_report();
    r.log = std::move(log_);
    r.report.violations = verify(r.report, sc_, r.log);
    for (auto& s : r.report.subs) {
      if (s.qoi != Qoi::Complete) continue;
      const auto prefix = "sub=" + s.id + " ";
      s.complete = std::none_of(r.report.violations.begin(), r.report.violations.end(),
                                [&](const auto& v) { return v.rfind(prefix, 0) == 0; });
    }
    return r;
  }

 private:
  void at(std::uint64_t t, std::function<void()> fn) {
    queue_.push(QueuedEvent{std::max(t, now_), next_event_++, std::move(fn)});
  }

  void log(const std::string& line) {
    log_ += "t=" + std::to_string(now_) + " " + line + "\n";
  }

  void activity(std::uint64_t t) { last_activity_ = std::max(last_activity_, t); }

  std::unique_ptr<EventStore> make_store(const BrokerSpec& b) {
    switch (b.store) {
      case StoreKind::None:
        return nullptr;
      case StoreKind::Memory:
        return std::make_unique<EventStore>();
      case StoreKind::Directory: {
        if (tmp_root_.empty()) {
          static std::atomic<unsigned> counter{0};
          tmp_root_ = std::filesystem::temp_directory_path() /
                      ("mdf-simnet-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
          std::filesystem::remove_all(tmp_root_);
        }
        StoreOptions opts;
        opts.flush_each_append = false;
        return EventStore::open(tmp_root_ / b.id, opts);
      }
    }
    return nullptr;
  }

  void setup() {
    for (const auto& b : sc_.brokers) {
      auto& n = nodes_[b.id];
      n.spec = &b;
      n.store = make_store(b);
      BrokerConfig cfg;
      cfg.id = b.id;
      cfg.site = b.site;
      n.broker = std::make_unique<Broker>(cfg, n.store.get());
      n.plant = std::make_unique<TickerPlant>(*n.broker, n.store.get());
      n.edges = n.broker->view().edges();
      const std::string id = b.id;
      n.plant->on_publish = [this, id](const EventNotification& e) { on_publish(id, e); };
      n.broker->on_topology_change = [this, id](std::uint64_t) { on_topology(id); };
      n.broker->on_superseded = [this, id](SessionId s, const EventNotification& old) {
        auto it = session_owner_.find({id, s});
        if (it == session_owner_.end()) return;
        log("DROP_SUPERSEDED sub=" + subs_[it->second].spec->id + " source=" + old.source +
            " seq=" + std::to_string(old.seq) + " symbol=" + old.symbol.str());
      };
    }
    admin_up_.assign(sc_.links.size(), true);
    current_conn_.assign(sc_.links.size(), std::nullopt);
    for (std::size_t i = 0; i < sc_.links.size(); ++i) connect(i);

    for (const auto& f : sc_.feeds) {
      auto& st = feeds_.emplace_back();
      st.spec = &f;
      SyntheticFeedParams p;
      p.source = f.source;
      p.symbol_count = f.symbols;
      p.seed = mix_seed(f.seed, sc_.seed);
      p.trade_pct = f.trade_pct;
      p.market = f.market;
      st.gen = std::make_unique<SyntheticFeed>(p);
      FeedConfig cfg;
      cfg.feed_id = f.id;
      cfg.expected_source = f.source;
      const std::string broker = f.broker;
      const std::string feed_id = f.id;
      st.handler = std::make_unique<FeedHandler>(
          cfg, [this] { return now_; },
          [this, broker](EventNotification n) {
            auto& node = nodes_.at(broker);
            if (node.alive) node.plant->ingest(n, now_);
          },
          [this, feed_id](const RejectReason& r, std::uint64_t) {
            log("REJECT feed=" + feed_id + " reason=" + std::string(to_string(r.code)));
          });
      nodes_.at(f.broker).broker->host_source(f.source, 0);
      flush(f.broker);
      st.next_us = f.start_ms * 1000;
      const std::size_t idx = feeds_.size() - 1;
      at(f.start_ms, [this, idx] { feed_step(idx); });
    }

    for (const auto& s : sc_.subs) {
      auto& st = subs_.emplace_back();
      st.spec = &s;
      const std::size_t idx = subs_.size() - 1;
      at(s.start_ms, [this, idx] { sub_start(idx); });
      if (s.stop_ms) at(*s.stop_ms, [this, idx] { sub_close(idx, false, true); });
    }

    for (const auto& e : sc_.events) {
      last_fault_ = std::max(last_fault_, e.t_ms);
      at(e.t_ms, [this, &e] { fault(e); });
    }

    at(0, [this] { tick(); });
  }

  // --- links ---

  std::pair<std::size_t, int> end_of(const std::string& node, LinkId id) const {
    auto it = ends_.find({node, id});
    if (it == ends_.end()) return {SIZE_MAX, 0};
    return it->second;
  }

  void connect(std::size_t link) {
    const auto& ls = sc_.links[link];
    if (!admin_up_[link] || !nodes_.at(ls.a).alive || !nodes_.at(ls.b).alive) return;
    if (current_conn_[link] && conns_[*current_conn_[link]].open) return;
    Conn c;
    c.link = link;
    c.end[0] = ls.a;
    c.end[1] = ls.b;
    c.ids[0] = next_link_id_++;
    c.ids[1] = next_link_id_++;
    const auto ci = conns_.size();
    conns_.push_back(c);
    current_conn_[link] = ci;
    ends_[{ls.a, c.ids[0]}] = {ci, 0};
    ends_[{ls.b, c.ids[1]}] = {ci, 1};
    log("CONNECT a=" + ls.a + " b=" + ls.b);
    activity(now_);
    for (int side = 0; side < 2; ++side) {
      auto& n = nodes_.at(c.end[side]);
      n.broker->on_connect(c.ids[side], ls.latency_ms, now_);
    }
    flush(ls.a);
    flush(ls.b);
  }

  void close_conn(std::size_t ci, bool notify, const std::string& closer) {
    auto& c = conns_[ci];
    if (!c.open) return;
    c.open = false;
    if (!notify) return;
    log("LINK_CLOSE a=" + c.end[0] + " b=" + c.end[1] + " by=" + closer);
    for (int side = 0; side < 2; ++side) {
      auto& n = nodes_.at(c.end[side]);
      if (c.end[side] == closer || !n.alive) continue;
      n.broker->on_disconnect(c.ids[side], now_);
      flush(c.end[side]);
    }
    const auto link = c.link;
    at(now_ + kReconnectMs, [this, link] { connect(link); });
  }

  void flush(const std::string& id) {
    auto& n = nodes_.at(id);
    if (!n.alive) return;
    for (auto& o : n.broker->take_outbox()) transmit(id, std::move(o));
  }

  void transmit(const std::string& from, Outbound o) {
    auto [ci, side] = end_of(from, o.link);
    if (ci == SIZE_MAX || !conns_[ci].open) return;
    if (o.close) return close_conn(ci, true, from);

    auto& c = conns_[ci];
    const auto& ls = sc_.links[c.link];
    const auto kind = kind_of(*o.msg);
    auto bytes = std::make_shared<Bytes>(encode_message(*o.msg));
    std::uint64_t depart = std::max(now_ * 1000, c.free_us[side]);
    if (ls.bandwidth_mps) c.free_us[side] = depart + 1'000'000 / ls.bandwidth_mps;
    const std::uint64_t arrive = (depart + 999) / 1000 + ls.latency_ms;

    const std::string& to = c.end[1 - side];
    std::string line = "XMIT from=" + from + " to=" + to + " kind=" + to_string(kind);
    if (const auto* p = std::get_if<PubMsg>(&*o.msg))
      line += " source=" + p->n->source + " seq=" + std::to_string(p->n->seq);
    else if (const auto* r = std::get_if<ReplayMsg>(&*o.msg))
      line += " source=" + r->n->source + " seq=" + std::to_string(r->n->seq);
    log(line);
    ++frames_[c.link][kind];
    if (kind != FrameKind::Heartbeat && kind != FrameKind::Lsa) activity(arrive);

    const LinkId dest_link = c.ids[1 - side];
    at(arrive, [this, ci = ci, to, dest_link, bytes] {
      if (!conns_[ci].open) return;
      auto& n = nodes_.at(to);
      if (!n.alive) return;
      n.broker->on_frame(dest_link, decode_message(*bytes), now_);
      flush(to);
    });
  }

  // --- observation ---

  void on_publish(const std::string& broker, const EventNotification& e) {
    published_at_[{e.source, e.seq}] = now_;
    ++published_;
    activity(now_);
    log("PUBLISH broker=" + broker + " source=" + e.source + " seq=" + std::to_string(e.seq) +
        " symbol=" + e.symbol.str() + " type=" + std::string(to_string(e.event_type)) + " class=" +
        std::string(to_string(e.instrument_class.value_or(InstrumentClass::Other))));
  }

  void on_topology(const std::string& id) {
    auto& n = nodes_.at(id);
    auto edges = n.broker->view().edges();
    if (edges == n.edges) return;
    n.edges = std::move(edges);
    topo_times_.push_back(now_);
    activity(now_);
    log("TOPOLOGY broker=" + id + " edges=" + std::to_string(n.edges.size()));
  }

  // --- drivers ---

  void tick() {
    for (auto& [id, n] : nodes_) {
      if (!n.alive) continue;
      n.broker->on_timer(now_);
      flush(id);
    }
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      auto& s = subs_[i];
      if (!s.session || s.closed || s.spec->drain == 0) continue;
      s.tokens += std::uint64_t{s.spec->drain} * kTickMs;
      const auto n = s.tokens / 1000;
      s.tokens %= 1000;
      if (n) drain(i, n);
    }
    if (now_ >= sc_.end_ms && now_ > last_fault_ &&
        (now_ >= last_activity_ + kQuietMs || now_ >= sc_.end_ms + kMaxOvertimeMs)) {
      finished_ = true;
      return;
    }
    at(now_ + kTickMs, [this] { tick(); });
  }

  void feed_step(std::size_t idx) {
    auto& f = feeds_[idx];
    auto& node = nodes_.at(f.spec->broker);
    if (!node.alive || now_ >= sc_.end_ms || (f.spec->stop_ms && now_ >= *f.spec->stop_ms)) return;
    if (node.broker->backpressured()) {
      at(now_ + kBackpressureRetryMs, [this, idx] { feed_step(idx); });
      return;
    }
    auto raw = f.gen->next(now_);
    if (f.spec->bad_pct && f.gen->rng().percent(f.spec->bad_pct)) spoil(raw);
    f.handler->feed_text(format_text_line(raw) + "\n");
    flush(f.spec->broker);
    f.next_us += 1'000'000 / f.spec->rate;
    at(f.next_us / 1000, [this, idx] { feed_step(idx); });
  }

  // Turns a valid event into one the feed handler must reject.
  static void spoil(RawFeedEvent& e) {
    if (e.event_type == EventType::Trade) {
      e.price = Price::from_ticks(0);
    } else if (e.event_type == EventType::Quote && e.bid && e.ask && *e.bid < *e.ask) {
      std::swap(e.bid, e.ask);
    } else {
      e.symbol = "bad symbol";
    }
  }

  void sub_start(std::size_t idx) {
    auto& s = subs_[idx];
    auto& node = nodes_.at(s.spec->broker);
    if (!node.alive || s.closed) return;
    s.session = node.broker->open_session();
    session_owner_[{s.spec->broker, *s.session}] = idx;
    log("SUBSCRIBE sub=" + s.spec->id + " broker=" + s.spec->broker +
        " qoi=" + std::string(to_string(s.spec->qoi)));
    node.broker->subscribe(*s.session, Subscription{1, s.spec->filter, s.spec->qoi});
    activity(now_);
    flush(s.spec->broker);
  }

  void drain(std::size_t idx, std::size_t max) {
    auto& s = subs_[idx];
    auto& node = nodes_.at(s.spec->broker);
    const bool dup = sc_.duplicate_delivery_bug.count(s.spec->id) != 0;
    for (const auto& n : node.broker->drain(*s.session, max)) {
      const std::string line = "DELIVER sub=" + s.spec->id + " source=" + n->source +
                               " seq=" + std::to_string(n->seq) + " symbol=" + n->symbol.str();
      for (int copies = dup ? 2 : 1; copies > 0; --copies) {
        log(line);
        ++s.log_delivered;
        auto it = published_at_.find({n->source, n->seq});
        s.latencies.push_back(it == published_at_.end() ? 0 : now_ - it->second);
      }
    }
    flush(s.spec->broker);
  }

  void sub_close(std::size_t idx, bool crashed, bool drain_first) {
    auto& s = subs_[idx];
    if (s.closed) return;
    s.closed = true;
    if (!s.session) return;
    auto& node = nodes_.at(s.spec->broker);
    if (drain_first) drain(idx, SIZE_MAX);
    s.stats = node.broker->session(*s.session).stats();
    log("UNSUBSCRIBE sub=" + s.spec->id + (crashed ? " reason=crash" : ""));
    if (!crashed) {
      node.broker->close_session(*s.session);
      flush(s.spec->broker);
    }
  }

  void fault(const TimedEvent& e) {
    activity(now_);
    if (e.kind == FaultKind::Crash) {
      auto& n = nodes_.at(e.a);
      if (!n.alive) return;
      log("CRASH broker=" + e.a);
      fault_log_.push_back({now_, "crash:" + e.a});
      for (std::size_t i = 0; i < subs_.size(); ++i)
        if (subs_[i].spec->broker == e.a) sub_close(i, true, false);
      for (std::size_t ci = 0; ci < conns_.size(); ++ci)
        if (conns_[ci].open && (conns_[ci].end[0] == e.a || conns_[ci].end[1] == e.a))
          close_conn(ci, false, e.a);
      n.alive = false;
      n.plant.reset();
      n.broker.reset();
      n.store.reset();
      return;
    }
    std::size_t link = SIZE_MAX;
    for (std::size_t i = 0; i < sc_.links.size(); ++i) {
      const auto& l = sc_.links[i];
      if ((l.a == e.a && l.b == e.b) || (l.a == e.b && l.b == e.a)) link = i;
    }
    const auto& ls = sc_.links[link];
    if (e.kind == FaultKind::LinkDown) {
      log("LINK_DOWN a=" + ls.a + " b=" + ls.b);
      fault_log_.push_back({now_, "link_down:" + ls.a + ":" + ls.b});
      admin_up_[link] = false;
      if (current_conn_[link]) close_conn(*current_conn_[link], false, std::string());
    } else {
      log("LINK_UP a=" + ls.a + " b=" + ls.b);
      fault_log_.push_back({now_, "link_up:" + ls.a + ":" + ls.b});
      admin_up_[link] = true;
      connect(link);
    }
  }

  void finish() {
    quiesced_at_ = now_;
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      auto& s = subs_[i];
      if (!s.session || s.closed) continue;
      drain(i, SIZE_MAX);
      s.stats = nodes_.at(s.spec->broker).broker->session(*s.session).stats();
    }
  }

  MetricsReport build_report() const {
    MetricsReport r;
    r.end_ms = sc_.end_ms;
    r.quiesced_ms = quiesced_at_;
    r.published = published_;
    std::map<std::string, std::string> site;
    for (const auto& b : sc_.brokers) site[b.id] = b.site;
    for (std::size_t i = 0; i < sc_.links.size(); ++i) {
      LinkReport l;
      l.a = std::min(sc_.links[i].a, sc_.links[i].b);
      l.b = std::max(sc_.links[i].a, sc_.links[i].b);
      l.inter_site = site[l.a] != site[l.b];
      if (auto it = frames_.find(i); it != frames_.end()) l.frames = it->second;
      const auto pubs = l.frames.count(FrameKind::Pub) ? l.frames.at(FrameKind::Pub) : 0;
      r.pub_crossings += pubs;
      if (l.inter_site) r.inter_site_pub_crossings += pubs;
      if (l.frames.count(FrameKind::Replay)) r.replay_crossings += l.frames.at(FrameKind::Replay);
      r.links.push_back(std::move(l));
    }
    for (const auto& f : feeds_) {
      const auto& st = f.handler->stats();
      r.feeds.push_back(FeedReport{f.spec->id, f.spec->source, st.parsed, st.accepted, st.rejected});
    }
    for (const auto& s : subs_) {
      SubReport sr;
      sr.id = s.spec->id;
      sr.broker = s.spec->broker;
      sr.qoi = s.spec->qoi;
      sr.matched = s.stats.matched;
      sr.delivered = s.log_delivered;
      sr.dropped_superseded = s.stats.dropped_superseded;
      auto lat = s.latencies;
      std::sort(lat.begin(), lat.end());
      if (!lat.empty()) {
        sr.latency_p50_ms = lat[(lat.size() - 1) * 50 / 100];
        sr.latency_p99_ms = lat[(lat.size() - 1) * 99 / 100];
      }
      r.delivered += sr.delivered;
      r.subs.push_back(std::move(sr));
    }
    for (std::size_t i = 0; i < fault_log_.size(); ++i) {
      const auto t = fault_log_[i].first;
      const auto until = i + 1 < fault_log_.size() ? fault_log_[i + 1].first : UINT64_MAX;
      std::uint64_t last = t;
      for (auto tt : topo_times_)
        if (tt >= t && tt < until) last = std::max(last, tt);
      r.faults.push_back(FaultReport{t, fault_log_[i].second, last - t});
    }
    return r;
  }

  const Scenario& sc_;
  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
  std::uint64_t next_event_ = 0;
  std::uint64_t now_ = 0;
  bool finished_ = false;
  std::uint64_t last_activity_ = 0;
  std::uint64_t last_fault_ = 0;
  std::uint64_t quiesced_at_ = 0;
  std::string log_;

  std::map<std::string, Node> nodes_;
  std::vector<Conn> conns_;
  std::map<std::pair<std::string, LinkId>, std::pair<std::size_t, int>> ends_;
  std::vector<bool> admin_up_;
  std::vector<std::optional<std::size_t>> current_conn_;
  LinkId next_link_id_ = 1;
  std::map<std::size_t, std::map<FrameKind, std::uint64_t>> frames_;

  std::vector<FeedState> feeds_;
  std::vector<SubState> subs_;
  std::map<std::pair<std::string, SessionId>, std::size_t> session_owner_;
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> published_at_;
  std::uint64_t published_ = 0;
  std::vector<std::uint64_t> topo_times_;
  std::vector<std::pair<std::uint64_t, std::string>> fault_log_;
  std::filesystem::path tmp_root_;
};

}  // namespace

RunResult run(const Scenario& scenario) { return Simulation(scenario).run(); }

}  // namespace mdf::sim
