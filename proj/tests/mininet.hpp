#pragma once

// Zero-latency in-process broker network for unit tests. Every frame goes
// through the wire codec; delivery is global FIFO.

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <tuple>

#include "mdf/broker.hpp"
#include "mdf/store.hpp"
#include "mdf/wire.hpp"

namespace mdf::testing {

class MiniNet {
 public:
  Broker& add(const std::string& id, const std::string& site = "S1", bool with_store = false) {
    BrokerConfig cfg;
    cfg.id = id;
    cfg.site = site;
    EventStore* store = nullptr;
    if (with_store) store = stores_.emplace(id, std::make_unique<EventStore>()).first->second.get();
    auto& b = brokers_.emplace(id, std::make_unique<Broker>(cfg, store)).first->second;
    return *b;
  }
  Broker& operator[](const std::string& id) { return *brokers_.at(id); }
  EventStore* store(const std::string& id) { return stores_.count(id) ? stores_[id].get() : nullptr; }

  void connect(const std::string& a, const std::string& b, std::uint32_t latency = 1) {
    const LinkId la = next_link_++, lb = next_link_++;
    ends_[{a, la}] = {b, lb};
    ends_[{b, lb}] = {a, la};
    (*this)[a].on_connect(la, latency, now);
    (*this)[b].on_connect(lb, latency, now);
    pump();
  }

  // Silently cuts the a-b link: frames in either direction are lost.
  void cut(const std::string& a, const std::string& b) {
    for (auto it = ends_.begin(); it != ends_.end();) {
      const auto& [self, other] = *it;
      if ((self.first == a && other.first == b) || (self.first == b && other.first == a))
        it = ends_.erase(it);
      else
        ++it;
    }
  }

  void tick(std::uint64_t ms) {
    for (std::uint64_t t = 0; t < ms; t += 100) {
      now += 100;
      for (auto& [_, b] : brokers_) b->on_timer(now);
      pump();
    }
  }

  void pump() {
    for (;;) {
      for (auto& [id, b] : brokers_)
        for (auto& o : b->take_outbox()) {
          auto end = ends_.find({id, o.link});
          if (end == ends_.end()) continue;
          if (o.close) {
            auto [peer, plink] = end->second;
            ends_.erase(end);
            ends_.erase({peer, plink});
            (*this)[peer].on_disconnect(plink, now);
            continue;
          }
          auto bytes = encode_message(*o.msg);
          if (kind_of(*o.msg) == FrameKind::Pub) ++pub_crossings[{id, end->second.first}];
          queue_.emplace_back(end->second.first, end->second.second, std::move(bytes));
        }
      if (queue_.empty()) return;
      auto [to, link, bytes] = std::move(queue_.front());
      queue_.pop_front();
      if (!ends_.count({to, link})) continue;
      (*this)[to].on_frame(link, decode_message(bytes), now);
    }
  }

  std::uint64_t now = 0;
  std::map<std::pair<std::string, std::string>, std::uint64_t> pub_crossings;

 private:
  std::map<std::string, std::unique_ptr<Broker>> brokers_;
  std::map<std::string, std::unique_ptr<EventStore>> stores_;
  std::map<std::pair<std::string, LinkId>, std::pair<std::string, LinkId>> ends_;
  std::deque<std::tuple<std::string, LinkId, Bytes>> queue_;
  LinkId next_link_ = 1;
};

inline EventNotification make_trade(const std::string& source, std::uint64_t seq,
                                    const std::string& symbol, const char* px = "10.0000") {
  EventNotification n;
  n.source = source;
  n.seq = seq;
  n.symbol = SymbolKey::of(symbol);
  n.event_type = EventType::Trade;
  n.instrument_class = InstrumentClass::Equity;
  n.price = Price::parse(px);
  n.size = 100;
  n.source_ts_ms = 1'700'000'000'000 + seq;
  n.ingest_ts_ms = n.source_ts_ms;
  return n;
}

}  // namespace mdf::testing
