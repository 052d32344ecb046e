#pragma once

// Ticker plant composition: validated feed events are enriched, appended to
// the event store and handed to the local broker.

#include <cstdint>
#include <functional>

#include "mdf/broker.hpp"
#include "mdf/enrich.hpp"
#include "mdf/store.hpp"

namespace mdf {

struct PlantOptions {
  RuleSet rules;
  // Publish derived events on the DERIVED source. Only one plant in a broker
  // network may do so, since the source name is shared.
  bool publish_derived = false;
};

class TickerPlant {
 public:
  TickerPlant(Broker& broker, EventStore* store, PlantOptions opts = {});

  // Returns false when (source, seq) is already stored.
  bool ingest(const EventNotification& n, std::uint64_t now_ms);

  const Enricher& enricher() const noexcept { return enricher_; }
  std::uint64_t published() const noexcept { return published_; }
  std::uint64_t duplicates() const noexcept { return duplicates_; }
  std::uint64_t derived() const noexcept { return derived_; }

  // Called with every notification handed to the broker.
  std::function<void(const EventNotification&)> on_publish;

 private:
  void publish(const EventNotification& n, std::uint64_t now_ms);

  Broker& broker_;
  EventStore* store_;
  PlantOptions opts_;
  Enricher enricher_;
  std::uint64_t published_ = 0;
  std::uint64_t duplicates_ = 0;
  std::uint64_t derived_ = 0;
};

}  // namespace mdf
