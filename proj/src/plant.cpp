#include "mdf/plant.hpp"

#include "mdf/error.hpp"

namespace mdf {

TickerPlant::TickerPlant(Broker& broker, EventStore* store, PlantOptions opts)
    : broker_(broker), store_(store), opts_(std::move(opts)), enricher_(opts_.rules) {
  if (opts_.publish_derived) broker_.host_source(std::string(kDerivedSource));
}

bool TickerPlant::ingest(const EventNotification& n, std::uint64_t now_ms) {
  if (store_ && store_->find(n.source, n.seq)) {
    ++duplicates_;
    return false;
  }
  auto out = enricher_.apply(n);
  publish(out.enriched, now_ms);
  if (opts_.publish_derived) {
    for (const auto& d : out.derived_notifications) {
      publish(d, now_ms);
      ++derived_;
    }
  }
  return true;
}

void TickerPlant::publish(const EventNotification& n, std::uint64_t now_ms) {
  if (store_) store_->append(n);
  if (on_publish) on_publish(n);
  broker_.publish_local(n, now_ms);
  ++published_;
}

}  // namespace mdf
