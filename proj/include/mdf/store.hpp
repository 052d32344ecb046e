#pragma once

// Append-only event store. Records are addressed by a global offset equal to
// their append ordinal. On disk a store directory holds segment files
// (segment-NNNNNN.log, concatenated notification frames) and a MANIFEST text
// file with one "segment <id> <frames>" line per segment. The in-memory index
// is rebuilt from the segment files on open.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdf/bytes.hpp"
#include "mdf/filter.hpp"
#include "mdf/model.hpp"

namespace mdf {

struct StoreOptions {
  std::size_t segment_bytes = 64u << 20;
  std::optional<std::uint64_t> max_records;  // StoreFull beyond this
  bool flush_each_append = true;
};

class EventStore {
 public:
  // Memory-only store.
  explicit EventStore(StoreOptions opts = {});
  // Opens or creates a store directory. Throws Error on unreadable or corrupt
  // segments (a truncated trailing frame in the last segment is discarded).
  static std::unique_ptr<EventStore> open(const std::filesystem::path& dir, StoreOptions opts = {});

  ~EventStore();
  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  // Throws DuplicateKey on a repeated (source, seq), StoreFull when the
  // capacity is reached or the segment write fails.
  std::uint64_t append(const EventNotification& n);

  // Notifications in [from, to) matching f, in append order. Throws
  // RangeError unless from <= to <= end().
  std::vector<NotificationPtr> replay(const SubscriptionFilter& f, std::uint64_t from,
                                      std::uint64_t to) const;
  void replay(const SubscriptionFilter& f, std::uint64_t from, std::uint64_t to,
              const std::function<void(std::uint64_t, const NotificationPtr&)>& fn) const;

  std::optional<EventNotification> latest(const SymbolKey& s) const;

  // Stored notifications of `source` with seq > after_seq, ascending seq.
  std::vector<NotificationPtr> since(const std::string& source, std::uint64_t after_seq) const;
  std::optional<std::uint64_t> find(const std::string& source, std::uint64_t seq) const;

  std::uint64_t end() const;
  Bytes frame_bytes(std::uint64_t offset) const;
  std::size_t segment_count() const;
  const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

  void flush();

 private:
  struct Record {
    NotificationPtr n;
    std::uint32_t segment;
    std::size_t pos;
    std::size_t len;
  };
  struct Segment {
    std::uint32_t id;
    Bytes data;
    std::uint64_t frames = 0;
  };

  void index(NotificationPtr n, std::uint32_t segment, std::size_t pos, std::size_t len);
  void start_segment();
  void write_manifest() const;
  std::filesystem::path segment_path(std::uint32_t id) const;

  StoreOptions opts_;
  std::optional<std::filesystem::path> dir_;
  std::FILE* out_ = nullptr;

  mutable std::shared_mutex mu_;
  std::vector<Record> records_;
  std::vector<Segment> segments_;
  std::unordered_map<SymbolKey, std::vector<std::uint64_t>> by_symbol_;
  std::unordered_map<std::string, std::map<std::uint64_t, std::uint64_t>> by_source_;
};

}  // namespace mdf
