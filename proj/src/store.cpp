#include "mdf/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "mdf/codec.hpp"
#include "mdf/error.hpp"

namespace mdf {

namespace fs = std::filesystem;

namespace {

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::map<std::uint32_t, std::uint64_t> read_manifest(const fs::path& p) {
  std::map<std::uint32_t, std::uint64_t> out;
  std::ifstream in(p);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    std::uint32_t id = 0;
    std::uint64_t frames = 0;
    if (!(ls >> word >> id >> frames) || word != "segment")
      throw LineError("bad manifest entry", line_no);
    out[id] = frames;
  }
  return out;
}

}  // namespace

EventStore::EventStore(StoreOptions opts) : opts_(opts) { segments_.push_back(Segment{0, {}, 0}); }

EventStore::~EventStore() {
  if (out_) {
    std::fclose(out_);
    try {
      write_manifest();
    } catch (...) {
    }
  }
}

fs::path EventStore::segment_path(std::uint32_t id) const {
  char name[32];
  std::snprintf(name, sizeof name, "segment-%06u.log", id);
  return *dir_ / name;
}

std::unique_ptr<EventStore> EventStore::open(const fs::path& dir, StoreOptions opts) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create store directory " + dir.string() + ": " + ec.message());

  auto store = std::make_unique<EventStore>(opts);
  store->dir_ = dir;
  store->segments_.clear();

  std::map<std::uint32_t, std::uint64_t> listed;
  if (fs::exists(dir / "MANIFEST")) listed = read_manifest(dir / "MANIFEST");
  // Segments written after the last manifest update are found by scanning.
  for (const auto& entry : fs::directory_iterator(dir)) {
    unsigned id = 0;
    const auto name = entry.path().filename().string();
    if (std::sscanf(name.c_str(), "segment-%6u.log", &id) == 1 && name.size() == 18)
      listed.try_emplace(id, 0);
  }

  for (auto it = listed.begin(); it != listed.end(); ++it) {
    const auto id = it->first;
    Segment seg{id, read_file(store->segment_path(id)), 0};
    const bool last = std::next(it) == listed.end();
    store->segments_.push_back(std::move(seg));
    auto& data = store->segments_.back().data;
    const auto seg_index = static_cast<std::uint32_t>(store->segments_.size() - 1);
    std::size_t pos = 0;
    while (pos < data.size()) {
      try {
        auto [n, used] = decode_notification_at(data, pos);
        store->index(std::make_shared<const EventNotification>(std::move(n)), seg_index, pos, used);
        pos += used;
      } catch (const MalformedFrame& e) {
        if (!last) throw Error("corrupt segment " + std::to_string(id) + ": " + e.what());
        data.resize(pos);  // torn tail of the active segment
        fs::resize_file(store->segment_path(id), pos);
      }
    }
  }
  if (store->segments_.empty()) store->segments_.push_back(Segment{0, {}, 0});

  const auto& active = store->segments_.back();
  store->out_ = std::fopen(store->segment_path(active.id).c_str(), "ab");
  if (!store->out_) throw Error("cannot open segment for append: " + std::string(std::strerror(errno)));
  store->write_manifest();
  return store;
}

void EventStore::index(NotificationPtr n, std::uint32_t segment, std::size_t pos, std::size_t len) {
  const auto offset = static_cast<std::uint64_t>(records_.size());
  auto& seqs = by_source_[n->source];
  if (!seqs.emplace(n->seq, offset).second)
    throw DuplicateKey("duplicate (" + n->source + ", " + std::to_string(n->seq) + ")");
  by_symbol_[n->symbol].push_back(offset);
  segments_[segment].frames += 1;
  records_.push_back(Record{std::move(n), segment, pos, len});
}

void EventStore::start_segment() {
  const auto id = segments_.back().id + 1;
  if (out_) {
    std::fclose(out_);
    out_ = std::fopen(segment_path(id).c_str(), "ab");
    if (!out_) throw StoreFull("cannot open new segment: " + std::string(std::strerror(errno)));
  }
  segments_.push_back(Segment{id, {}, 0});
  if (dir_) write_manifest();
}

void EventStore::write_manifest() const {
  if (!dir_) return;
  const auto tmp = *dir_ / "MANIFEST.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& s : segments_) out << "segment " << s.id << ' ' << s.frames << '\n';
    if (!out) throw Error("cannot write manifest");
  }
  fs::rename(tmp, *dir_ / "MANIFEST");
}

std::uint64_t EventStore::append(const EventNotification& n) {
  Bytes frame = encode_notification(n);
  std::unique_lock lock(mu_);
  if (opts_.max_records && records_.size() >= *opts_.max_records)
    throw StoreFull("store capacity of " + std::to_string(*opts_.max_records) + " records reached");
  if (auto it = by_source_.find(n.source); it != by_source_.end() && it->second.count(n.seq))
    throw DuplicateKey("duplicate (" + n.source + ", " + std::to_string(n.seq) + ")");

  if (!segments_.back().data.empty() &&
      segments_.back().data.size() + frame.size() > opts_.segment_bytes)
    start_segment();

  auto& seg = segments_.back();
  if (out_) {
    if (std::fwrite(frame.data(), 1, frame.size(), out_) != frame.size() ||
        (opts_.flush_each_append && std::fflush(out_) != 0))
      throw StoreFull("segment write failed: " + std::string(std::strerror(errno)));
  }
  const auto pos = seg.data.size();
  seg.data.insert(seg.data.end(), frame.begin(), frame.end());
  const auto offset = static_cast<std::uint64_t>(records_.size());
  index(std::make_shared<const EventNotification>(n),
        static_cast<std::uint32_t>(segments_.size() - 1), pos, frame.size());
  return offset;
}

void EventStore::replay(const SubscriptionFilter& f, std::uint64_t from, std::uint64_t to,
                        const std::function<void(std::uint64_t, const NotificationPtr&)>& fn) const {
  std::shared_lock lock(mu_);
  if (from > to || to > records_.size())
    throw RangeError("replay range [" + std::to_string(from) + ", " + std::to_string(to) +
                     ") outside [0, " + std::to_string(records_.size()) + "]");
  if (const auto* set = f.symbol_set(); set && set->symbols.size() <= 16) {
    // Walk the per-symbol index instead of scanning the range.
    std::vector<std::uint64_t> hits;
    for (const auto& s : set->symbols) {
      auto it = by_symbol_.find(s);
      if (it == by_symbol_.end()) continue;
      auto lo = std::lower_bound(it->second.begin(), it->second.end(), from);
      auto hi = std::lower_bound(lo, it->second.end(), to);
      hits.insert(hits.end(), lo, hi);
    }
    std::sort(hits.begin(), hits.end());
    for (auto off : hits)
      if (filter_matches(f, *records_[off].n)) fn(off, records_[off].n);
    return;
  }
  for (auto off = from; off < to; ++off)
    if (filter_matches(f, *records_[off].n)) fn(off, records_[off].n);
}

std::vector<NotificationPtr> EventStore::replay(const SubscriptionFilter& f, std::uint64_t from,
                                                std::uint64_t to) const {
  std::vector<NotificationPtr> out;
  replay(f, from, to, [&](std::uint64_t, const NotificationPtr& n) { out.push_back(n); });
  return out;
}

std::optional<EventNotification> EventStore::latest(const SymbolKey& s) const {
  std::shared_lock lock(mu_);
  auto it = by_symbol_.find(s);
  if (it == by_symbol_.end() || it->second.empty()) return std::nullopt;
  return *records_[it->second.back()].n;
}

std::vector<NotificationPtr> EventStore::since(const std::string& source,
                                               std::uint64_t after_seq) const {
  std::shared_lock lock(mu_);
  std::vector<NotificationPtr> out;
  auto it = by_source_.find(source);
  if (it == by_source_.end()) return out;
  for (auto s = it->second.upper_bound(after_seq); s != it->second.end(); ++s)
    out.push_back(records_[s->second].n);
  return out;
}

std::optional<std::uint64_t> EventStore::find(const std::string& source, std::uint64_t seq) const {
  std::shared_lock lock(mu_);
  auto it = by_source_.find(source);
  if (it == by_source_.end()) return std::nullopt;
  auto s = it->second.find(seq);
  if (s == it->second.end()) return std::nullopt;
  return s->second;
}

std::uint64_t EventStore::end() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

Bytes EventStore::frame_bytes(std::uint64_t offset) const {
  std::shared_lock lock(mu_);
  if (offset >= records_.size()) throw RangeError("offset " + std::to_string(offset) + " past end");
  const auto& r = records_[offset];
  const auto& data = segments_[r.segment].data;
  return Bytes(data.begin() + static_cast<std::ptrdiff_t>(r.pos),
               data.begin() + static_cast<std::ptrdiff_t>(r.pos + r.len));
}

std::size_t EventStore::segment_count() const {
  std::shared_lock lock(mu_);
  return segments_.size();
}

void EventStore::flush() {
  std::unique_lock lock(mu_);
  if (out_) std::fflush(out_);
  write_manifest();
}

}  // namespace mdf
