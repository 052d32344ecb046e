#include "mdf/wire.hpp"

#include "mdf/codec.hpp"
#include "mdf/error.hpp"

namespace mdf {

const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Hello: return "HELLO";
    case FrameKind::Sub: return "SUB";
    case FrameKind::Unsub: return "UNSUB";
    case FrameKind::Pub: return "PUB";
    case FrameKind::Lsa: return "LSA";
    case FrameKind::SubAdv: return "SUBADV";
    case FrameKind::Heartbeat: return "HEARTBEAT";
    case FrameKind::Credit: return "CREDIT";
    case FrameKind::Resume: return "RESUME";
    case FrameKind::Replay: return "REPLAY";
    case FrameKind::ReplayEnd: return "REPLAY_END";
  }
  return "?";
}

const char* to_string(PeerKind k) {
  switch (k) {
    case PeerKind::Client: return "CLIENT";
    case PeerKind::Broker: return "NEIGHBOR_BROKER";
    case PeerKind::Feed: return "FEED";
  }
  return "?";
}

FrameKind kind_of(const Message& m) { return static_cast<FrameKind>(m.index() + 1); }

namespace {

void put_filters(ByteWriter& w, const std::vector<SubscriptionFilter>& fs) {
  if (fs.size() > 0xFFFF) throw Error("too many filters in one frame");
  w.u16(static_cast<std::uint16_t>(fs.size()));
  for (const auto& f : fs) w.blob16(encode_filter(f));
}

std::vector<SubscriptionFilter> get_filters(ByteReader& r) {
  std::vector<SubscriptionFilter> out(r.u16());
  for (auto& f : out) f = decode_filter(r.blob16());
  return out;
}

NotificationPtr get_notification(ByteReader& r) {
  auto rest = r.take(r.remaining());
  return std::make_shared<const EventNotification>(decode_notification(rest));
}

struct Encoder {
  ByteWriter& w;
  void operator()(const HelloMsg& m) {
    w.str8(m.node_id);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.str8(m.site);
  }
  void operator()(const SubMsg& m) {
    w.u64(m.sub_id);
    w.u8(static_cast<std::uint8_t>(m.qoi));
    w.blob16(encode_filter(m.filter));
  }
  void operator()(const UnsubMsg& m) { w.u64(m.sub_id); }
  void operator()(const PubMsg& m) { w.raw(encode_notification(*m.n)); }
  void operator()(const LsaMsg& m) {
    w.str8(m.origin);
    w.u64(m.lsa_seq);
    w.str8(m.site);
    w.u16(static_cast<std::uint16_t>(m.neighbors.size()));
    for (const auto& nb : m.neighbors) {
      w.str8(nb.id);
      w.u32(nb.latency_ms);
    }
    w.u16(static_cast<std::uint16_t>(m.sources.size()));
    for (const auto& s : m.sources) w.str8(s);
  }
  void operator()(const SubAdvMsg& m) {
    w.str8(m.origin);
    w.u64(m.advert_seq);
    put_filters(w, m.filters);
  }
  void operator()(const HeartbeatMsg& m) { w.u64(m.ts_ms); }
  void operator()(const CreditMsg& m) { w.u32(m.n); }
  void operator()(const ResumeMsg& m) {
    w.u64(m.request_id);
    w.str8(m.requester);
    w.str8(m.source);
    w.u64(m.after_seq);
    put_filters(w, m.filters);
  }
  void operator()(const ReplayMsg& m) {
    w.u64(m.request_id);
    w.str8(m.requester);
    w.raw(encode_notification(*m.n));
  }
  void operator()(const ReplayEndMsg& m) {
    w.u64(m.request_id);
    w.str8(m.requester);
    w.str8(m.source);
    w.u64(m.last_seq);
  }
};

Message decode_body(FrameKind kind, ByteReader& r) {
  switch (kind) {
    case FrameKind::Hello: {
      HelloMsg m;
      m.node_id = r.str8();
      auto k = r.u8();
      if (k < 1 || k > 3) throw MalformedFrame("bad peer kind", r.offset() - 1);
      m.kind = static_cast<PeerKind>(k);
      m.site = r.str8();
      return m;
    }
    case FrameKind::Sub: {
      SubMsg m;
      m.sub_id = r.u64();
      auto q = r.u8();
      if (q < 1 || q > 2) throw MalformedFrame("bad qoi", r.offset() - 1);
      m.qoi = static_cast<Qoi>(q);
      m.filter = decode_filter(r.blob16());
      return m;
    }
    case FrameKind::Unsub: return UnsubMsg{r.u64()};
    case FrameKind::Pub: return PubMsg{get_notification(r)};
    case FrameKind::Lsa: {
      LsaMsg m;
      m.origin = r.str8();
      m.lsa_seq = r.u64();
      m.site = r.str8();
      m.neighbors.resize(r.u16());
      for (auto& nb : m.neighbors) {
        nb.id = r.str8();
        nb.latency_ms = r.u32();
      }
      m.sources.resize(r.u16());
      for (auto& s : m.sources) s = r.str8();
      return m;
    }
    case FrameKind::SubAdv: {
      SubAdvMsg m;
      m.origin = r.str8();
      m.advert_seq = r.u64();
      m.filters = get_filters(r);
      return m;
    }
    case FrameKind::Heartbeat: return HeartbeatMsg{r.u64()};
    case FrameKind::Credit: return CreditMsg{r.u32()};
    case FrameKind::Resume: {
      ResumeMsg m;
      m.request_id = r.u64();
      m.requester = r.str8();
      m.source = r.str8();
      m.after_seq = r.u64();
      m.filters = get_filters(r);
      return m;
    }
    case FrameKind::Replay: {
      ReplayMsg m;
      m.request_id = r.u64();
      m.requester = r.str8();
      m.n = get_notification(r);
      return m;
    }
    case FrameKind::ReplayEnd: {
      ReplayEndMsg m;
      m.request_id = r.u64();
      m.requester = r.str8();
      m.source = r.str8();
      m.last_seq = r.u64();
      return m;
    }
  }
  throw MalformedFrame("unknown frame kind", 4);
}

}  // namespace

void encode_message(const Message& m, Bytes& out) {
  ByteWriter w(out);
  const auto start = out.size();
  w.u32(0);
  w.u8(static_cast<std::uint8_t>(kind_of(m)));
  std::visit(Encoder{w}, m);
  const auto len = out.size() - start - 4;
  if (len > kMaxFrameSize) throw Error("frame too large");
  w.patch_u32(start, static_cast<std::uint32_t>(len));
}

Bytes encode_message(const Message& m) {
  Bytes out;
  encode_message(m, out);
  return out;
}

Message decode_message(ByteSpan frame) {
  ByteReader r(frame);
  const auto len = r.u32();
  if (len == 0 || len > kMaxFrameSize) throw MalformedFrame("bad frame length", 0);
  if (frame.size() != static_cast<std::size_t>(len) + 4)
    throw MalformedFrame("frame length mismatch", 0);
  const auto kind = r.u8();
  if (kind < 1 || kind > 11) throw MalformedFrame("unknown frame kind", 4);
  auto msg = decode_body(static_cast<FrameKind>(kind), r);
  if (!r.done()) throw MalformedFrame("trailing bytes", r.offset());
  return msg;
}

void FrameReader::feed(ByteSpan bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  const auto avail = buf_.size() - pos_;
  if (avail < 4) return std::nullopt;
  const std::uint32_t len = (std::uint32_t{buf_[pos_]} << 24) | (std::uint32_t{buf_[pos_ + 1]} << 16) |
                            (std::uint32_t{buf_[pos_ + 2]} << 8) | buf_[pos_ + 3];
  if (len == 0 || len > kMaxFrameSize) throw MalformedFrame("bad frame length", 0);
  if (avail < std::size_t{len} + 4) return std::nullopt;
  ByteSpan frame(buf_.data() + pos_, std::size_t{len} + 4);
  pos_ += std::size_t{len} + 4;
  auto msg = decode_message(frame);
  if (pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  return msg;
}

Bytes FrameReader::take_remaining() {
  Bytes out(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end());
  buf_.clear();
  pos_ = 0;
  return out;
}

}  // namespace mdf
