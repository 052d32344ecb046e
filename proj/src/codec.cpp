#include "mdf/codec.hpp"

#include <bitset>

namespace mdf {

namespace {

void put_tag(ByteWriter& w, std::uint8_t tag, std::uint8_t len) {
  w.u8(tag);
  w.u8(len);
}

void put_u64(ByteWriter& w, std::uint8_t tag, std::uint64_t v) {
  put_tag(w, tag, 8);
  w.u64(v);
}

void put_i64(ByteWriter& w, std::uint8_t tag, std::int64_t v) {
  put_tag(w, tag, 8);
  w.i64(v);
}

void put_str(ByteWriter& w, std::uint8_t tag, const std::string& s) {
  if (s.size() > 0xFF) throw Error("TLV string value longer than 255 bytes");
  put_tag(w, tag, static_cast<std::uint8_t>(s.size()));
  w.raw(s);
}

void encode_enrichment(ByteWriter& w, const EnrichmentBlock& e) {
  Bytes inner;
  ByteWriter iw(inner);
  if (e.day_open) put_i64(iw, 1, e.day_open->ticks());
  if (e.day_high) put_i64(iw, 2, e.day_high->ticks());
  if (e.day_low) put_i64(iw, 3, e.day_low->ticks());
  if (e.last) put_i64(iw, 4, e.last->ticks());
  put_u64(iw, 5, e.total_volume);
  put_u64(iw, 6, e.trade_count);
  if (e.prev_close) put_i64(iw, 7, e.prev_close->ticks());
  put_tag(w, tag::kEnrichment, static_cast<std::uint8_t>(inner.size()));
  w.raw(inner);
}

std::uint64_t fixed_be(ByteReader& r, std::uint8_t len, std::uint8_t want, std::uint8_t tag) {
  if (len != want) throw MalformedFrame("bad length " + std::to_string(len), r.offset() - 2, tag);
  std::uint64_t v = 0;
  for (auto b : r.take(len)) v = (v << 8) | b;
  return v;
}

EnrichmentBlock decode_enrichment(ByteSpan body, std::size_t base) {
  EnrichmentBlock e;
  ByteReader r(body, base);
  std::bitset<8> seen;
  bool have_volume = false, have_count = false;
  while (!r.done()) {
    auto t = r.u8();
    auto len = r.u8();
    if (t >= 1 && t <= 7) {
      if (seen[t]) throw MalformedFrame("duplicate enrichment tag", r.offset() - 2, t);
      seen[t] = true;
    }
    switch (t) {
      case 1: e.day_open = Price::from_ticks(static_cast<std::int64_t>(fixed_be(r, len, 8, t))); break;
      case 2: e.day_high = Price::from_ticks(static_cast<std::int64_t>(fixed_be(r, len, 8, t))); break;
      case 3: e.day_low = Price::from_ticks(static_cast<std::int64_t>(fixed_be(r, len, 8, t))); break;
      case 4: e.last = Price::from_ticks(static_cast<std::int64_t>(fixed_be(r, len, 8, t))); break;
      case 5: e.total_volume = fixed_be(r, len, 8, t); have_volume = true; break;
      case 6: e.trade_count = fixed_be(r, len, 8, t); have_count = true; break;
      case 7: e.prev_close = Price::from_ticks(static_cast<std::int64_t>(fixed_be(r, len, 8, t))); break;
      default: r.take(len); break;
    }
  }
  if (!have_volume) throw MalformedFrame("enrichment tag 5 absent", base, tag::kEnrichment);
  if (!have_count) throw MalformedFrame("enrichment tag 6 absent", base, tag::kEnrichment);
  return e;
}

}  // namespace

void write_frame(Bytes& out, ByteSpan payload) {
  if (payload.size() > 0xFFFF) throw Error("frame payload exceeds 65535 bytes");
  ByteWriter w(out);
  w.u8(kFrameMagic);
  w.u8(kFrameVersion);
  w.u16(static_cast<std::uint16_t>(payload.size()));
  w.raw(payload);
}

void encode_notification(const EventNotification& n, Bytes& out) {
  ByteWriter w(out);
  std::size_t start = w.size();
  w.u8(kFrameMagic);
  w.u8(kFrameVersion);
  w.u16(0);
  put_str(w, tag::kSource, n.source);
  put_u64(w, tag::kSeq, n.seq);
  put_str(w, tag::kSymbol, n.symbol.str());
  put_tag(w, tag::kEventType, 1);
  w.u8(static_cast<std::uint8_t>(n.event_type));
  if (n.price) put_i64(w, tag::kPrice, n.price->ticks());
  if (n.size) {
    put_tag(w, tag::kSize, 4);
    w.u32(*n.size);
  }
  if (n.bid) put_i64(w, tag::kBid, n.bid->ticks());
  if (n.ask) put_i64(w, tag::kAsk, n.ask->ticks());
  put_u64(w, tag::kSourceTs, n.source_ts_ms);
  put_u64(w, tag::kIngestTs, n.ingest_ts_ms);
  if (n.instrument_class) {
    put_tag(w, tag::kInstrumentClass, 1);
    w.u8(static_cast<std::uint8_t>(*n.instrument_class));
  }
  if (n.enriched) encode_enrichment(w, *n.enriched);
  if (n.derived_kind) {
    put_tag(w, tag::kDerivedKind, 1);
    w.u8(static_cast<std::uint8_t>(*n.derived_kind));
  }
  w.patch_u16(start + 2, static_cast<std::uint16_t>(w.size() - start - kFrameHeaderSize));
}

Bytes encode_notification(const EventNotification& n) {
  Bytes out;
  out.reserve(96);
  encode_notification(n, out);
  return out;
}

std::pair<TlvFields, std::size_t> read_tlv_frame(ByteSpan bytes, std::size_t offset) {
  if (offset > bytes.size()) throw MalformedFrame("truncated", offset);
  ByteReader hdr(bytes.subspan(offset), offset);
  if (hdr.u8() != kFrameMagic) throw MalformedFrame("magic", offset);
  if (hdr.u8() != kFrameVersion) throw MalformedFrame("version", offset + 1);
  std::size_t len = hdr.u16();
  ByteReader r(hdr.take(len), offset + kFrameHeaderSize);

  TlvFields f;
  std::bitset<16> seen;
  while (!r.done()) {
    auto t = r.u8();
    auto tlen = r.u8();
    if (t >= 1 && t <= 13) {
      if (seen[t]) throw MalformedFrame("duplicate tag", r.offset() - 2, t);
      seen[t] = true;
    }
    switch (t) {
      case tag::kSource: {
        auto s = r.take(tlen);
        f.source = std::string(s.begin(), s.end());
        break;
      }
      case tag::kSeq: f.seq = fixed_be(r, tlen, 8, t); break;
      case tag::kSymbol: {
        auto s = r.take(tlen);
        f.symbol = std::string(s.begin(), s.end());
        break;
      }
      case tag::kEventType: f.event_type = static_cast<std::uint8_t>(fixed_be(r, tlen, 1, t)); break;
      case tag::kPrice: f.price = static_cast<std::int64_t>(fixed_be(r, tlen, 8, t)); break;
      case tag::kSize: f.size = static_cast<std::uint32_t>(fixed_be(r, tlen, 4, t)); break;
      case tag::kBid: f.bid = static_cast<std::int64_t>(fixed_be(r, tlen, 8, t)); break;
      case tag::kAsk: f.ask = static_cast<std::int64_t>(fixed_be(r, tlen, 8, t)); break;
      case tag::kSourceTs: f.source_ts_ms = fixed_be(r, tlen, 8, t); break;
      case tag::kIngestTs: f.ingest_ts_ms = fixed_be(r, tlen, 8, t); break;
      case tag::kInstrumentClass:
        f.instrument_class = static_cast<std::uint8_t>(fixed_be(r, tlen, 1, t));
        break;
      case tag::kEnrichment: {
        std::size_t at = r.offset();
        f.enriched = decode_enrichment(r.take(tlen), at);
        break;
      }
      case tag::kDerivedKind: f.derived_kind = static_cast<std::uint8_t>(fixed_be(r, tlen, 1, t)); break;
      default: r.take(tlen); break;
    }
  }
  return {std::move(f), kFrameHeaderSize + len};
}

std::pair<EventNotification, std::size_t> decode_notification_at(ByteSpan bytes,
                                                                  std::size_t offset) {
  auto [f, consumed] = read_tlv_frame(bytes, offset);
  const std::size_t at = offset + kFrameHeaderSize;
  auto require = [&](bool present, int t) {
    if (!present) throw MalformedFrame("tag " + std::to_string(t) + " absent", at, t);
  };
  require(f.source.has_value(), tag::kSource);
  require(f.seq.has_value(), tag::kSeq);
  require(f.symbol.has_value(), tag::kSymbol);
  require(f.event_type.has_value(), tag::kEventType);
  require(f.source_ts_ms.has_value(), tag::kSourceTs);
  require(f.ingest_ts_ms.has_value(), tag::kIngestTs);

  EventNotification n;
  if (!is_valid_source(*f.source)) throw MalformedFrame("invalid source", at, tag::kSource);
  n.source = std::move(*f.source);
  n.seq = *f.seq;
  auto sym = SymbolKey::parse(*f.symbol);
  if (!sym) throw MalformedFrame("invalid symbol", at, tag::kSymbol);
  n.symbol = std::move(*sym);
  if (*f.event_type < 1 || *f.event_type > 3)
    throw MalformedFrame("invalid event type", at, tag::kEventType);
  n.event_type = static_cast<EventType>(*f.event_type);
  if (f.price) n.price = Price::from_ticks(*f.price);
  n.size = f.size;
  if (f.bid) n.bid = Price::from_ticks(*f.bid);
  if (f.ask) n.ask = Price::from_ticks(*f.ask);
  n.source_ts_ms = *f.source_ts_ms;
  n.ingest_ts_ms = *f.ingest_ts_ms;
  if (f.instrument_class) {
    if (*f.instrument_class < 1 || *f.instrument_class > 4)
      throw MalformedFrame("invalid instrument class", at, tag::kInstrumentClass);
    n.instrument_class = static_cast<InstrumentClass>(*f.instrument_class);
  }
  n.enriched = std::move(f.enriched);
  if (f.derived_kind) {
    if (*f.derived_kind < 1 || *f.derived_kind > 4)
      throw MalformedFrame("invalid derived kind", at, tag::kDerivedKind);
    n.derived_kind = static_cast<DerivedKind>(*f.derived_kind);
  }
  return {std::move(n), consumed};
}

EventNotification decode_notification(ByteSpan bytes) {
  auto [n, consumed] = decode_notification_at(bytes, 0);
  if (consumed != bytes.size()) throw MalformedFrame("trailing bytes", consumed);
  return n;
}

}  // namespace mdf
