#include "mdf/feedpipe.hpp"

#include <charconv>

#include "mdf/codec.hpp"
#include "mdf/error.hpp"

namespace mdf {

namespace {

RejectReason malformed(std::string detail, std::optional<std::size_t> field = std::nullopt) {
  return RejectReason{RejectCode::Malformed, std::move(detail), field};
}

RejectReason reject(RejectCode code, std::string detail) {
  return RejectReason{code, std::move(detail), std::nullopt};
}

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return out;
}

// Symbol shape check, case-insensitive; canonical case is applied by normalize().
bool plausible_symbol(std::string_view s) { return SymbolKey::parse(upper(s)).has_value(); }

void append_opt_price(std::string& out, const std::optional<Price>& p) {
  if (p) out += p->str();
}

}  // namespace

std::string_view to_string(RejectCode c) noexcept {
  switch (c) {
    case RejectCode::Malformed: return "MALFORMED";
    case RejectCode::NonPositivePrice: return "NON_POSITIVE_PRICE";
    case RejectCode::CrossedQuote: return "CROSSED_QUOTE";
    case RejectCode::StaleTimestamp: return "STALE_TIMESTAMP";
    case RejectCode::FutureTimestamp: return "FUTURE_TIMESTAMP";
    case RejectCode::DuplicateOrRegressedSeq: return "DUPLICATE_OR_REGRESSED_SEQ";
    case RejectCode::UnknownSymbol: return "UNKNOWN_SYMBOL";
    case RejectCode::SourceMismatch: return "SOURCE_MISMATCH";
  }
  return "?";
}

ParseResult parse_text_line(std::string_view line, std::uint64_t raw_offset) {
  std::array<std::string_view, 9> f;
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    auto bar = line.find('|', start);
    auto end = bar == std::string_view::npos ? line.size() : bar;
    if (count < f.size()) f[count] = line.substr(start, end - start);
    ++count;
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  if (count != 9) return malformed("field count", count < 9 ? count + 1 : 10);

  RawFeedEvent e;
  e.origin_format = OriginFormat::Text;
  e.raw_offset = raw_offset;
  if (!is_valid_source(f[0])) return malformed("source", 1);
  e.source = std::string(f[0]);
  if (!parse_uint(f[1], e.seq)) return malformed("seq", 2);
  if (!plausible_symbol(f[2])) return malformed("symbol", 3);
  e.symbol = std::string(f[2]);
  auto type = parse_event_type(f[3]);
  if (!type) return malformed("type", 4);
  e.event_type = *type;

  auto opt_price = [](std::string_view s, std::optional<Price>& out) {
    if (s.empty()) return true;
    out = Price::parse(s);
    return out.has_value();
  };
  if (!opt_price(f[4], e.price)) return malformed("price", 5);
  if (!f[5].empty()) {
    std::uint32_t size = 0;
    if (!parse_uint(f[5], size)) return malformed("size", 6);
    e.size = size;
  }
  if (!opt_price(f[6], e.bid)) return malformed("bid", 7);
  if (!opt_price(f[7], e.ask)) return malformed("ask", 8);
  if (!parse_uint(f[8], e.source_ts_ms)) return malformed("ts_ms", 9);
  return e;
}

BinaryParseResult parse_binary_frame(ByteSpan bytes, std::size_t offset) {
  const std::size_t avail = offset < bytes.size() ? bytes.size() - offset : 0;
  if (avail == 0) return {malformed("truncated"), 1};
  if (bytes[offset] != kFrameMagic) return {malformed("magic"), 1};
  std::size_t frame_len = avail;
  if (avail >= kFrameHeaderSize)
    frame_len = std::min(avail, kFrameHeaderSize + (std::size_t{bytes[offset + 2]} << 8 | bytes[offset + 3]));

  TlvFields f;
  std::size_t consumed = 0;
  try {
    std::tie(f, consumed) = read_tlv_frame(bytes, offset);
  } catch (const MalformedFrame& e) {
    return {malformed(e.what()), frame_len};
  }

  const int mandatory[] = {tag::kSource, tag::kSeq, tag::kSymbol, tag::kEventType, tag::kSourceTs};
  const bool present[] = {f.source.has_value(), f.seq.has_value(), f.symbol.has_value(),
                          f.event_type.has_value(), f.source_ts_ms.has_value()};
  for (int i = 0; i < 5; ++i)
    if (!present[i]) return {malformed("tag " + std::to_string(mandatory[i]) + " absent"), consumed};

  RawFeedEvent e;
  e.origin_format = OriginFormat::Binary;
  e.raw_offset = offset;
  if (!is_valid_source(*f.source)) return {malformed("tag 1 invalid"), consumed};
  e.source = std::move(*f.source);
  e.seq = *f.seq;
  if (!plausible_symbol(*f.symbol)) return {malformed("tag 3 invalid"), consumed};
  e.symbol = std::move(*f.symbol);
  if (*f.event_type < 1 || *f.event_type > 3) return {malformed("tag 4 invalid"), consumed};
  e.event_type = static_cast<EventType>(*f.event_type);
  if (f.instrument_class) {
    if (*f.instrument_class < 1 || *f.instrument_class > 4)
      return {malformed("tag 11 invalid"), consumed};
    e.instrument_class = static_cast<InstrumentClass>(*f.instrument_class);
  }
  if (f.price) e.price = Price::from_ticks(*f.price);
  e.size = f.size;
  if (f.bid) e.bid = Price::from_ticks(*f.bid);
  if (f.ask) e.ask = Price::from_ticks(*f.ask);
  e.source_ts_ms = *f.source_ts_ms;
  return {std::move(e), consumed};
}

ValidateResult validate(const RawFeedEvent& raw, const FeedConfig& cfg, SeqTracker& last_seq,
                        std::uint64_t now_ms) {
  if (raw.source != cfg.expected_source)
    return reject(RejectCode::SourceMismatch,
                  "got " + raw.source + ", expected " + cfg.expected_source);
  auto symbol = SymbolKey::parse(upper(raw.symbol));
  if (!symbol) return malformed("symbol");
  if (cfg.symbol_table && !cfg.symbol_table->count(*symbol))
    return reject(RejectCode::UnknownSymbol, symbol->str());

  switch (raw.event_type) {
    case EventType::Trade:
      if (!raw.price || !raw.size || raw.bid || raw.ask)
        return malformed("TRADE requires price and size only");
      break;
    case EventType::Quote:
      if (!raw.bid || !raw.ask || raw.price || raw.size)
        return malformed("QUOTE requires bid and ask only");
      break;
    case EventType::Status:
      if (raw.price || raw.size || raw.bid || raw.ask)
        return malformed("STATUS carries no price fields");
      break;
  }
  for (const auto* p : {&raw.price, &raw.bid, &raw.ask})
    if (*p && (*p)->ticks() <= 0) return reject(RejectCode::NonPositivePrice, (*p)->str());
  if (raw.bid && raw.ask && *raw.bid > *raw.ask)
    return reject(RejectCode::CrossedQuote, raw.bid->str() + " > " + raw.ask->str());

  if (raw.source_ts_ms > now_ms && raw.source_ts_ms - now_ms > cfg.max_future_skew_ms)
    return reject(RejectCode::FutureTimestamp, std::to_string(raw.source_ts_ms));
  if (raw.source_ts_ms < now_ms && now_ms - raw.source_ts_ms > cfg.max_past_skew_ms)
    return reject(RejectCode::StaleTimestamp, std::to_string(raw.source_ts_ms));

  auto& last = last_seq[raw.source];
  if (raw.seq <= last)
    return reject(RejectCode::DuplicateOrRegressedSeq,
                  std::to_string(raw.seq) + " <= " + std::to_string(last));
  last = raw.seq;
  return ValidatedEvent{raw};
}

EventNotification normalize(const ValidatedEvent& v, const FeedConfig& cfg,
                            std::uint64_t ingest_ts_ms) {
  const auto& r = v.raw;
  EventNotification n;
  n.source = r.source;
  n.seq = r.seq;
  n.symbol = SymbolKey::of(upper(r.symbol));
  n.event_type = r.event_type;
  n.instrument_class = r.instrument_class.value_or(cfg.default_instrument_class);
  n.price = r.price;
  n.size = r.size;
  n.bid = r.bid;
  n.ask = r.ask;
  n.source_ts_ms = r.source_ts_ms;
  n.ingest_ts_ms = ingest_ts_ms;
  return n;
}

std::string format_text_line(const RawFeedEvent& e) {
  std::string out;
  out.reserve(64);
  out += e.source;
  out += '|';
  out += std::to_string(e.seq);
  out += '|';
  out += e.symbol;
  out += '|';
  out += to_string(e.event_type);
  out += '|';
  append_opt_price(out, e.price);
  out += '|';
  if (e.size) out += std::to_string(*e.size);
  out += '|';
  append_opt_price(out, e.bid);
  out += '|';
  append_opt_price(out, e.ask);
  out += '|';
  out += std::to_string(e.source_ts_ms);
  return out;
}

Bytes encode_binary_event(const RawFeedEvent& e) {
  Bytes payload;
  ByteWriter w(payload);
  auto str = [&](std::uint8_t t, const std::string& s) {
    w.u8(t);
    w.str8(s);
  };
  auto i64 = [&](std::uint8_t t, const std::optional<Price>& p) {
    if (!p) return;
    w.u8(t);
    w.u8(8);
    w.i64(p->ticks());
  };
  str(tag::kSource, e.source);
  w.u8(tag::kSeq);
  w.u8(8);
  w.u64(e.seq);
  str(tag::kSymbol, e.symbol);
  w.u8(tag::kEventType);
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(e.event_type));
  i64(tag::kPrice, e.price);
  if (e.size) {
    w.u8(tag::kSize);
    w.u8(4);
    w.u32(*e.size);
  }
  i64(tag::kBid, e.bid);
  i64(tag::kAsk, e.ask);
  w.u8(tag::kSourceTs);
  w.u8(8);
  w.u64(e.source_ts_ms);
  if (e.instrument_class) {
    w.u8(tag::kInstrumentClass);
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(*e.instrument_class));
  }
  Bytes out;
  write_frame(out, payload);
  return out;
}

std::string format_notification_line(const EventNotification& n) {
  RawFeedEvent e;
  e.source = n.source;
  e.seq = n.seq;
  e.symbol = n.symbol.str();
  e.event_type = n.event_type;
  e.price = n.price;
  e.size = n.size;
  e.bid = n.bid;
  e.ask = n.ask;
  e.source_ts_ms = n.source_ts_ms;
  std::string out = format_text_line(e);
  if (n.enriched) {
    const auto& b = *n.enriched;
    auto p = [](const std::optional<Price>& v) { return v ? v->str() : std::string(); };
    out += "|O=" + p(b.day_open) + "|H=" + p(b.day_high) + "|L=" + p(b.day_low) +
           "|V=" + std::to_string(b.total_volume);
  }
  return out;
}

FeedHandler::FeedHandler(FeedConfig cfg, Clock clock, Sink sink, RejectSink on_reject)
    : cfg_(std::move(cfg)),
      clock_(std::move(clock)),
      sink_(std::move(sink)),
      on_reject_(std::move(on_reject)) {}

void FeedHandler::process(ParseResult parsed, std::uint64_t raw_offset) {
  ++stats_.parsed;
  auto fail = [&](const RejectReason& r, std::uint64_t offset) {
    ++stats_.rejected;
    ++stats_.by_reason[static_cast<std::size_t>(r.code)];
    if (on_reject_) on_reject_(r, offset);
  };
  if (auto* r = std::get_if<RejectReason>(&parsed)) {
    fail(*r, raw_offset);
    return;
  }
  auto& raw = std::get<RawFeedEvent>(parsed);
  const std::uint64_t now = clock_();
  auto v = validate(raw, cfg_, last_seq_, now);
  if (auto* r = std::get_if<RejectReason>(&v)) {
    fail(*r, raw.raw_offset);
    return;
  }
  ++stats_.accepted;
  sink_(normalize(std::get<ValidatedEvent>(v), cfg_, now));
}

void FeedHandler::feed_text(std::string_view chunk) {
  text_buf_.append(chunk);
  std::size_t start = 0;
  while (true) {
    auto nl = text_buf_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(text_buf_.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) process(parse_text_line(line, stream_offset_ + start), stream_offset_ + start);
    start = nl + 1;
  }
  text_buf_.erase(0, start);
  stream_offset_ += start;
}

void FeedHandler::feed_binary(ByteSpan chunk) {
  bin_buf_.insert(bin_buf_.end(), chunk.begin(), chunk.end());
  drain_binary(false);
}

void FeedHandler::drain_binary(bool at_end) {
  std::size_t pos = 0;
  while (pos < bin_buf_.size()) {
    const std::size_t avail = bin_buf_.size() - pos;
    if (bin_buf_[pos] == kFrameMagic && !at_end) {
      if (avail < kFrameHeaderSize) break;
      std::size_t len = std::size_t{bin_buf_[pos + 2]} << 8 | bin_buf_[pos + 3];
      if (avail < kFrameHeaderSize + len) break;
    }
    if (bin_buf_[pos] != kFrameMagic) {
      // Count a run of garbage as one malformed record and resync on magic.
      std::size_t skip = 1;
      while (pos + skip < bin_buf_.size() && bin_buf_[pos + skip] != kFrameMagic) ++skip;
      if (pos + skip == bin_buf_.size() && !at_end) break;
      ++stats_.parsed;
      ++stats_.rejected;
      ++stats_.by_reason[static_cast<std::size_t>(RejectCode::Malformed)];
      if (on_reject_) on_reject_(malformed("magic"), stream_offset_ + pos);
      pos += skip;
      continue;
    }
    auto r = parse_binary_frame(bin_buf_, pos);
    if (auto* raw = std::get_if<RawFeedEvent>(&r.result)) raw->raw_offset = stream_offset_ + pos;
    process(std::move(r.result), stream_offset_ + pos);
    pos += r.consumed;
  }
  bin_buf_.erase(bin_buf_.begin(), bin_buf_.begin() + static_cast<long>(pos));
  stream_offset_ += pos;
}

void FeedHandler::finish() {
  if (!text_buf_.empty()) {
    std::string_view line(text_buf_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) process(parse_text_line(line, stream_offset_), stream_offset_);
    stream_offset_ += text_buf_.size();
    text_buf_.clear();
  }
  if (!bin_buf_.empty()) drain_binary(true);
}

}  // namespace mdf
