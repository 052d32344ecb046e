#pragma once

// Notification TLV frame:
//   0xFD | 0x01 | u16 BE payload length | TLV entries (tag u8, len u8, value)
//
//   1 source (ascii)         7 bid (i64, 1e-4)
//   2 seq (u64)              8 ask (i64, 1e-4)
//   3 symbol (ascii)         9 source_ts_ms (u64)
//   4 event_type (u8)       10 ingest_ts_ms (u64)
//   5 price (i64, 1e-4)     11 instrument_class (u8)
//   6 size (u32)            12 enrichment block (nested TLV)
//                           13 derived kind (u8)
//
// Nested enrichment tags: 1 open, 2 high, 3 low, 4 last, 5 total_volume,
// 6 trade_count, 7 prev_close. Unknown tags are skipped on decode.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "mdf/bytes.hpp"
#include "mdf/model.hpp"

namespace mdf {

inline constexpr std::uint8_t kFrameMagic = 0xFD;
inline constexpr std::uint8_t kFrameVersion = 0x01;
inline constexpr std::size_t kFrameHeaderSize = 4;

namespace tag {
inline constexpr std::uint8_t kSource = 1;
inline constexpr std::uint8_t kSeq = 2;
inline constexpr std::uint8_t kSymbol = 3;
inline constexpr std::uint8_t kEventType = 4;
inline constexpr std::uint8_t kPrice = 5;
inline constexpr std::uint8_t kSize = 6;
inline constexpr std::uint8_t kBid = 7;
inline constexpr std::uint8_t kAsk = 8;
inline constexpr std::uint8_t kSourceTs = 9;
inline constexpr std::uint8_t kIngestTs = 10;
inline constexpr std::uint8_t kInstrumentClass = 11;
inline constexpr std::uint8_t kEnrichment = 12;
inline constexpr std::uint8_t kDerivedKind = 13;
}  // namespace tag

// Field values as they appear on the wire, before any domain validation.
// Shared by the notification decoder and the binary feed parser.
struct TlvFields {
  std::optional<std::string> source;
  std::optional<std::uint64_t> seq;
  std::optional<std::string> symbol;
  std::optional<std::uint8_t> event_type;
  std::optional<std::int64_t> price;
  std::optional<std::uint32_t> size;
  std::optional<std::int64_t> bid;
  std::optional<std::int64_t> ask;
  std::optional<std::uint64_t> source_ts_ms;
  std::optional<std::uint64_t> ingest_ts_ms;
  std::optional<std::uint8_t> instrument_class;
  std::optional<EnrichmentBlock> enriched;
  std::optional<std::uint8_t> derived_kind;
};

// Reads one frame starting at `bytes[offset]`. Returns the fields and the
// number of bytes consumed (header + payload). Throws MalformedFrame on bad
// magic/version, truncation, duplicate or mis-sized tags.
std::pair<TlvFields, std::size_t> read_tlv_frame(ByteSpan bytes, std::size_t offset = 0);

// Writes a frame from already-built TLV payload bytes.
void write_frame(Bytes& out, ByteSpan payload);

Bytes encode_notification(const EventNotification& n);
void encode_notification(const EventNotification& n, Bytes& out);

// `bytes` must hold exactly one frame.
EventNotification decode_notification(ByteSpan bytes);
// Decodes the frame at `offset`; returns the notification and bytes consumed.
std::pair<EventNotification, std::size_t> decode_notification_at(ByteSpan bytes,
                                                                  std::size_t offset);

}  // namespace mdf
