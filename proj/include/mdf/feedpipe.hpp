#pragma once

// Feed handling: parse source-specific wire formats, check and purge invalid
// events, normalize survivors into EventNotification values.
//
// Text format, one event per LF-terminated line:
//   source|seq|symbol|type|price|size|bid|ask|ts_ms
// Binary format: the notification TLV frame (mandatory tags 1,2,3,4,9).

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>

#include "mdf/bytes.hpp"
#include "mdf/model.hpp"

namespace mdf {

enum class OriginFormat : std::uint8_t { Text, Binary };

struct RawFeedEvent {
  std::string source;
  std::uint64_t seq = 0;
  std::string symbol;  // as received; case is normalized later
  EventType event_type = EventType::Status;
  std::optional<InstrumentClass> instrument_class;
  std::optional<Price> price;
  std::optional<std::uint32_t> size;
  std::optional<Price> bid;
  std::optional<Price> ask;
  std::uint64_t source_ts_ms = 0;
  OriginFormat origin_format = OriginFormat::Text;
  std::uint64_t raw_offset = 0;

  bool operator==(const RawFeedEvent&) const = default;
};

enum class RejectCode : std::uint8_t {
  Malformed,
  NonPositivePrice,
  CrossedQuote,
  StaleTimestamp,
  FutureTimestamp,
  DuplicateOrRegressedSeq,
  UnknownSymbol,
  SourceMismatch,
};
inline constexpr std::size_t kRejectCodeCount = 8;

std::string_view to_string(RejectCode c) noexcept;

struct RejectReason {
  RejectCode code = RejectCode::Malformed;
  std::string detail;
  // 1-based text field index for MALFORMED text lines.
  std::optional<std::size_t> field;
};

struct FeedConfig {
  std::string feed_id;
  std::string expected_source;
  InstrumentClass default_instrument_class = InstrumentClass::Equity;
  std::uint64_t max_future_skew_ms = 5'000;
  std::uint64_t max_past_skew_ms = 60'000;
  std::optional<std::set<SymbolKey>> symbol_table;
};

// Highest accepted sequence number per source.
using SeqTracker = std::unordered_map<std::string, std::uint64_t>;

struct ValidatedEvent {
  RawFeedEvent raw;
};

using ParseResult = std::variant<RawFeedEvent, RejectReason>;
using ValidateResult = std::variant<ValidatedEvent, RejectReason>;

ParseResult parse_text_line(std::string_view line, std::uint64_t raw_offset = 0);

struct BinaryParseResult {
  ParseResult result;
  // Bytes to skip before the next frame; always >= 1 so a stream makes
  // progress even on garbage.
  std::size_t consumed = 0;
};
BinaryParseResult parse_binary_frame(ByteSpan bytes, std::size_t offset);

ValidateResult validate(const RawFeedEvent& raw, const FeedConfig& cfg, SeqTracker& last_seq,
                        std::uint64_t now_ms);

EventNotification normalize(const ValidatedEvent& v, const FeedConfig& cfg,
                            std::uint64_t ingest_ts_ms);

// Emitters for the two feed formats.
std::string format_text_line(const RawFeedEvent& e);
Bytes encode_binary_event(const RawFeedEvent& e);

// Text-grammar rendering of a notification, with `|O=..|H=..|L=..|V=..`
// appended when it carries an enrichment block.
std::string format_notification_line(const EventNotification& n);

struct FeedStats {
  std::uint64_t parsed = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::array<std::uint64_t, kRejectCodeCount> by_reason{};
};

// Stateful, single-threaded handler over one input stream. Input may arrive
// in arbitrary chunks; call finish() at end of stream to flush a trailing
// partial record.
class FeedHandler {
 public:
  using Clock = std::function<std::uint64_t()>;
  using Sink = std::function<void(EventNotification)>;
  using RejectSink = std::function<void(const RejectReason&, std::uint64_t raw_offset)>;

  FeedHandler(FeedConfig cfg, Clock clock, Sink sink, RejectSink on_reject = {});

  void feed_text(std::string_view chunk);
  void feed_binary(ByteSpan chunk);
  void finish();

  // Runs one already-parsed event through validate + normalize.
  void process(ParseResult parsed, std::uint64_t raw_offset = 0);

  const FeedStats& stats() const noexcept { return stats_; }
  const FeedConfig& config() const noexcept { return cfg_; }

 private:
  void drain_binary(bool at_end);

  FeedConfig cfg_;
  Clock clock_;
  Sink sink_;
  RejectSink on_reject_;
  SeqTracker last_seq_;
  FeedStats stats_;
  std::string text_buf_;
  Bytes bin_buf_;
  std::uint64_t stream_offset_ = 0;  // offset of text_buf_/bin_buf_ start
};

}  // namespace mdf
