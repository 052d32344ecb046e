#pragma once

// Broker wire protocol. A frame is
//   u32 BE length (kind byte + payload) | u8 kind | payload
// Strings are u8-length prefixed, lists carry a u16 count, filters are
// u16-length prefixed canonical filter TLV, notifications are full
// notification frames.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mdf/bytes.hpp"
#include "mdf/filter.hpp"
#include "mdf/model.hpp"

namespace mdf {

enum class FrameKind : std::uint8_t {
  Hello = 1,
  Sub = 2,
  Unsub = 3,
  Pub = 4,
  Lsa = 5,
  SubAdv = 6,
  Heartbeat = 7,
  Credit = 8,
  Resume = 9,
  Replay = 10,
  ReplayEnd = 11,
};

const char* to_string(FrameKind k);

enum class PeerKind : std::uint8_t { Client = 1, Broker = 2, Feed = 3 };

const char* to_string(PeerKind k);

inline constexpr std::size_t kMaxFrameSize = 1u << 20;

struct HelloMsg {
  std::string node_id;
  PeerKind kind = PeerKind::Broker;
  std::string site;
  bool operator==(const HelloMsg&) const = default;
};

struct SubMsg {
  std::uint64_t sub_id = 0;
  Qoi qoi = Qoi::Complete;
  SubscriptionFilter filter;
  bool operator==(const SubMsg&) const = default;
};

struct UnsubMsg {
  std::uint64_t sub_id = 0;
  bool operator==(const UnsubMsg&) const = default;
};

struct PubMsg {
  NotificationPtr n;
  bool operator==(const PubMsg& o) const { return *n == *o.n; }
};

struct LsaNeighbor {
  std::string id;
  std::uint32_t latency_ms = 0;
  bool operator==(const LsaNeighbor&) const = default;
};

struct LsaMsg {
  std::string origin;
  std::uint64_t lsa_seq = 0;
  std::string site;
  std::vector<LsaNeighbor> neighbors;  // sorted by id
  std::vector<std::string> sources;    // feed sources hosted by origin, sorted
  bool operator==(const LsaMsg&) const = default;
};

struct SubAdvMsg {
  std::string origin;
  std::uint64_t advert_seq = 0;
  std::vector<SubscriptionFilter> filters;  // cover-reduced
  bool operator==(const SubAdvMsg&) const = default;
};

struct HeartbeatMsg {
  std::uint64_t ts_ms = 0;
  bool operator==(const HeartbeatMsg&) const = default;
};

struct CreditMsg {
  std::uint32_t n = 0;
  bool operator==(const CreditMsg&) const = default;
};

// Asks the ingress broker of `source` for stored notifications after
// `after_seq` matching `filters`; routed up the source's tree.
struct ResumeMsg {
  std::uint64_t request_id = 0;
  std::string requester;
  std::string source;
  std::uint64_t after_seq = 0;
  std::vector<SubscriptionFilter> filters;
  bool operator==(const ResumeMsg&) const = default;
};

// Routed down the source's tree toward `requester`.
struct ReplayMsg {
  std::uint64_t request_id = 0;
  std::string requester;
  NotificationPtr n;
  bool operator==(const ReplayMsg& o) const {
    return request_id == o.request_id && requester == o.requester && *n == *o.n;
  }
};

struct ReplayEndMsg {
  std::uint64_t request_id = 0;
  std::string requester;
  std::string source;
  std::uint64_t last_seq = 0;
  bool operator==(const ReplayEndMsg&) const = default;
};

using Message = std::variant<HelloMsg, SubMsg, UnsubMsg, PubMsg, LsaMsg, SubAdvMsg, HeartbeatMsg,
                             CreditMsg, ResumeMsg, ReplayMsg, ReplayEndMsg>;

FrameKind kind_of(const Message& m);

void encode_message(const Message& m, Bytes& out);
Bytes encode_message(const Message& m);

// Decodes one complete frame (length prefix included). Throws MalformedFrame.
Message decode_message(ByteSpan frame);

// Incremental frame splitter for stream transports.
class FrameReader {
 public:
  void feed(ByteSpan bytes);
  // Next complete message, or nullopt when more bytes are needed. Throws
  // MalformedFrame on an oversized or undecodable frame.
  std::optional<Message> next();
  // Bytes received but not yet consumed as frames.
  Bytes take_remaining();
  std::size_t buffered() const noexcept { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

}  // namespace mdf
