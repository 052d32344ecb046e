// brokerd: one broker node over TCP.
//
// Accepted connections are classified by their first frame. A HELLO with
// kind FEED turns the rest of the stream into raw feed input (binary when
// the next byte is the 0xFD frame magic, text otherwise), which runs through
// a feed handler into the ticker plant. Anything else is handed to the
// broker. Dialed peers are redialed every second while disconnected.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstring>
#include <map>
#include <memory>

#include "cli.hpp"
#include "mdf/error.hpp"
#include "mdf/feedpipe.hpp"
#include "mdf/plant.hpp"
#include "mdf/store.hpp"
#include "net.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

constexpr std::uint64_t kTickMs = 100;
constexpr std::uint64_t kRedialMs = 1000;
constexpr std::uint32_t kLinkLatencyMs = 1;

struct Conn {
  enum class Mode { Pending, Peer, Feed } mode = Mode::Pending;
  int fd = -1;
  mdf::LinkId link = 0;
  mdf::FrameReader reader;
  mdf::Bytes wbuf;
  std::size_t wpos = 0;
  std::optional<std::size_t> dial;  // index into the --peer list
  std::unique_ptr<mdf::FeedHandler> feed;
  std::optional<bool> binary;
};

struct Dial {
  mdf::tools::Endpoint ep;
  std::string text;
  bool connected = false;
  std::uint64_t next_attempt = 0;
};

class Daemon {
 public:
  Daemon(mdf::BrokerConfig cfg, std::unique_ptr<mdf::EventStore> store, int listen_fd,
         std::vector<Dial> dials)
      : store_(std::move(store)),
        broker_(std::move(cfg), store_.get()),
        plant_(broker_, store_.get()),
        listen_fd_(listen_fd),
        dials_(std::move(dials)) {}

  void run() {
    std::uint64_t next_tick = mdf::tools::wall_ms();
    while (!g_stop) {
      auto now = mdf::tools::wall_ms();
      redial(now);
      std::vector<pollfd> fds{{listen_fd_, POLLIN, 0}};
      std::vector<mdf::LinkId> order;
      const bool hold_feeds = broker_.backpressured();
      for (auto& [id, c] : conns_) {
        short ev = 0;
        if (!(c.mode == Conn::Mode::Feed && hold_feeds)) ev |= POLLIN;
        if (c.wpos < c.wbuf.size()) ev |= POLLOUT;
        fds.push_back({c.fd, ev, 0});
        order.push_back(id);
      }
      const int wait = static_cast<int>(next_tick > now ? std::min<std::uint64_t>(next_tick - now, kTickMs) : 0);
      if (::poll(fds.data(), fds.size(), hold_feeds ? std::min(wait, 10) : wait) < 0 && errno != EINTR) break;
      now = mdf::tools::wall_ms();

      if (fds[0].revents & POLLIN) accept_one(now);
      for (std::size_t i = 1; i < fds.size(); ++i) {
        const auto id = order[i - 1];
        if (!conns_.count(id)) continue;
        if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) read_from(id, now);
        if (conns_.count(id) && (fds[i].revents & POLLOUT)) flush(id);
        flush_outbox();
      }
      if (now >= next_tick) {
        broker_.on_timer(now);
        next_tick = now + kTickMs;
        flush_outbox();
      }
    }
    if (store_) store_->flush();
  }

 private:
  mdf::LinkId add(int fd, Conn::Mode mode, std::optional<std::size_t> dial) {
    mdf::tools::set_nonblocking(fd);
    const auto id = next_link_++;
    Conn c;
    c.fd = fd;
    c.link = id;
    c.mode = mode;
    c.dial = dial;
    conns_.emplace(id, std::move(c));
    return id;
  }

  void accept_one(std::uint64_t) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd >= 0) add(fd, Conn::Mode::Pending, std::nullopt);
  }

  void redial(std::uint64_t now) {
    for (std::size_t i = 0; i < dials_.size(); ++i) {
      auto& d = dials_[i];
      if (d.connected || now < d.next_attempt) continue;
      d.next_attempt = now + kRedialMs;
      const int fd = mdf::tools::tcp_connect(d.ep);
      if (fd < 0) continue;
      d.connected = true;
      const auto id = add(fd, Conn::Mode::Peer, i);
      std::cerr << "brokerd: connected to " << d.text << "\n";
      broker_.on_connect(id, kLinkLatencyMs, now);
      flush_outbox();
    }
  }

  void read_from(mdf::LinkId id, std::uint64_t now) {
    auto& c = conns_.at(id);
    std::uint8_t buf[65536];
    const auto n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) return;
    if (n <= 0) return drop(id, now, true);
    const mdf::ByteSpan chunk(buf, static_cast<std::size_t>(n));
    if (c.mode == Conn::Mode::Feed) return feed_bytes(c, chunk);
    c.reader.feed(chunk);
    try {
      while (conns_.count(id)) {
        auto& cc = conns_.at(id);
        auto msg = cc.reader.next();
        if (!msg) break;
        if (cc.mode == Conn::Mode::Pending) {
          const auto* hello = std::get_if<mdf::HelloMsg>(&*msg);
          if (hello && hello->kind == mdf::PeerKind::Feed) {
            start_feed(cc, *hello);
            return;
          }
          cc.mode = Conn::Mode::Peer;
          broker_.on_connect(id, kLinkLatencyMs, now);
        }
        broker_.on_frame(id, *msg, now);
        flush_outbox();
      }
    } catch (const mdf::MalformedFrame& e) {
      std::cerr << "brokerd: malformed frame on link " << id << ": " << e.what() << "\n";
      if (conns_.at(id).mode == Conn::Mode::Peer) {
        broker_.on_protocol_error(id, now);
        flush_outbox();
      } else {
        drop(id, now, false);
      }
    }
  }

  void start_feed(Conn& c, const mdf::HelloMsg& hello) {
    c.mode = Conn::Mode::Feed;
    mdf::FeedConfig cfg;
    cfg.feed_id = hello.node_id;
    cfg.expected_source = hello.node_id;
    broker_.host_source(hello.node_id, mdf::tools::wall_ms());
    c.feed = std::make_unique<mdf::FeedHandler>(
        cfg, [] { return mdf::tools::wall_ms(); },
        [this](mdf::EventNotification n) { plant_.ingest(n, mdf::tools::wall_ms()); });
    std::cerr << "brokerd: feed " << hello.node_id << " connected\n";
    const auto rest = c.reader.take_remaining();
    if (!rest.empty()) feed_bytes(c, rest);
    flush_outbox();
  }

  void feed_bytes(Conn& c, mdf::ByteSpan bytes) {
    if (bytes.empty()) return;
    if (!c.binary) c.binary = bytes[0] == 0xFD;
    if (*c.binary)
      c.feed->feed_binary(bytes);
    else
      c.feed->feed_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    flush_outbox();
  }

  void drop(mdf::LinkId id, std::uint64_t now, bool notify) {
    auto it = conns_.find(id);
    if (it == conns_.end()) return;
    auto& c = it->second;
    if (c.mode == Conn::Mode::Feed) {
      c.feed->finish();
      const auto& s = c.feed->stats();
      std::cerr << "brokerd: feed " << c.feed->config().feed_id << " closed parsed=" << s.parsed
                << " accepted=" << s.accepted << " rejected=" << s.rejected << "\n";
    }
    if (c.dial) {
      dials_[*c.dial].connected = false;
      dials_[*c.dial].next_attempt = now + kRedialMs;
    }
    ::close(c.fd);
    const bool peer = c.mode == Conn::Mode::Peer;
    conns_.erase(it);
    if (peer && notify) broker_.on_disconnect(id, now);
    flush_outbox();
  }

  void flush(mdf::LinkId id) {
    auto& c = conns_.at(id);
    while (c.wpos < c.wbuf.size()) {
      const auto n = ::send(c.fd, c.wbuf.data() + c.wpos, c.wbuf.size() - c.wpos, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EAGAIN || errno == EINTR) return;
        return drop(id, mdf::tools::wall_ms(), true);
      }
      c.wpos += static_cast<std::size_t>(n);
    }
    c.wbuf.clear();
    c.wpos = 0;
  }

  void flush_outbox() {
    for (auto& o : broker_.take_outbox()) {
      auto it = conns_.find(o.link);
      if (it == conns_.end()) continue;
      if (o.msg) mdf::encode_message(*o.msg, it->second.wbuf);
      if (o.close) {
        flush(o.link);
        if (conns_.count(o.link)) drop(o.link, mdf::tools::wall_ms(), false);
      } else {
        flush(o.link);
      }
    }
  }

  std::unique_ptr<mdf::EventStore> store_;
  mdf::Broker broker_;
  mdf::TickerPlant plant_;
  int listen_fd_;
  std::vector<Dial> dials_;
  std::map<mdf::LinkId, Conn> conns_;
  mdf::LinkId next_link_ = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Market data broker node", "brokerd"};
  std::string id, site, listen, store_dir;
  std::vector<std::string> peers;
  app.add_option("--id", id, "broker id")->required();
  app.add_option("--site", site, "site name")->required();
  app.add_option("--listen", listen, "listen address host:port (port 0 picks one)")->required();
  app.add_option("--peer", peers, "neighbor broker address (repeatable)");
  app.add_option("--store", store_dir, "event store directory (default: in memory)");
  if (auto code = mdf::tools::parse_cli(app, argc, argv)) return *code;

  std::vector<Dial> dials;
  mdf::tools::Endpoint lep;
  try {
    lep = mdf::tools::parse_endpoint(listen);
    for (const auto& p : peers) dials.push_back({mdf::tools::parse_endpoint(p), p});
  } catch (const std::exception& e) {
    std::cerr << "brokerd: " << e.what() << "\n";
    return 2;
  }

  try {
    auto store = store_dir.empty() ? std::make_unique<mdf::EventStore>() : mdf::EventStore::open(store_dir);
    const int lfd = mdf::tools::tcp_listen(lep);
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);

    mdf::BrokerConfig cfg;
    cfg.id = id;
    cfg.site = site;
    Daemon d(cfg, std::move(store), lfd, std::move(dials));
    std::cout << "brokerd " << id << " listening on " << (lep.host.empty() ? "0.0.0.0" : lep.host) << ":"
              << ntohs(addr.sin_port) << std::endl;
    d.run();
  } catch (const std::exception& e) {
    std::cerr << "brokerd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
