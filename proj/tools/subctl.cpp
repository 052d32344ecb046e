// subctl: subscribe at a broker and print deliveries in the feed grammar.
//
// Flow control is by credit: without --drain-rate the window is kept open,
// with it credits are granted at that rate, so the broker queues (and for
// CONFLATED, conflates) whatever arrives faster.

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstring>
#include <iostream>

#include "cli.hpp"
#include "mdf/error.hpp"
#include "mdf/feedpipe.hpp"
#include "mdf/wire.hpp"
#include "net.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

constexpr std::uint32_t kOpenWindow = 1024;

bool send_msg(int fd, const mdf::Message& m) {
  const auto b = mdf::encode_message(m);
  return mdf::tools::write_all(fd, b.data(), b.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subscriber client", "subctl"};
  std::string connect, qoi_text, filter_text;
  std::optional<std::uint64_t> count;
  std::optional<double> drain_rate;
  app.add_option("--connect", connect, "broker address host:port")->required();
  app.add_option("--qoi", qoi_text, "CONFLATED|COMPLETE")
      ->required()
      ->check(CLI::IsMember({"CONFLATED", "COMPLETE"}));
  app.add_option("--filter", filter_text, "filter expression ('' matches everything)")->required();
  app.add_option("--count", count, "exit after this many notifications");
  app.add_option("--drain-rate", drain_rate, "notifications per second")->check(CLI::PositiveNumber);
  if (auto code = mdf::tools::parse_cli(app, argc, argv)) return *code;

  mdf::SubscriptionFilter filter;
  try {
    filter = mdf::parse_filter_expr(filter_text);
  } catch (const mdf::ParseError& e) {
    std::cerr << "subctl: invalid filter: " << e.what() << "\n";
    return 2;
  }
  mdf::tools::Endpoint ep;
  try {
    ep = mdf::tools::parse_endpoint(connect);
  } catch (const std::exception& e) {
    std::cerr << "subctl: " << e.what() << "\n";
    return 2;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);

  const int fd = mdf::tools::tcp_connect(ep);
  if (fd < 0) {
    std::cerr << "subctl: cannot connect to " << connect << ": " << std::strerror(errno) << "\n";
    return 1;
  }
  if (count && *count == 0) return 0;

  const auto qoi = *mdf::parse_qoi(qoi_text);
  const std::uint32_t initial = drain_rate ? 0 : kOpenWindow;
  if (!send_msg(fd, mdf::HelloMsg{"subctl-" + std::to_string(::getpid()), mdf::PeerKind::Client, ""}) ||
      !send_msg(fd, mdf::SubMsg{1, qoi, filter}) || (initial && !send_msg(fd, mdf::CreditMsg{initial}))) {
    std::cerr << "subctl: connection lost\n";
    return 1;
  }

  mdf::FrameReader reader;
  std::uint64_t printed = 0, since_credit = 0;
  double budget = 0;
  std::uint64_t last = mdf::tools::wall_ms();
  std::uint8_t buf[65536];
  while (!g_stop) {
    pollfd pfd{fd, POLLIN, 0};
    const int r = ::poll(&pfd, 1, drain_rate ? 20 : 200);
    if (r < 0 && errno != EINTR) break;

    if (drain_rate) {
      // Only one credit is ever outstanding, so the broker holds the backlog.
      const auto now = mdf::tools::wall_ms();
      budget = std::min(budget + *drain_rate * static_cast<double>(now - last) / 1000.0, 1.0);
      last = now;
      if (budget >= 1.0 && since_credit == 0) {
        budget -= 1.0;
        since_credit = 1;
        if (!send_msg(fd, mdf::CreditMsg{1})) break;
      }
    }
    if (r <= 0 || !(pfd.revents & (POLLIN | POLLHUP | POLLERR))) continue;

    const auto n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      std::cerr << "subctl: broker closed the connection\n";
      return 1;
    }
    reader.feed(mdf::ByteSpan(buf, static_cast<std::size_t>(n)));
    try {
      while (auto msg = reader.next()) {
        const auto* pub = std::get_if<mdf::PubMsg>(&*msg);
        if (!pub) continue;
        std::cout << mdf::format_notification_line(*pub->n) << '\n' << std::flush;
        ++printed;
        if (count && printed >= *count) return 0;
        if (drain_rate) {
          since_credit = 0;
        } else if (++since_credit >= kOpenWindow / 2) {
          if (!send_msg(fd, mdf::CreditMsg{static_cast<std::uint32_t>(since_credit)})) return 1;
          since_credit = 0;
        }
      }
    } catch (const mdf::MalformedFrame& e) {
      std::cerr << "subctl: malformed frame: " << e.what() << "\n";
      return 1;
    }
  }
  ::close(fd);
  return 0;
}
