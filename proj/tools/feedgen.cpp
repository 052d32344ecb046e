// feedgen: seeded synthetic feed to a file or a broker's feed port.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include "cli.hpp"
#include "mdf/feedpipe.hpp"
#include "mdf/synth.hpp"
#include "mdf/wire.hpp"
#include "net.hpp"

namespace {

// File-mode timestamps start here so output depends only on the flags.
constexpr std::uint64_t kFileEpochMs = 1'700'000'000'000;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic market data feed generator", "feedgen"};
  std::string target, out, format, source = "SIM1", market = "SIM";
  std::uint32_t symbols = 4;
  std::uint64_t rate = 1000, seed = 1;
  std::optional<std::uint64_t> count, duration_ms;
  unsigned trade_pct = 50;

  auto* dest = app.add_option("--target", target, "broker address host:port");
  app.add_option("--out", out, "output file ('-' for stdout)")->excludes(dest);
  app.add_option("--format", format, "text|binary")
      ->required()
      ->check(CLI::IsMember({"text", "binary"}));
  app.add_option("--source", source, "source name")->check([](const std::string& s) {
    bool ok = !s.empty() && s.size() <= 8;
    for (char c : s) ok = ok && ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
    return ok ? std::string() : "source must match [A-Z0-9]{1,8}";
  });
  app.add_option("--market", market, "market suffix of generated symbols");
  app.add_option("--symbols", symbols, "number of symbols")->check(CLI::Range(1u, 10'000'000u));
  app.add_option("--rate", rate, "events per second (0 = unpaced)");
  auto* cnt = app.add_option("--count", count, "number of events");
  app.add_option("--duration-ms", duration_ms, "run length; emits rate*duration events")->excludes(cnt);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--trade-pct", trade_pct, "percentage of trades")->check(CLI::Range(0u, 100u));
  if (auto code = mdf::tools::parse_cli(app, argc, argv)) return *code;

  if (target.empty() == out.empty()) {
    std::cerr << "feedgen: exactly one of --target or --out is required\n";
    return 2;
  }
  if (!count && !duration_ms) {
    std::cerr << "feedgen: one of --count or --duration-ms is required\n";
    return 2;
  }
  if (duration_ms && rate == 0) {
    std::cerr << "feedgen: --duration-ms needs a non-zero --rate\n";
    return 2;
  }
  const std::uint64_t total = count ? *count : *duration_ms * rate / 1000;
  const bool binary = format == "binary";

  mdf::SyntheticFeed gen({source, symbols, seed, trade_pct, market});

  if (!out.empty()) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (out != "-") {
      file.open(out, std::ios::binary | std::ios::trunc);
      if (!file) {
        std::cerr << "feedgen: cannot write " << out << "\n";
        return 1;
      }
      os = &file;
    }
    for (std::uint64_t i = 0; i < total; ++i) {
      const auto ts = kFileEpochMs + (rate ? i * 1000 / rate : 0);
      const auto e = gen.next(ts);
      if (binary) {
        const auto b = mdf::encode_binary_event(e);
        os->write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
      } else {
        *os << mdf::format_text_line(e) << '\n';
      }
    }
    os->flush();
    return *os ? 0 : 1;
  }

  mdf::tools::Endpoint ep;
  try {
    ep = mdf::tools::parse_endpoint(target);
  } catch (const std::exception& e) {
    std::cerr << "feedgen: " << e.what() << "\n";
    return 2;
  }
  const int fd = mdf::tools::tcp_connect(ep);
  if (fd < 0) {
    std::cerr << "feedgen: cannot connect to " << target << ": " << std::strerror(errno) << "\n";
    return 1;
  }
  const auto hello = mdf::encode_message(mdf::HelloMsg{source, mdf::PeerKind::Feed, ""});
  if (!mdf::tools::write_all(fd, hello.data(), hello.size())) {
    std::cerr << "feedgen: connection lost\n";
    return 1;
  }
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; i < total; ++i) {
    if (rate) std::this_thread::sleep_until(start + std::chrono::microseconds(i * 1'000'000 / rate));
    const auto e = gen.next(mdf::tools::wall_ms());
    bool ok;
    if (binary) {
      const auto b = mdf::encode_binary_event(e);
      ok = mdf::tools::write_all(fd, b.data(), b.size());
    } else {
      const auto line = mdf::format_text_line(e) + "\n";
      ok = mdf::tools::write_all(fd, line.data(), line.size());
    }
    if (!ok) {
      std::cerr << "feedgen: connection lost after " << i << " events\n";
      return 1;
    }
  }
  ::close(fd);
  return 0;
}
