#pragma once

// Minimal blocking/non-blocking TCP helpers over POSIX sockets.

#include <cstdint>
#include <optional>
#include <string>

namespace mdf::tools {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port" or ":port". Throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

// Returns a connected socket or -1 (errno set).
int tcp_connect(const Endpoint& ep);
// Returns a listening socket. Throws std::runtime_error.
int tcp_listen(const Endpoint& ep);

void set_nonblocking(int fd);
// Writes everything, retrying on EINTR/EAGAIN. False on error.
bool write_all(int fd, const void* data, std::size_t len);

std::uint64_t wall_ms();

}  // namespace mdf::tools
