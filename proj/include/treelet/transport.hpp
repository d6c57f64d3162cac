#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "treelet/common.hpp"

namespace treelet {

struct Frame {
  std::uint32_t meta = 0;
  std::vector<std::uint8_t> payload;
};

/// Point-to-point endpoint of one worker. Frames between a fixed (sender, receiver)
/// pair are delivered in order.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual WorkerId rank() const noexcept = 0;
  virtual std::size_t size() const noexcept = 0;
  virtual std::string kind() const = 0;

  virtual void send(WorkerId to, Frame frame) = 0;

  /// Next frame from `from`, or nullopt after `timeout`. Throws TransportError if the
  /// link is gone.
  virtual std::optional<Frame> recv(WorkerId from, std::chrono::milliseconds timeout) = 0;

  /// Wakes every blocked receiver with a TransportError carrying `why`.
  virtual void abort(const std::string& why) = 0;
};

/// P endpoints connected by in-memory queues.
std::vector<std::unique_ptr<Transport>> make_inproc_fabric(std::size_t workers);

struct PeerAddress {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port,host:port,...".
std::vector<PeerAddress> parse_peers(const std::string& spec);

/// Full TCP mesh endpoint for worker `rank`. Listens on peers[rank].port, connects to
/// lower ranks and accepts higher ranks. Blocks until every link is up or the
/// connect deadline passes.
std::unique_ptr<Transport> connect_socket_transport(WorkerId rank, const std::vector<PeerAddress>& peers,
                                                    std::chrono::milliseconds connect_deadline = std::chrono::seconds(30));

/// P socket endpoints inside this process over loopback (ephemeral ports).
std::vector<std::unique_ptr<Transport>> make_loopback_socket_fabric(std::size_t workers);

}  // namespace treelet
