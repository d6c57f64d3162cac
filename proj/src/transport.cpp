#include "treelet/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <sstream>
#include <thread>

namespace treelet {

namespace {

class Mailbox {
 public:
  void push(Frame f) {
    {
      std::lock_guard lock(mu_);
      q_.push_back(std::move(f));
    }
    cv_.notify_one();
  }

  void close(std::string why) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return;
      closed_ = true;
      why_ = std::move(why);
    }
    cv_.notify_all();
  }

  std::optional<Frame> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [this] { return !q_.empty() || closed_; })) return std::nullopt;
    if (q_.empty()) throw TransportError(why_);
    Frame f = std::move(q_.front());
    q_.pop_front();
    return f;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Frame> q_;
  bool closed_ = false;
  std::string why_;
};

struct InProcShared {
  explicit InProcShared(std::size_t p) : workers(p), boxes(p * p) {}
  std::size_t workers;
  std::vector<Mailbox> boxes;  // [from * P + to]
};

class InProcTransport final : public Transport {
 public:
  InProcTransport(std::shared_ptr<InProcShared> shared, WorkerId rank) : shared_(std::move(shared)), rank_(rank) {}

  WorkerId rank() const noexcept override { return rank_; }
  std::size_t size() const noexcept override { return shared_->workers; }
  std::string kind() const override { return "inproc"; }

  void send(WorkerId to, Frame frame) override {
    if (to >= shared_->workers) throw TransportError("inproc: no worker " + std::to_string(to));
    shared_->boxes[rank_ * shared_->workers + to].push(std::move(frame));
  }

  void abort(const std::string& why) override {
    for (auto& b : shared_->boxes) b.close(why);
  }

  std::optional<Frame> recv(WorkerId from, std::chrono::milliseconds timeout) override {
    if (from >= shared_->workers) throw TransportError("inproc: no worker " + std::to_string(from));
    return shared_->boxes[from * shared_->workers + rank_].pop(timeout);
  }

 private:
  std::shared_ptr<InProcShared> shared_;
  WorkerId rank_;
};

[[noreturn]] void sys_fail(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* p, std::size_t n) {
  while (n > 0) {
    const auto w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      sys_fail("socket send");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

// false on clean EOF before any byte
bool read_all(int fd, std::uint8_t* p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const auto r = ::recv(fd, p + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw TransportError("socket closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      sys_fail("socket recv");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::uint32_t load_be32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
}

void store_be32(std::uint8_t* p, std::uint32_t x) {
  p[0] = static_cast<std::uint8_t>(x >> 24);
  p[1] = static_cast<std::uint8_t>(x >> 16);
  p[2] = static_cast<std::uint8_t>(x >> 8);
  p[3] = static_cast<std::uint8_t>(x);
}

int listen_on(std::uint16_t port, std::uint16_t* bound) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(fd);
    sys_fail("bind port " + std::to_string(port));
  }
  if (::listen(fd, 64) < 0) {
    ::close(fd);
    sys_fail("listen");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (bound) *bound = ntohs(addr.sin_port);
  return fd;
}

int connect_to(const PeerAddress& peer, std::chrono::steady_clock::time_point deadline) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(peer.port);
  if (::getaddrinfo(peer.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve " + peer.host);
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
      ::freeaddrinfo(res);
      sys_fail("socket");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return fd;
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) {
      ::freeaddrinfo(res);
      throw TransportError("could not connect to " + peer.host + ":" + port);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

class SocketTransport final : public Transport {
 public:
  SocketTransport(WorkerId rank, const std::vector<PeerAddress>& peers, int listen_fd,
                  std::chrono::milliseconds connect_deadline)
      : rank_(rank), workers_(peers.size()), fds_(peers.size(), -1), boxes_(peers.size()), send_mu_(peers.size()) {
    const auto deadline = std::chrono::steady_clock::now() + connect_deadline;
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(connect_deadline.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>(connect_deadline.count() % 1000 * 1000);
    ::setsockopt(listen_fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);  // bounds accept()
    try {
      for (WorkerId q = 0; q < rank_; ++q) {
        const int fd = connect_to(peers[q], deadline);
        std::uint8_t hello[4];
        store_be32(hello, rank_);
        write_all(fd, hello, 4);
        fds_[q] = fd;
      }
      for (std::size_t n = rank_ + 1; n < workers_; ++n) {
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) sys_fail("accept");
        std::uint8_t hello[4];
        const bool ok = read_all(fd, hello, 4);
        const auto q = ok ? load_be32(hello) : 0;
        if (!ok || q <= rank_ || q >= workers_ || fds_[q] >= 0) {
          ::close(fd);
          throw TransportError(ok ? "unexpected handshake from rank " + std::to_string(q)
                                  : std::string("peer closed during handshake"));
        }
        fds_[q] = fd;
      }
    } catch (...) {
      ::close(listen_fd);
      for (int fd : fds_)
        if (fd >= 0) ::close(fd);
      throw;
    }
    ::close(listen_fd);
    for (WorkerId q = 0; q < workers_; ++q) {
      if (q == rank_) continue;
      int one = 1;
      ::setsockopt(fds_[q], IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      readers_.emplace_back([this, q] { reader(q); });
    }
  }

  ~SocketTransport() override {
    for (int fd : fds_)
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    for (auto& t : readers_) t.join();
    for (int fd : fds_)
      if (fd >= 0) ::close(fd);
  }

  WorkerId rank() const noexcept override { return rank_; }
  std::size_t size() const noexcept override { return workers_; }
  std::string kind() const override { return "socket"; }

  void send(WorkerId to, Frame frame) override {
    if (to >= workers_ || to == rank_) throw TransportError("socket: no link to worker " + std::to_string(to));
    std::uint8_t head[8];
    store_be32(head, static_cast<std::uint32_t>(4 + frame.payload.size()));
    store_be32(head + 4, frame.meta);
    std::lock_guard lock(send_mu_[to]);
    write_all(fds_[to], head, 8);
    write_all(fds_[to], frame.payload.data(), frame.payload.size());
  }

  void abort(const std::string& why) override {
    for (auto& b : boxes_) b.close(why);
    for (int fd : fds_)
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  }

  std::optional<Frame> recv(WorkerId from, std::chrono::milliseconds timeout) override {
    if (from >= workers_ || from == rank_) throw TransportError("socket: no link to worker " + std::to_string(from));
    return boxes_[from].pop(timeout);
  }

 private:
  void reader(WorkerId q) {
    try {
      for (;;) {
        std::uint8_t head[4];
        if (!read_all(fds_[q], head, 4)) break;
        const auto len = load_be32(head);
        if (len < 4) throw TransportError("frame shorter than its meta id");
        std::uint8_t meta[4];
        read_all(fds_[q], meta, 4);
        Frame f;
        f.meta = load_be32(meta);
        f.payload.resize(len - 4);
        if (len > 4) read_all(fds_[q], f.payload.data(), f.payload.size());
        boxes_[q].push(std::move(f));
      }
      boxes_[q].close("worker " + std::to_string(q) + " closed its connection");
    } catch (const std::exception& e) {
      boxes_[q].close(std::string("link to worker ") + std::to_string(q) + ": " + e.what());
    }
  }

  WorkerId rank_;
  std::size_t workers_;
  std::vector<int> fds_;
  std::vector<Mailbox> boxes_;
  std::vector<std::mutex> send_mu_;
  std::vector<std::thread> readers_;
};

}  // namespace

std::vector<std::unique_ptr<Transport>> make_inproc_fabric(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("fabric needs at least one worker");
  auto shared = std::make_shared<InProcShared>(workers);
  std::vector<std::unique_ptr<Transport>> out;
  for (WorkerId p = 0; p < workers; ++p) out.push_back(std::make_unique<InProcTransport>(shared, p));
  return out;
}

std::vector<PeerAddress> parse_peers(const std::string& spec) {
  std::vector<PeerAddress> peers;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0) throw std::invalid_argument("bad peer address '" + item + "'");
    const int port = std::stoi(item.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::invalid_argument("bad port in '" + item + "'");
    peers.push_back({item.substr(0, colon), static_cast<std::uint16_t>(port)});
  }
  if (peers.empty()) throw std::invalid_argument("empty peer list");
  return peers;
}

std::unique_ptr<Transport> connect_socket_transport(WorkerId rank, const std::vector<PeerAddress>& peers,
                                                    std::chrono::milliseconds connect_deadline) {
  if (rank >= peers.size()) throw std::invalid_argument("rank outside peer list");
  const int fd = listen_on(peers[rank].port, nullptr);
  return std::make_unique<SocketTransport>(rank, peers, fd, connect_deadline);
}

std::vector<std::unique_ptr<Transport>> make_loopback_socket_fabric(std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("fabric needs at least one worker");
  std::vector<PeerAddress> peers(workers);
  std::vector<int> fds(workers);
  for (std::size_t p = 0; p < workers; ++p) {
    fds[p] = listen_on(0, &peers[p].port);
    peers[p].host = "127.0.0.1";
  }
  std::vector<std::unique_ptr<Transport>> out(workers);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t p = 0; p < workers; ++p)
    threads.emplace_back([&, p] {
      try {
        out[p] = std::make_unique<SocketTransport>(static_cast<WorkerId>(p), peers, fds[p], std::chrono::seconds(10));
      } catch (...) {
        errors[p] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace treelet
