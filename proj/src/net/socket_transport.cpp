// Copyright 2026 The RSM Authors.
// SPDX-License-Identifier: Apache-2.0

#include <boost/asio.hpp>
#include <list>
#include <spdlog/spdlog.h>

#include "rsm/core/errors.hpp"
#include "rsm/net/frame.hpp"
#include "rsm/net/transport.hpp"

namespace rsm::net {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

std::pair<std::string, std::string> split_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos) throw UsageError("address '" + address + "' is not host:port");
  return {address.substr(0, colon), address.substr(colon + 1)};
}

void write_all(tcp::socket& s, ByteView data) { asio::write(s, asio::buffer(data.data(), data.size())); }

}  // namespace

struct SocketTransport::Impl {
  struct Listener {
    std::string endpoint;
    std::shared_ptr<PacketHandler> handler;
    std::unique_ptr<tcp::acceptor> acceptor;
    std::thread accept_thread;
    std::mutex mu;
    std::list<std::shared_ptr<tcp::socket>> peers;
    std::list<std::thread> readers;
    bool stopping = false;
  };

  std::map<std::string, std::string> addresses;
  asio::io_context io;
  std::mutex mu;
  std::map<std::string, std::unique_ptr<Listener>> listeners;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<tcp::socket>> outgoing;

  tcp::endpoint resolve(const std::string& name) {
    auto it = addresses.find(name);
    if (it == addresses.end()) throw UsageError("no address for endpoint '" + name + "'");
    auto [host, port] = split_address(it->second);
    tcp::resolver resolver(io);
    return *resolver.resolve(host, port).begin();
  }

  static void read_loop(Listener* l, std::shared_ptr<tcp::socket> sock) {
    try {
      std::uint8_t len_buf[4];
      asio::read(*sock, asio::buffer(len_buf, 4));
      Reader lr(ByteView(len_buf, 4));
      Bytes name(lr.u32());
      asio::read(*sock, asio::buffer(name));
      std::string from = to_string(name);
      for (;;) {
        asio::read(*sock, asio::buffer(len_buf, 4));
        Reader r(ByteView(len_buf, 4));
        auto length = r.u32();
        if (length > (64u << 20)) throw FrameError("oversized frame");
        Bytes frame(len_buf, len_buf + 4);
        frame.resize(4 + length);
        asio::read(*sock, asio::buffer(frame.data() + 4, length));
        (*l->handler)(from, frame);
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(l->mu);
      if (!l->stopping) spdlog::debug("socket reader on {} ended: {}", l->endpoint, e.what());
    }
  }
};

SocketTransport::SocketTransport(std::map<std::string, std::string> addresses) : impl_(std::make_unique<Impl>()) {
  impl_->addresses = std::move(addresses);
}

SocketTransport::~SocketTransport() {
  std::vector<std::string> names;
  {
    std::lock_guard lock(impl_->mu);
    for (const auto& [n, _] : impl_->listeners) names.push_back(n);
  }
  for (const auto& n : names) detach(n);
  std::lock_guard lock(impl_->mu);
  for (auto& [_, s] : impl_->outgoing) {
    boost::system::error_code ec;
    s->close(ec);
  }
}

void SocketTransport::attach(const std::string& endpoint, PacketHandler handler) {
  auto l = std::make_unique<Impl::Listener>();
  l->endpoint = endpoint;
  l->handler = std::make_shared<PacketHandler>(std::move(handler));
  auto ep = impl_->resolve(endpoint);
  l->acceptor = std::make_unique<tcp::acceptor>(impl_->io);
  l->acceptor->open(ep.protocol());
  l->acceptor->set_option(tcp::acceptor::reuse_address(true));
  l->acceptor->bind(ep);
  l->acceptor->listen();
  auto* raw = l.get();
  l->accept_thread = std::thread([this, raw] {
    for (;;) {
      auto sock = std::make_shared<tcp::socket>(impl_->io);
      boost::system::error_code ec;
      raw->acceptor->accept(*sock, ec);
      std::lock_guard lock(raw->mu);
      if (raw->stopping) return;
      if (ec) continue;
      raw->peers.push_back(sock);
      raw->readers.emplace_back([raw, sock] { Impl::read_loop(raw, sock); });
    }
  });
  std::lock_guard lock(impl_->mu);
  impl_->listeners[endpoint] = std::move(l);
}

void SocketTransport::detach(const std::string& endpoint) {
  std::unique_ptr<Impl::Listener> l;
  {
    std::lock_guard lock(impl_->mu);
    auto it = impl_->listeners.find(endpoint);
    if (it == impl_->listeners.end()) return;
    l = std::move(it->second);
    impl_->listeners.erase(it);
  }
  {
    std::lock_guard lock(l->mu);
    l->stopping = true;
    for (auto& s : l->peers) {
      boost::system::error_code ec;
      s->shutdown(tcp::socket::shutdown_both, ec);
    }
  }
  // Wake the blocking accept.
  try {
    tcp::socket poke(impl_->io);
    poke.connect(l->acceptor->local_endpoint());
  } catch (const std::exception&) {
  }
  l->accept_thread.join();
  for (auto& t : l->readers) t.join();
  boost::system::error_code ec;
  l->acceptor->close(ec);
}

void SocketTransport::send(const std::string& from, const std::string& to, Bytes packet) {
  std::shared_ptr<tcp::socket> sock;
  std::lock_guard lock(impl_->mu);
  auto key = std::make_pair(from, to);
  try {
    auto it = impl_->outgoing.find(key);
    if (it == impl_->outgoing.end()) {
      sock = std::make_shared<tcp::socket>(impl_->io);
      sock->connect(impl_->resolve(to));
      Bytes hello;
      Writer w(hello);
      w.str(from);
      write_all(*sock, hello);
      impl_->outgoing[key] = sock;
    } else {
      sock = it->second;
    }
    write_all(*sock, packet);
  } catch (const std::exception& e) {
    // Lossy by contract: the sender retransmits.
    spdlog::debug("send {} -> {} failed: {}", from, to, e.what());
    impl_->outgoing.erase(key);
  }
}

}  // namespace rsm::net
