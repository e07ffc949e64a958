#pragma once

// Live capture through a Linux AF_PACKET socket.

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>

#include <arpa/inet.h>
#include <linux/if_ether.h>
#include <linux/if_packet.h>
#include <net/if.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "sniff/capture.hpp"

namespace sniff {

struct LiveOptions {
  std::string interface;
  bool promiscuous = true;
  std::uint32_t snaplen = 262144;
};

class LiveSource : public CaptureSource {
 public:
  explicit LiveSource(LiveOptions opts) : opts_(std::move(opts)) {}
  ~LiveSource() override { close(); }

  void open() override {
    unsigned idx = if_nametoindex(opts_.interface.c_str());
    if (idx == 0) throw CaptureError(CaptureError::Code::OpenFailed, "no such interface: " + opts_.interface);
    fd_ = ::socket(AF_PACKET, SOCK_RAW, htons(ETH_P_ALL));
    if (fd_ < 0) {
      int err = errno;
      if (err == EPERM || err == EACCES)
        throw CaptureError(CaptureError::Code::PermissionDenied,
                           "capturing on " + opts_.interface + " requires CAP_NET_RAW");
      throw CaptureError(CaptureError::Code::OpenFailed, "socket: " + std::string(std::strerror(err)));
    }
    sockaddr_ll sll{};
    sll.sll_family = AF_PACKET;
    sll.sll_protocol = htons(ETH_P_ALL);
    sll.sll_ifindex = static_cast<int>(idx);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sll), sizeof sll) != 0) fail("bind");
    if (opts_.promiscuous) {
      packet_mreq mr{};
      mr.mr_ifindex = static_cast<int>(idx);
      mr.mr_type = PACKET_MR_PROMISC;
      if (::setsockopt(fd_, SOL_PACKET, PACKET_ADD_MEMBERSHIP, &mr, sizeof mr) != 0) fail("promiscuous mode");
    }
    int on = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_TIMESTAMPNS, &on, sizeof on);
    buf_.resize(std::max<std::uint32_t>(opts_.snaplen, 64));
  }

  std::optional<RawFrame> next(std::stop_token stop) override {
    while (fd_ >= 0 && !stop.stop_requested()) {
      pollfd p{fd_, POLLIN, 0};
      int rc = ::poll(&p, 1, 100);
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) {
        error_ = "poll: " + std::string(std::strerror(errno));
        return std::nullopt;
      }
      if (rc == 0) continue;

      iovec iov{buf_.data(), buf_.size()};
      alignas(cmsghdr) char control[256];
      msghdr msg{};
      msg.msg_iov = &iov;
      msg.msg_iovlen = 1;
      msg.msg_control = control;
      msg.msg_controllen = sizeof control;
      auto n = ::recvmsg(fd_, &msg, MSG_TRUNC);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        error_ = "recvmsg: " + std::string(std::strerror(errno));
        return std::nullopt;
      }
      RawFrame f;
      f.orig_len = static_cast<std::uint32_t>(n);
      auto cap = std::min<std::size_t>(static_cast<std::size_t>(n), buf_.size());
      f.data.assign(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(cap));
      f.ts = Timestamp::from_ns(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                    std::chrono::system_clock::now().time_since_epoch())
                                    .count());
      for (auto* c = CMSG_FIRSTHDR(&msg); c; c = CMSG_NXTHDR(&msg, c)) {
        if (c->cmsg_level == SOL_SOCKET && c->cmsg_type == SCM_TIMESTAMPNS) {
          timespec ts;
          std::memcpy(&ts, CMSG_DATA(c), sizeof ts);
          f.ts = {ts.tv_sec, static_cast<std::uint32_t>(ts.tv_nsec)};
        }
      }
      return f;
    }
    return std::nullopt;
  }

  void close() override {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::string describe() const override { return "live:" + opts_.interface; }
  bool is_live() const override { return true; }
  std::optional<std::string> error() const override { return error_; }
  const LiveOptions& options() const noexcept { return opts_; }

 private:
  [[noreturn]] void fail(const char* what) {
    int err = errno;
    close();
    auto code = (err == EPERM || err == EACCES) ? CaptureError::Code::PermissionDenied : CaptureError::Code::OpenFailed;
    throw CaptureError(code, std::string(what) + " on " + opts_.interface + ": " + std::strerror(err));
  }

  LiveOptions opts_;
  int fd_ = -1;
  std::vector<std::uint8_t> buf_;
  std::optional<std::string> error_;
};

}  // namespace sniff
