#pragma once

#include "oracles.hpp"
#include "support.hpp"

namespace testsupport {

struct Trace {
  std::vector<oracle::TraceEvent> events;
  std::vector<PacketRecord> records;
};

inline std::string mac_text(const MacAddr& m) { return m.to_string(); }

inline RawFrame frame_for(const oracle::TraceEvent& e) {
  Ipv4Addr s(e.src), d(e.dst);
  auto sm = mac_of(static_cast<int>(e.src & 0xff)), dm = mac_of(static_cast<int>(e.dst & 0xff));
  Bytes body;
  std::uint16_t type = ethertype::ipv4;
  switch (e.kind) {
    case oracle::TraceEvent::TcpSyn: body = tcp(s, d, 40000, e.dport, tcpflag::syn); break;
    case oracle::TraceEvent::TcpSynAck: body = tcp(s, d, 40000, e.dport, tcpflag::syn | tcpflag::ack); break;
    case oracle::TraceEvent::TcpAck: body = tcp(s, d, 40000, e.dport, tcpflag::ack); break;
    case oracle::TraceEvent::Udp: body = udp(s, d, 5353, e.dport); break;
    case oracle::TraceEvent::Icmp: body = icmp_echo(s, d, true, 7, 1); break;
    case oracle::TraceEvent::ArpReply:
    case oracle::TraceEvent::ArpRequest: {
      type = ethertype::arp;
      auto claimed = *MacAddr::parse(e.mac);
      sm = claimed;
      body = e.kind == oracle::TraceEvent::ArpReply ? arp(ArpPacket::reply, claimed, s, dm, d)
                                                     : arp(ArpPacket::request, claimed, s, MacAddr{}, d);
      break;
    }
  }
  return frame_at(ether(sm, dm, type, body), base_ns + e.t);
}

/// Random trace of at most `max_packets` events with bursts, so that every
/// detector fires on some seeds and stays quiet on others.
inline Trace random_trace(std::uint64_t seed, std::size_t max_packets = 1000) {
  auto rng = rng_for(seed);
  Trace tr;
  const std::size_t n = uniform<std::size_t>(rng, 0, max_packets);
  const int hosts = uniform<int>(rng, 2, 6);
  std::vector<std::uint32_t> ips;
  for (int h = 0; h < hosts; ++h) ips.push_back(ip_of(80 + h).value);
  std::int64_t t = 0;
  while (tr.events.size() < n) {
    // quiet stretch or burst
    bool burst = rng() % 4 == 0;
    auto len = uniform<std::size_t>(rng, 1, burst ? 150 : 20);
    auto gap_hi = burst ? std::int64_t{3'000'000} : std::int64_t{400'000'000};
    auto src = ips[rng() % ips.size()];
    for (std::size_t i = 0; i < len && tr.events.size() < n; ++i) {
      t += uniform<std::int64_t>(rng, 0, gap_hi);
      oracle::TraceEvent e{};
      e.t = t;
      e.src = rng() % 5 == 0 ? ips[rng() % ips.size()] : src;
      e.dst = ips[rng() % ips.size()];
      auto k = rng() % 20;
      e.kind = k < 6    ? oracle::TraceEvent::TcpSyn
               : k < 8  ? oracle::TraceEvent::TcpSynAck
               : k < 10 ? oracle::TraceEvent::TcpAck
               : k < 15 ? oracle::TraceEvent::Udp
               : k < 17 ? oracle::TraceEvent::Icmp
               : k < 19 ? oracle::TraceEvent::ArpReply
                        : oracle::TraceEvent::ArpRequest;
      e.dport = static_cast<std::uint16_t>(burst ? uniform<int>(rng, 1, 400) : uniform<int>(rng, 1, 12));
      e.mac = mac_of(static_cast<int>(rng() % 3) + static_cast<int>(e.src & 0xff)).to_string();
      tr.events.push_back(e);
    }
  }
  std::vector<RawFrame> frames;
  for (const auto& e : tr.events) frames.push_back(frame_for(e));
  tr.records = dissect_all(frames);
  return tr;
}

inline oracle::RefAlert to_ref(const Alert& a) {
  oracle::RefAlert r{a.subject, a.window_start.to_ns() - base_ns, a.window_end.to_ns() - base_ns, a.evidence.packets,
                     {a.evidence.ports.begin(), a.evidence.ports.end()}, {}};
  for (const auto& m : a.evidence.macs) r.macs.insert(m.to_string());
  return r;
}

inline std::vector<oracle::RefAlert> to_ref(const std::vector<Alert>& alerts) {
  std::vector<oracle::RefAlert> out;
  for (const auto& a : alerts) out.push_back(to_ref(a));
  auto key = [](const oracle::RefAlert& x) { return std::tie(x.subject, x.start); };
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  return out;
}

inline std::vector<oracle::RefAlert> sorted(std::vector<oracle::RefAlert> v) {
  auto key = [](const oracle::RefAlert& x) { return std::tie(x.subject, x.start); };
  std::sort(v.begin(), v.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  return v;
}

}  // namespace testsupport
