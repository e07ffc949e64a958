#pragma once

#include <array>
#include <cinttypes>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sniff/frame.hpp"
#include "sniff/http.hpp"
#include "sniff/layers.hpp"

namespace sniff {

enum class Protocol { Ethernet, Arp, Ipv4, Icmp, Udp, Tcp, Http };

inline constexpr std::array<Protocol, 7> all_protocols{Protocol::Ethernet, Protocol::Arp, Protocol::Ipv4,
                                                       Protocol::Icmp,     Protocol::Udp, Protocol::Tcp,
                                                       Protocol::Http};

/// Display name as shown in the Protocol column.
constexpr std::string_view display_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::Ethernet: return "Ethernet";
    case Protocol::Arp: return "ARP";
    case Protocol::Ipv4: return "IPv4";
    case Protocol::Icmp: return "ICMP";
    case Protocol::Udp: return "UDP";
    case Protocol::Tcp: return "TCP";
    case Protocol::Http: return "HTTP";
  }
  return "?";
}

/// Lowercase name used by filter expressions.
constexpr std::string_view filter_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::Ethernet: return "ethernet";
    case Protocol::Arp: return "arp";
    case Protocol::Ipv4: return "ipv4";
    case Protocol::Icmp: return "icmp";
    case Protocol::Udp: return "udp";
    case Protocol::Tcp: return "tcp";
    case Protocol::Http: return "http";
  }
  return "?";
}

inline constexpr std::string_view raw_protocol_name = "RAW";

using Layer = std::variant<EthernetHeader, ArpPacket, Ipv4Header, IcmpMessage, UdpHeader, TcpHeader, HttpSummary>;

inline Protocol layer_protocol(const Layer& layer) noexcept {
  // Variant alternatives are declared in Protocol order.
  return static_cast<Protocol>(layer.index());
}

/// One row of the packet list: No | Time | Source | Destination | Protocol | Length | Info.
struct SummaryRow {
  std::uint64_t no = 0;
  std::int64_t time_ns = 0;  // relative to the session's first packet
  std::string source;
  std::string destination;
  std::string protocol;
  std::uint32_t length = 0;
  std::string info;

  /// Seconds with nine fractional digits, e.g. "0.001500000".
  std::string time_text() const {
    char buf[32];
    auto mag = time_ns < 0 ? -static_cast<std::uint64_t>(time_ns) : static_cast<std::uint64_t>(time_ns);
    std::snprintf(buf, sizeof buf, "%s%" PRIu64 ".%09" PRIu64, time_ns < 0 ? "-" : "", mag / 1'000'000'000,
                  mag % 1'000'000'000);
    return buf;
  }

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct PacketRecord {
  std::uint64_t index = 0;  // 1-based capture ordinal
  RawFrame frame;
  std::vector<Layer> layers;  // outer to inner
  std::vector<std::string> notes;
  SummaryRow summary;

  template <typename T>
  const T* find() const noexcept {
    for (const auto& l : layers)
      if (auto* p = std::get_if<T>(&l)) return p;
    return nullptr;
  }

  bool has(Protocol p) const noexcept {
    for (const auto& l : layers)
      if (layer_protocol(l) == p) return true;
    return false;
  }

  std::optional<Protocol> top() const noexcept {
    if (layers.empty()) return std::nullopt;
    return layer_protocol(layers.back());
  }
};

namespace detail {

inline std::string hex16(std::uint16_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%04x", v);
  return buf;
}

inline std::string tcp_flag_text(const TcpHeader& t) {
  static constexpr std::pair<std::uint16_t, std::string_view> names[] = {
      {tcpflag::fin, "FIN"}, {tcpflag::syn, "SYN"}, {tcpflag::rst, "RST"},
      {tcpflag::psh, "PSH"}, {tcpflag::ack, "ACK"}, {tcpflag::urg, "URG"},
      {tcpflag::ece, "ECE"}, {tcpflag::cwr, "CWR"}, {tcpflag::ns, "NS"}};
  std::string s;
  for (auto [bit, name] : names) {
    if (!t.has(bit)) continue;
    if (!s.empty()) s += ", ";
    s += name;
  }
  return "[" + s + "]";
}

inline std::string icmp_info(const IcmpMessage& m) {
  auto code = " (code " + std::to_string(m.icmp_code) + ")";
  switch (m.icmp_type) {
    case IcmpMessage::echo_request:
    case IcmpMessage::echo_reply:
      return std::string("Echo (ping) ") + (m.icmp_type == IcmpMessage::echo_request ? "request" : "reply") +
             " id=" + std::to_string(*m.ident) + " seq=" + std::to_string(*m.seq);
    case IcmpMessage::dest_unreachable: return "Destination unreachable" + code;
    case IcmpMessage::time_exceeded: return "Time exceeded" + code;
    default: return "ICMP type " + std::to_string(m.icmp_type) + code;
  }
}

inline std::string arp_info(const ArpPacket& a) {
  if (a.opcode == ArpPacket::request) {
    if (a.sender_ip == a.target_ip) return "Gratuitous ARP for " + a.sender_ip.to_string() + " (Request)";
    return "Who has " + a.target_ip.to_string() + "? Tell " + a.sender_ip.to_string();
  }
  if (a.opcode == ArpPacket::reply) return a.sender_ip.to_string() + " is at " + a.sender_mac.to_string();
  return "ARP opcode " + std::to_string(a.opcode);
}

struct LayerInfo {
  std::string operator()(const EthernetHeader& e) const {
    if (e.is_ethernet2()) return "Ethernet II, type " + hex16(e.ethertype);
    return "IEEE 802.3, length " + std::to_string(e.ethertype);
  }
  std::string operator()(const ArpPacket& a) const { return arp_info(a); }
  std::string operator()(const Ipv4Header& h) const {
    if (h.is_fragment()) return "Fragmented IPv4";
    return "IPv4 protocol " + std::to_string(h.protocol);
  }
  std::string operator()(const IcmpMessage& m) const { return icmp_info(m); }
  std::string operator()(const UdpHeader& u) const {
    return std::to_string(u.src_port) + " -> " + std::to_string(u.dst_port) + " Len=" +
           std::to_string(u.length - UdpHeader::size);
  }
  std::string operator()(const TcpHeader& t) const {
    return std::to_string(t.src_port) + " -> " + std::to_string(t.dst_port) + " " + tcp_flag_text(t) +
           " Seq=" + std::to_string(t.seq) + " Ack=" + std::to_string(t.ack) + " Win=" + std::to_string(t.window) +
           " Len=" + std::to_string(tcp_payload_len);
  }
  std::string operator()(const HttpSummary& h) const {
    if (h.is_request()) return h.method + " " + h.target + " " + h.version;
    auto s = h.version + " " + std::to_string(h.status_code);
    if (!h.reason.empty()) s += " " + h.reason;
    return s;
  }

  std::size_t tcp_payload_len = 0;
};

}  // namespace detail

/// Runs the layer decoders outer to inner. Never throws: the first decode
/// failure ends the stack and becomes a note.
inline PacketRecord dissect(RawFrame frame, std::uint64_t index, Timestamp t0) {
  PacketRecord rec;
  rec.index = index;
  rec.frame = std::move(frame);
  if (rec.frame.truncated()) rec.notes.emplace_back("truncated");

  std::optional<DecodeErrc> failure;
  std::size_t tcp_payload_len = 0;
  auto note_all = [&rec](std::vector<std::string>& notes) {
    for (auto& n : notes) rec.notes.push_back(std::move(n));
  };

  try {
    ByteSpan data(rec.frame.data);
    auto eth = decode_ethernet(data);
    rec.layers.emplace_back(eth.header);

    if (eth.header.ethertype == ethertype::arp) {
      rec.layers.emplace_back(decode_arp(eth.payload));
    } else if (eth.header.ethertype == ethertype::ipv4) {
      auto ip = decode_ipv4(eth.payload);
      note_all(ip.notes);
      const auto hdr_len = ip.header.header_len();
      const bool complete = ip.header.total_len >= hdr_len && ip.payload.size() == ip.header.total_len - hdr_len;
      const auto src = ip.header.src;
      const auto dst = ip.header.dst;
      const auto proto = ip.header.protocol;
      const bool fragment = ip.header.is_fragment();
      rec.layers.emplace_back(std::move(ip.header));

      if (!fragment) {
        if (proto == ipproto::icmp) {
          auto msg = decode_icmp(ip.payload);
          if (complete && fold_ones_complement(ones_complement_accumulate(0, ip.payload)) != 0xffff)
            rec.notes.emplace_back("icmp checksum invalid");
          rec.layers.emplace_back(std::move(msg));
        } else if (proto == ipproto::udp) {
          auto udp = decode_udp(ip.payload);
          note_all(udp.notes);
          if (udp.header.checksum != 0 && ip.payload.size() >= udp.header.length &&
              !verify_transport_checksum(src, dst, ipproto::udp, ip.payload.first(udp.header.length)))
            rec.notes.emplace_back("udp checksum invalid");
          rec.layers.emplace_back(udp.header);
        } else if (proto == ipproto::tcp) {
          auto tcp = decode_tcp(ip.payload);
          if (complete && !verify_transport_checksum(src, dst, ipproto::tcp, ip.payload))
            rec.notes.emplace_back("tcp checksum invalid");
          tcp_payload_len = tcp.payload.size();
          auto http = detect_http(tcp.payload, tcp.header.src_port, tcp.header.dst_port);
          rec.layers.emplace_back(std::move(tcp.header));
          if (http) {
            if (http->truncated) rec.notes.emplace_back("http headers truncated");
            rec.layers.emplace_back(std::move(*http));
          }
        }
      }
    }
  } catch (const DecodeError& e) {
    failure = e.code();
    rec.notes.emplace_back(e.what());
  }

  auto& row = rec.summary;
  row.no = index;
  row.time_ns = rec.frame.ts.to_ns() - t0.to_ns();
  row.length = rec.frame.orig_len;
  if (rec.layers.empty()) {
    row.protocol = raw_protocol_name;
    row.info = "Frame too short (" + std::to_string(rec.frame.cap_len()) + " bytes)";
  } else {
    row.protocol = display_name(layer_protocol(rec.layers.back()));
    row.info = std::visit(detail::LayerInfo{tcp_payload_len}, rec.layers.back());
    if (failure) row.info += " [" + std::string(to_string(*failure)) + "]";
    if (auto* ip = rec.find<Ipv4Header>()) {
      row.source = ip->src.to_string();
      row.destination = ip->dst.to_string();
    } else if (auto* arp = rec.find<ArpPacket>()) {
      row.source = arp->sender_ip.to_string();
      row.destination = arp->target_ip.to_string();
    } else {
      const auto& eth = std::get<EthernetHeader>(rec.layers.front());
      row.source = eth.src.to_string();
      row.destination = eth.dst.to_string();
    }
  }
  return rec;
}

}  // namespace sniff
