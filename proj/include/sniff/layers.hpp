#pragma once

// Per-layer header types with their decoders and encoders. Decoders take the
// bytes starting at the layer and throw DecodeError; encoders reproduce the
// exact bytes a decoder consumed.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sniff/addr.hpp"
#include "sniff/bytes.hpp"
#include "sniff/checksum.hpp"
#include "sniff/error.hpp"

namespace sniff {

namespace ethertype {
inline constexpr std::uint16_t ipv4 = 0x0800;
inline constexpr std::uint16_t arp = 0x0806;
}  // namespace ethertype

namespace ipproto {
inline constexpr std::uint8_t icmp = 1;
inline constexpr std::uint8_t tcp = 6;
inline constexpr std::uint8_t udp = 17;
}  // namespace ipproto

/// A decoded header plus the bytes that follow it.
template <typename Header>
struct Decoded {
  Header header;
  ByteSpan payload;
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------- Ethernet

struct EthernetHeader {
  MacAddr dst;
  MacAddr src;
  std::uint16_t ethertype = 0;

  static constexpr std::size_t size = 14;

  /// Values below 0x0600 are an 802.3 length, not a type.
  bool is_ethernet2() const noexcept { return ethertype >= 0x0600; }

  friend bool operator==(const EthernetHeader&, const EthernetHeader&) = default;
};

inline Decoded<EthernetHeader> decode_ethernet(ByteSpan data) {
  if (data.size() < EthernetHeader::size) throw DecodeError(DecodeErrc::TruncatedFrame, "ethernet");
  EthernetHeader h;
  std::copy_n(data.begin(), 6, h.dst.octets.begin());
  std::copy_n(data.begin() + 6, 6, h.src.octets.begin());
  h.ethertype = load_be16(data, 12);
  return {h, data.subspan(EthernetHeader::size), {}};
}

inline Bytes encode(const EthernetHeader& h) {
  Bytes out(h.dst.octets.begin(), h.dst.octets.end());
  out.insert(out.end(), h.src.octets.begin(), h.src.octets.end());
  put_be16(out, h.ethertype);
  return out;
}

// -------------------------------------------------------------------- ARP

struct ArpPacket {
  std::uint16_t hw_type = 1;
  std::uint16_t proto_type = ethertype::ipv4;
  std::uint8_t hw_len = 6;
  std::uint8_t proto_len = 4;
  std::uint16_t opcode = 0;
  MacAddr sender_mac;
  Ipv4Addr sender_ip;
  MacAddr target_mac;
  Ipv4Addr target_ip;

  static constexpr std::size_t size = 28;
  static constexpr std::uint16_t request = 1;
  static constexpr std::uint16_t reply = 2;

  friend bool operator==(const ArpPacket&, const ArpPacket&) = default;
};

/// Ethernet/IPv4 ARP only.
inline ArpPacket decode_arp(ByteSpan data) {
  if (data.size() < 8) throw DecodeError(DecodeErrc::TruncatedFrame, "arp");
  ArpPacket a;
  a.hw_type = load_be16(data, 0);
  a.proto_type = load_be16(data, 2);
  a.hw_len = data[4];
  a.proto_len = data[5];
  if (a.hw_type != 1 || a.proto_type != ethertype::ipv4 || a.hw_len != 6 || a.proto_len != 4)
    throw DecodeError(DecodeErrc::UnsupportedArp, "arp");
  if (data.size() < ArpPacket::size) throw DecodeError(DecodeErrc::TruncatedFrame, "arp");
  a.opcode = load_be16(data, 6);
  std::copy_n(data.begin() + 8, 6, a.sender_mac.octets.begin());
  a.sender_ip = Ipv4Addr{load_be32(data, 14)};
  std::copy_n(data.begin() + 18, 6, a.target_mac.octets.begin());
  a.target_ip = Ipv4Addr{load_be32(data, 24)};
  return a;
}

inline Bytes encode(const ArpPacket& a) {
  Bytes out;
  out.reserve(ArpPacket::size);
  put_be16(out, a.hw_type);
  put_be16(out, a.proto_type);
  out.push_back(a.hw_len);
  out.push_back(a.proto_len);
  put_be16(out, a.opcode);
  out.insert(out.end(), a.sender_mac.octets.begin(), a.sender_mac.octets.end());
  put_be32(out, a.sender_ip.value);
  out.insert(out.end(), a.target_mac.octets.begin(), a.target_mac.octets.end());
  put_be32(out, a.target_ip.value);
  return out;
}

// ------------------------------------------------------------------- IPv4

struct Ipv4Header {
  std::uint8_t version = 4;
  std::uint8_t ihl = 5;
  std::uint8_t dscp_ecn = 0;
  std::uint16_t total_len = 0;
  std::uint16_t ident = 0;
  std::uint8_t flags = 0;          // bit 2 reserved, bit 1 DF, bit 0 MF
  std::uint16_t frag_offset = 0;   // 8-byte units
  std::uint8_t ttl = 64;
  std::uint8_t protocol = 0;
  std::uint16_t checksum = 0;
  Ipv4Addr src;
  Ipv4Addr dst;
  Bytes options;
  bool checksum_valid = true;

  static constexpr std::uint8_t flag_df = 0x2;
  static constexpr std::uint8_t flag_mf = 0x1;

  std::size_t header_len() const noexcept { return std::size_t{ihl} * 4; }
  bool dont_fragment() const noexcept { return flags & flag_df; }
  bool more_fragments() const noexcept { return flags & flag_mf; }
  bool is_fragment() const noexcept { return more_fragments() || frag_offset > 0; }

  friend bool operator==(const Ipv4Header&, const Ipv4Header&) = default;
};

/// The payload runs to min(total_len, available); fragments still yield their
/// payload but callers must not decode it further.
inline Decoded<Ipv4Header> decode_ipv4(ByteSpan data) {
  if (data.size() < 20) throw DecodeError(DecodeErrc::TruncatedFrame, "ipv4");
  Ipv4Header h;
  h.version = data[0] >> 4;
  h.ihl = data[0] & 0x0f;
  if (h.version != 4) throw DecodeError(DecodeErrc::BadVersion, "ipv4");
  if (h.ihl < 5) throw DecodeError(DecodeErrc::BadIhl, "ipv4");
  if (data.size() < h.header_len()) throw DecodeError(DecodeErrc::TruncatedFrame, "ipv4");
  h.dscp_ecn = data[1];
  h.total_len = load_be16(data, 2);
  h.ident = load_be16(data, 4);
  auto frag = load_be16(data, 6);
  h.flags = static_cast<std::uint8_t>(frag >> 13);
  h.frag_offset = frag & 0x1fff;
  h.ttl = data[8];
  h.protocol = data[9];
  h.checksum = load_be16(data, 10);
  h.src = Ipv4Addr{load_be32(data, 12)};
  h.dst = Ipv4Addr{load_be32(data, 16)};
  h.options.assign(data.begin() + 20, data.begin() + static_cast<std::ptrdiff_t>(h.header_len()));

  Decoded<Ipv4Header> out{std::move(h), {}, {}};
  auto& hdr = out.header;
  hdr.checksum_valid = verify_ipv4_checksum(data.first(hdr.header_len()));
  if (!hdr.checksum_valid) out.notes.emplace_back("ipv4 checksum invalid");

  std::size_t end = data.size();
  if (hdr.total_len < hdr.header_len()) {
    out.notes.emplace_back("ipv4 total length invalid");
  } else {
    end = std::min<std::size_t>(hdr.total_len, data.size());
  }
  out.payload = data.subspan(hdr.header_len(), end - hdr.header_len());
  return out;
}

inline Bytes encode(const Ipv4Header& h) {
  Bytes out;
  out.reserve(h.header_len());
  out.push_back(static_cast<std::uint8_t>((h.version << 4) | (h.ihl & 0x0f)));
  out.push_back(h.dscp_ecn);
  put_be16(out, h.total_len);
  put_be16(out, h.ident);
  put_be16(out, static_cast<std::uint16_t>((h.flags << 13) | (h.frag_offset & 0x1fff)));
  out.push_back(h.ttl);
  out.push_back(h.protocol);
  put_be16(out, h.checksum);
  put_be32(out, h.src.value);
  put_be32(out, h.dst.value);
  out.insert(out.end(), h.options.begin(), h.options.end());
  return out;
}

/// Sets ihl from the options and fills in a correct checksum.
inline Ipv4Header finalize(Ipv4Header h) {
  h.ihl = static_cast<std::uint8_t>(5 + (h.options.size() + 3) / 4);
  h.options.resize(h.header_len() - 20, 0);
  h.checksum = 0;
  auto bytes = encode(h);
  h.checksum = compute_ipv4_checksum(bytes);
  h.checksum_valid = true;
  return h;
}

// -------------------------------------------------------------------- UDP

struct UdpHeader {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t length = 8;
  std::uint16_t checksum = 0;  // 0: not computed by sender

  static constexpr std::size_t size = 8;

  friend bool operator==(const UdpHeader&, const UdpHeader&) = default;
};

inline Decoded<UdpHeader> decode_udp(ByteSpan data) {
  if (data.size() < UdpHeader::size) throw DecodeError(DecodeErrc::TruncatedFrame, "udp");
  UdpHeader h{load_be16(data, 0), load_be16(data, 2), load_be16(data, 4), load_be16(data, 6)};
  if (h.length < UdpHeader::size) throw DecodeError(DecodeErrc::BadLength, "udp");
  Decoded<UdpHeader> out{h, data.subspan(UdpHeader::size), {}};
  if (out.payload.size() > h.length - UdpHeader::size) {
    out.payload = out.payload.first(h.length - UdpHeader::size);
  } else if (out.payload.size() < h.length - UdpHeader::size) {
    out.notes.emplace_back("udp length exceeds captured data");
  }
  return out;
}

inline Bytes encode(const UdpHeader& h) {
  Bytes out;
  put_be16(out, h.src_port);
  put_be16(out, h.dst_port);
  put_be16(out, h.length);
  put_be16(out, h.checksum);
  return out;
}

// -------------------------------------------------------------------- TCP

namespace tcpflag {
inline constexpr std::uint16_t fin = 0x001;
inline constexpr std::uint16_t syn = 0x002;
inline constexpr std::uint16_t rst = 0x004;
inline constexpr std::uint16_t psh = 0x008;
inline constexpr std::uint16_t ack = 0x010;
inline constexpr std::uint16_t urg = 0x020;
inline constexpr std::uint16_t ece = 0x040;
inline constexpr std::uint16_t cwr = 0x080;
inline constexpr std::uint16_t ns = 0x100;
}  // namespace tcpflag

struct TcpHeader {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t data_offset = 5;
  std::uint8_t reserved = 0;  // the three bits between data offset and NS
  std::uint16_t flags = 0;    // nine bits, see tcpflag
  std::uint16_t window = 0;
  std::uint16_t checksum = 0;
  std::uint16_t urgent_ptr = 0;
  Bytes options;

  std::size_t header_len() const noexcept { return std::size_t{data_offset} * 4; }
  bool has(std::uint16_t flag) const noexcept { return (flags & flag) != 0; }
  bool fin() const noexcept { return has(tcpflag::fin); }
  bool syn() const noexcept { return has(tcpflag::syn); }
  bool rst() const noexcept { return has(tcpflag::rst); }
  bool psh() const noexcept { return has(tcpflag::psh); }
  bool ack_flag() const noexcept { return has(tcpflag::ack); }
  bool urg() const noexcept { return has(tcpflag::urg); }
  bool ece() const noexcept { return has(tcpflag::ece); }
  bool cwr() const noexcept { return has(tcpflag::cwr); }
  bool ns() const noexcept { return has(tcpflag::ns); }

  friend bool operator==(const TcpHeader&, const TcpHeader&) = default;
};

inline Decoded<TcpHeader> decode_tcp(ByteSpan data) {
  if (data.size() < 20) throw DecodeError(DecodeErrc::TruncatedFrame, "tcp");
  TcpHeader h;
  h.src_port = load_be16(data, 0);
  h.dst_port = load_be16(data, 2);
  h.seq = load_be32(data, 4);
  h.ack = load_be32(data, 8);
  h.data_offset = data[12] >> 4;
  h.reserved = (data[12] >> 1) & 0x7;
  h.flags = static_cast<std::uint16_t>(((data[12] & 0x1) << 8) | data[13]);
  h.window = load_be16(data, 14);
  h.checksum = load_be16(data, 16);
  h.urgent_ptr = load_be16(data, 18);
  if (h.data_offset < 5) throw DecodeError(DecodeErrc::BadDataOffset, "tcp");
  if (data.size() < h.header_len()) throw DecodeError(DecodeErrc::TruncatedFrame, "tcp");
  h.options.assign(data.begin() + 20, data.begin() + static_cast<std::ptrdiff_t>(h.header_len()));
  auto payload = data.subspan(h.header_len());
  return {std::move(h), payload, {}};
}

inline Bytes encode(const TcpHeader& h) {
  Bytes out;
  out.reserve(h.header_len());
  put_be16(out, h.src_port);
  put_be16(out, h.dst_port);
  put_be32(out, h.seq);
  put_be32(out, h.ack);
  out.push_back(static_cast<std::uint8_t>((h.data_offset << 4) | ((h.reserved & 0x7) << 1) | ((h.flags >> 8) & 1)));
  out.push_back(static_cast<std::uint8_t>(h.flags));
  put_be16(out, h.window);
  put_be16(out, h.checksum);
  put_be16(out, h.urgent_ptr);
  out.insert(out.end(), h.options.begin(), h.options.end());
  return out;
}

// ------------------------------------------------------------------- ICMP

struct IcmpMessage {
  std::uint8_t icmp_type = 0;
  std::uint8_t icmp_code = 0;
  std::uint16_t checksum = 0;
  std::array<std::uint8_t, 4> rest{};  // raw rest-of-header
  std::optional<std::uint16_t> ident;  // echo request/reply only
  std::optional<std::uint16_t> seq;
  Bytes payload;

  static constexpr std::size_t header_size = 8;
  static constexpr std::uint8_t echo_reply = 0;
  static constexpr std::uint8_t dest_unreachable = 3;
  static constexpr std::uint8_t echo_request = 8;
  static constexpr std::uint8_t time_exceeded = 11;

  bool is_echo() const noexcept { return icmp_type == echo_request || icmp_type == echo_reply; }

  friend bool operator==(const IcmpMessage&, const IcmpMessage&) = default;
};

inline IcmpMessage decode_icmp(ByteSpan data) {
  if (data.size() < IcmpMessage::header_size) throw DecodeError(DecodeErrc::TruncatedFrame, "icmp");
  IcmpMessage m;
  m.icmp_type = data[0];
  m.icmp_code = data[1];
  m.checksum = load_be16(data, 2);
  std::copy_n(data.begin() + 4, 4, m.rest.begin());
  if (m.is_echo()) {
    m.ident = load_be16(data, 4);
    m.seq = load_be16(data, 6);
  }
  m.payload.assign(data.begin() + IcmpMessage::header_size, data.end());
  return m;
}

/// Header and payload. For echo messages ident/seq override `rest`.
inline Bytes encode(const IcmpMessage& m) {
  Bytes out{m.icmp_type, m.icmp_code};
  put_be16(out, m.checksum);
  if (m.is_echo() && m.ident && m.seq) {
    put_be16(out, *m.ident);
    put_be16(out, *m.seq);
  } else {
    out.insert(out.end(), m.rest.begin(), m.rest.end());
  }
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

}  // namespace sniff
