#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sniff/dissect.hpp"
#include "sniff/pcap.hpp"

namespace testsupport {

using namespace sniff;
using nlohmann::json;

inline std::filesystem::path testdata(const std::string& name) { return std::filesystem::path(SNIFF_TESTDATA) / name; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<RawFrame> load_frames(const std::string& fixture) {
  std::ifstream in(testdata(fixture + ".pcap"), std::ios::binary);
  return read_pcap(in).frames;
}

inline std::vector<PacketRecord> dissect_all(const std::vector<RawFrame>& frames) {
  std::vector<PacketRecord> out;
  if (frames.empty()) return out;
  for (std::size_t i = 0; i < frames.size(); ++i) out.push_back(dissect(frames[i], i + 1, frames.front().ts));
  return out;
}

inline std::vector<PacketRecord> load_records(const std::string& fixture) { return dissect_all(load_frames(fixture)); }

struct ReferenceRow {
  std::uint64_t index;
  std::string source, destination, protocol;
  std::uint32_t length;
};

/// Rows exported by scripts/reference_dissect.py.
inline std::vector<ReferenceRow> load_reference_columns(const std::string& fixture) {
  std::ifstream in(testdata(fixture + ".columns.tsv"));
  std::vector<ReferenceRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      auto tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 5) continue;
    rows.push_back({std::stoull(cols[0]), cols[1], cols[2], cols[3], static_cast<std::uint32_t>(std::stoul(cols[4]))});
  }
  return rows;
}

inline std::vector<json> load_reference_fields(const std::string& fixture) {
  std::ifstream in(testdata(fixture + ".fields.jsonl"));
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// ------------------------------------------------------------ frame builders

inline MacAddr mac_of(int host) { return MacAddr{{0x00, 0x1b, 0x21, 0x0a, 0x32, static_cast<std::uint8_t>(host)}}; }
inline Ipv4Addr ip_of(int host) { return Ipv4Addr(10, 10, 50, static_cast<std::uint8_t>(host)); }

inline Bytes concat(Bytes a, const Bytes& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline Bytes ether(MacAddr src, MacAddr dst, std::uint16_t type, const Bytes& payload) {
  return concat(encode(EthernetHeader{dst, src, type}), payload);
}

inline Bytes ipv4(Ipv4Addr src, Ipv4Addr dst, std::uint8_t proto, const Bytes& l4, std::uint16_t ident = 1) {
  Ipv4Header h;
  h.src = src;
  h.dst = dst;
  h.protocol = proto;
  h.ident = ident;
  h.flags = Ipv4Header::flag_df;
  h.total_len = static_cast<std::uint16_t>(20 + l4.size());
  return concat(encode(finalize(h)), l4);
}

inline Bytes udp(Ipv4Addr src, Ipv4Addr dst, std::uint16_t sp, std::uint16_t dp, const Bytes& payload = {}) {
  UdpHeader u{sp, dp, static_cast<std::uint16_t>(8 + payload.size()), 0};
  auto seg = concat(encode(u), payload);
  auto c = transport_checksum(src, dst, ipproto::udp, seg);
  u.checksum = c == 0 ? 0xffff : c;
  return ipv4(src, dst, ipproto::udp, concat(encode(u), payload));
}

inline Bytes tcp(Ipv4Addr src, Ipv4Addr dst, std::uint16_t sp, std::uint16_t dp, std::uint16_t flags,
                 const Bytes& payload = {}, std::uint32_t seq = 1000, std::uint32_t ack = 0) {
  TcpHeader t;
  t.src_port = sp;
  t.dst_port = dp;
  t.flags = flags;
  t.seq = seq;
  t.ack = ack;
  t.window = 1024;
  auto seg = concat(encode(t), payload);
  t.checksum = transport_checksum(src, dst, ipproto::tcp, seg);
  return ipv4(src, dst, ipproto::tcp, concat(encode(t), payload));
}

inline Bytes icmp_echo(Ipv4Addr src, Ipv4Addr dst, bool request, std::uint16_t ident, std::uint16_t seq) {
  IcmpMessage m;
  m.icmp_type = request ? IcmpMessage::echo_request : IcmpMessage::echo_reply;
  m.ident = ident;
  m.seq = seq;
  m.payload = Bytes(32, 0x61);
  auto body = encode(m);
  m.checksum = internet_checksum(body);
  return ipv4(src, dst, ipproto::icmp, encode(m));
}

inline Bytes arp(std::uint16_t op, MacAddr smac, Ipv4Addr sip, MacAddr tmac, Ipv4Addr tip) {
  ArpPacket a;
  a.opcode = op;
  a.sender_mac = smac;
  a.sender_ip = sip;
  a.target_mac = tmac;
  a.target_ip = tip;
  return encode(a);
}

inline RawFrame frame_at(Bytes data, std::int64_t ns) {
  RawFrame f;
  f.ts = Timestamp::from_ns(ns);
  f.orig_len = static_cast<std::uint32_t>(data.size());
  f.data = std::move(data);
  return f;
}

inline constexpr std::int64_t base_ns = 1'476'349'200'000'000'000;  // an arbitrary fixed epoch

// -------------------------------------------------------------- randomness

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + 1); }

template <typename T>
T uniform(std::mt19937_64& rng, T lo, T hi) {
  if constexpr (std::is_floating_point_v<T>)
    return std::uniform_real_distribution<T>(lo, hi)(rng);
  else
    return static_cast<T>(std::uniform_int_distribution<long long>(lo, hi)(rng));
}

inline RawFrame random_raw_frame(std::mt19937_64& rng, TsResolution res) {
  RawFrame f;
  f.ts.sec = uniform<std::int64_t>(rng, 0, 0xffffffffLL);
  f.ts.nsec = uniform<std::uint32_t>(rng, 0, 999'999'999);
  if (res == TsResolution::Micro) f.ts.nsec -= f.ts.nsec % 1000;
  auto len = uniform<std::size_t>(rng, 0, uniform<int>(rng, 0, 3) == 0 ? 9000 : 1600);
  f.data.resize(len);
  for (auto& b : f.data) b = static_cast<std::uint8_t>(rng());
  f.orig_len = static_cast<std::uint32_t>(len) + (uniform<int>(rng, 0, 4) == 0 ? uniform<std::uint32_t>(rng, 1, 60000) : 0);
  return f;
}

}  // namespace testsupport
