#pragma once

// JSON forms of the domain types. These are the bodies of the HTTP API, the
// stream events and the structured report.

#include <ctime>
#include <string>

#include <nlohmann/json.hpp>

#include "sniff/analysis.hpp"
#include "sniff/capture.hpp"
#include "sniff/dissect.hpp"
#include "sniff/interfaces.hpp"

namespace sniff {

using Json = nlohmann::json;

/// RFC 3339 UTC with nanoseconds, e.g. "2026-01-02T03:04:05.000001500Z".
inline std::string format_utc(Timestamp ts) {
  std::time_t secs = static_cast<std::time_t>(ts.sec);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  auto n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + n, sizeof buf - n, ".%09uZ", static_cast<unsigned>(ts.nsec));
  return buf;
}

inline Json to_document(const SummaryRow& r) {
  return {{"no", r.no},         {"time", r.time_text()},     {"source", r.source}, {"destination", r.destination},
          {"protocol", r.protocol}, {"length", r.length}, {"info", r.info}};
}

namespace detail {

struct LayerDocument {
  Json operator()(const EthernetHeader& e) const {
    return {{"dst", e.dst.to_string()}, {"src", e.src.to_string()}, {"ethertype", e.ethertype}};
  }
  Json operator()(const ArpPacket& a) const {
    return {{"opcode", a.opcode},
            {"sender_mac", a.sender_mac.to_string()},
            {"sender_ip", a.sender_ip.to_string()},
            {"target_mac", a.target_mac.to_string()},
            {"target_ip", a.target_ip.to_string()}};
  }
  Json operator()(const Ipv4Header& h) const {
    return {{"version", h.version},
            {"ihl", h.ihl},
            {"dscp_ecn", h.dscp_ecn},
            {"total_length", h.total_len},
            {"id", h.ident},
            {"flags", {{"df", h.dont_fragment()}, {"mf", h.more_fragments()}, {"reserved", (h.flags & 4) != 0}}},
            {"fragment_offset", h.frag_offset},
            {"ttl", h.ttl},
            {"protocol", h.protocol},
            {"checksum", h.checksum},
            {"checksum_valid", h.checksum_valid},
            {"src", h.src.to_string()},
            {"dst", h.dst.to_string()},
            {"options_length", h.options.size()}};
  }
  Json operator()(const IcmpMessage& m) const {
    Json j = {{"type", m.icmp_type}, {"code", m.icmp_code}, {"checksum", m.checksum}};
    if (m.ident) j["ident"] = *m.ident;
    if (m.seq) j["seq"] = *m.seq;
    return j;
  }
  Json operator()(const UdpHeader& u) const {
    return {{"src_port", u.src_port}, {"dst_port", u.dst_port}, {"length", u.length}, {"checksum", u.checksum}};
  }
  Json operator()(const TcpHeader& t) const {
    auto flags = tcp_flag_text(t);
    return {{"src_port", t.src_port},       {"dst_port", t.dst_port}, {"seq", t.seq},
            {"ack", t.ack},                 {"data_offset", t.data_offset},
            {"flags", flags.substr(1, flags.size() - 2)},
            {"window", t.window},           {"checksum", t.checksum}, {"urgent_ptr", t.urgent_ptr}};
  }
  Json operator()(const HttpSummary& h) const {
    Json j;
    j["kind"] = h.is_request() ? "request" : "response";
    if (h.is_request()) {
      j["method"] = h.method;
      j["target"] = h.target;
    } else {
      j["status"] = h.status_code;
      j["reason"] = h.reason;
    }
    j["version"] = h.version;
    Json headers = Json::array();
    for (const auto& [k, v] : h.headers) headers.push_back({k, v});
    j["headers"] = headers;
    j["truncated"] = h.truncated;
    return j;
  }
};

}  // namespace detail

inline Json to_document(const Layer& layer) {
  return {{"protocol", display_name(layer_protocol(layer))}, {"fields", std::visit(detail::LayerDocument{}, layer)}};
}

inline Json to_document(const PacketRecord& r) {
  Json layers = Json::array();
  for (const auto& l : r.layers) layers.push_back(to_document(l));
  return {{"index", r.index},
          {"timestamp", format_utc(r.frame.ts)},
          {"captured_length", r.frame.cap_len()},
          {"summary", to_document(r.summary)},
          {"layers", layers},
          {"notes", r.notes}};
}

inline Json to_document(const SessionCounters& c) {
  return {{"seen", c.seen}, {"matched", c.matched}, {"dropped", c.dropped}, {"rejected", c.rejected()}};
}

inline Json to_document(const ProtocolStats& s) {
  Json protocols = Json::array();
  for (const auto& [name, c] : s.by_protocol)
    protocols.push_back({{"protocol", name}, {"packets", c.packets}, {"bytes", c.bytes}});
  return {{"total_packets", s.total_packets},
          {"total_bytes", s.total_bytes},
          {"duration_ns", s.duration_ns()},
          {"first", s.first ? Json(format_utc(*s.first)) : Json()},
          {"last", s.last ? Json(format_utc(*s.last)) : Json()},
          {"protocols", protocols}};
}

inline Json to_document(const Endpoint& e) { return {{"addr", e.addr.to_string()}, {"port", e.port}}; }

inline Json to_document(const Conversation& c) {
  return {{"a", to_document(c.a)},
          {"b", to_document(c.b)},
          {"protocol", c.protocol},
          {"packets", c.packets()},
          {"bytes", c.bytes()},
          {"packets_a_to_b", c.packets_ab},
          {"packets_b_to_a", c.packets_ba},
          {"bytes_a_to_b", c.bytes_ab},
          {"bytes_b_to_a", c.bytes_ba},
          {"first", format_utc(c.first)},
          {"last", format_utc(c.last)}};
}

inline Json to_document(const EchoPairing& p) {
  return {{"request_index", p.request_index},
          {"reply_index", p.reply_index ? Json(*p.reply_index) : Json()},
          {"ident", p.ident},
          {"seq", p.seq},
          {"requester", p.requester.to_string()},
          {"peer", p.peer.to_string()},
          {"request_time", format_utc(p.request_ts)},
          {"rtt_ns", p.rtt_ns ? Json(*p.rtt_ns) : Json()}};
}

inline Json to_document(const Alert& a) {
  Json ev = {{"packets", a.evidence.packets},
             {"peak_window_count", a.evidence.peak_window_count},
             {"threshold", a.evidence.threshold}};
  if (!a.evidence.ports.empty()) ev["ports"] = a.evidence.ports;
  if (!a.evidence.macs.empty()) {
    Json macs = Json::array();
    for (const auto& m : a.evidence.macs) macs.push_back(m.to_string());
    ev["macs"] = macs;
  }
  if (a.evidence.baseline_mean) ev["baseline_mean"] = *a.evidence.baseline_mean;
  if (a.evidence.baseline_stddev) ev["baseline_stddev"] = *a.evidence.baseline_stddev;
  return {{"kind", to_string(a.kind)},
          {"subject", a.subject},
          {"severity", to_string(a.severity)},
          {"window", {{"start", format_utc(a.window_start)}, {"end", format_utc(a.window_end)}}},
          {"evidence", ev},
          {"summary", a.summary()}};
}

inline Json to_document(const InterfaceInfo& i) {
  Json addrs = Json::array();
  for (const auto& a : i.ipv4) addrs.push_back(a.to_string());
  return {{"name", i.name},
          {"description", i.description},
          {"mac", i.mac ? Json(i.mac->to_string()) : Json()},
          {"ipv4", addrs},
          {"up", i.up}};
}

}  // namespace sniff
