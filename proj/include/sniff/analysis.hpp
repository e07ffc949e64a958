#pragma once

// Traffic statistics, conversations, ping pairing and the alert heuristics.
// Every function here is a pure function of the records it is given.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "sniff/dissect.hpp"

namespace sniff {

// ------------------------------------------------------------- statistics

struct ProtocolCount {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  friend bool operator==(const ProtocolCount&, const ProtocolCount&) = default;
};

struct ProtocolStats {
  std::map<std::string, ProtocolCount> by_protocol;  // keyed by SummaryRow::protocol
  std::uint64_t total_packets = 0;
  std::uint64_t total_bytes = 0;
  std::optional<Timestamp> first;
  std::optional<Timestamp> last;

  std::int64_t duration_ns() const noexcept { return first ? last->to_ns() - first->to_ns() : 0; }

  void add(const PacketRecord& r) {
    auto& c = by_protocol[r.summary.protocol];
    ++c.packets;
    c.bytes += r.frame.orig_len;
    ++total_packets;
    total_bytes += r.frame.orig_len;
    if (!first || r.frame.ts < *first) first = r.frame.ts;
    if (!last || *last < r.frame.ts) last = r.frame.ts;
  }

  friend bool operator==(const ProtocolStats&, const ProtocolStats&) = default;
};

template <typename Range>
ProtocolStats accumulate_stats(const Range& records) {
  ProtocolStats s;
  for (const auto& r : records) s.add(r);
  return s;
}

/// Incremental accumulator: one writer, concurrent snapshot readers.
class StatsAccumulator {
 public:
  void add(const PacketRecord& r) {
    std::unique_lock lock(mu_);
    stats_.add(r);
  }

  ProtocolStats snapshot() const {
    std::shared_lock lock(mu_);
    return stats_;
  }

 private:
  mutable std::shared_mutex mu_;
  ProtocolStats stats_;
};

// ---------------------------------------------------------- conversations

struct Endpoint {
  Ipv4Addr addr;
  std::uint16_t port = 0;

  std::string to_string() const { return addr.to_string() + ":" + std::to_string(port); }
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

/// Bidirectional flow. `a` is the smaller endpoint; "ab" counters count
/// packets sent from a to b.
struct Conversation {
  Endpoint a;
  Endpoint b;
  std::string protocol;  // TCP, UDP or ICMP
  std::uint64_t packets_ab = 0;
  std::uint64_t packets_ba = 0;
  std::uint64_t bytes_ab = 0;
  std::uint64_t bytes_ba = 0;
  Timestamp first;
  Timestamp last;

  std::uint64_t packets() const noexcept { return packets_ab + packets_ba; }
  std::uint64_t bytes() const noexcept { return bytes_ab + bytes_ba; }

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

namespace detail {

/// (source endpoint, destination endpoint, protocol) for conversation keying.
inline std::optional<std::tuple<Endpoint, Endpoint, std::string>> flow_of(const PacketRecord& r) {
  auto* ip = r.template find<Ipv4Header>();
  if (!ip) return std::nullopt;
  if (auto* t = r.template find<TcpHeader>()) return std::tuple{Endpoint{ip->src, t->src_port}, Endpoint{ip->dst, t->dst_port}, std::string("TCP")};
  if (auto* u = r.template find<UdpHeader>()) return std::tuple{Endpoint{ip->src, u->src_port}, Endpoint{ip->dst, u->dst_port}, std::string("UDP")};
  if (r.template find<IcmpMessage>()) return std::tuple{Endpoint{ip->src, 0}, Endpoint{ip->dst, 0}, std::string("ICMP")};
  return std::nullopt;
}

}  // namespace detail

/// One entry per (normalized endpoint pair, protocol), ordered by key.
template <typename Range>
std::vector<Conversation> build_conversations(const Range& records) {
  std::map<std::tuple<Endpoint, Endpoint, std::string>, Conversation> table;
  for (const auto& r : records) {
    auto flow = detail::flow_of(r);
    if (!flow) continue;
    auto [src, dst, proto] = *flow;
    bool forward = !(dst < src);
    auto key = forward ? std::tuple{src, dst, proto} : std::tuple{dst, src, proto};
    auto [it, inserted] = table.try_emplace(key);
    auto& c = it->second;
    if (inserted) {
      c.a = std::get<0>(key);
      c.b = std::get<1>(key);
      c.protocol = proto;
      c.first = c.last = r.frame.ts;
    }
    (forward ? c.packets_ab : c.packets_ba) += 1;
    (forward ? c.bytes_ab : c.bytes_ba) += r.frame.orig_len;
    c.first = std::min(c.first, r.frame.ts);
    c.last = std::max(c.last, r.frame.ts);
  }
  std::vector<Conversation> out;
  out.reserve(table.size());
  for (auto& [_, c] : table) out.push_back(std::move(c));
  return out;
}

// ------------------------------------------------------------ echo pairing

struct EchoPairing {
  std::uint64_t request_index = 0;
  std::optional<std::uint64_t> reply_index;
  std::uint16_t ident = 0;
  std::uint16_t seq = 0;
  Ipv4Addr requester;
  Ipv4Addr peer;  // the pinged host
  Timestamp request_ts;
  std::optional<std::int64_t> rtt_ns;

  bool paired() const noexcept { return reply_index.has_value(); }
  friend bool operator==(const EchoPairing&, const EchoPairing&) = default;
};

/// Replies are taken in time order; each claims the earliest unpaired request
/// with the same (peer, ident, seq) that is not timestamped after it. Record
/// order does not matter. Output is in request index order.
template <typename Range>
std::vector<EchoPairing> pair_echoes(const Range& records) {
  struct Reply {
    Timestamp ts;
    std::uint64_t index;
    std::tuple<std::uint32_t, std::uint16_t, std::uint16_t> key;
  };
  std::vector<EchoPairing> out;
  std::vector<Reply> replies;
  for (const auto& r : records) {
    auto* ip = r.template find<Ipv4Header>();
    auto* icmp = r.template find<IcmpMessage>();
    if (!ip || !icmp || !icmp->is_echo()) continue;
    if (icmp->icmp_type == IcmpMessage::echo_request) {
      EchoPairing p;
      p.request_index = r.index;
      p.ident = *icmp->ident;
      p.seq = *icmp->seq;
      p.requester = ip->src;
      p.peer = ip->dst;
      p.request_ts = r.frame.ts;
      out.push_back(p);
    } else {
      replies.push_back({r.frame.ts, r.index, {ip->src.value, *icmp->ident, *icmp->seq}});
    }
  }
  auto by_time = [](const auto& a, const auto& b) { return std::tie(a.ts, a.index) < std::tie(b.ts, b.index); };
  std::sort(replies.begin(), replies.end(), by_time);
  std::sort(out.begin(), out.end(), [](const EchoPairing& a, const EchoPairing& b) {
    return std::tie(a.request_ts, a.request_index) < std::tie(b.request_ts, b.request_index);
  });

  std::map<std::tuple<std::uint32_t, std::uint16_t, std::uint16_t>, std::deque<std::size_t>> open;
  std::size_t next_req = 0;
  for (const auto& rep : replies) {
    // requests at or before this reply become eligible, oldest first
    for (; next_req < out.size() && !(rep.ts < out[next_req].request_ts); ++next_req) {
      const auto& q = out[next_req];
      open[{q.peer.value, q.ident, q.seq}].push_back(next_req);
    }
    auto it = open.find(rep.key);
    if (it == open.end() || it->second.empty()) continue;
    auto& req = out[it->second.front()];
    it->second.pop_front();
    req.reply_index = rep.index;
    req.rtt_ns = rep.ts.to_ns() - req.request_ts.to_ns();
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.request_index < y.request_index; });
  return out;
}

// ------------------------------------------------------------------ alerts

enum class AlertKind { PortScan, HighActivity, ArpDuplicate, FloodDos };
enum class Severity { Info, Warning, Critical };

constexpr std::string_view to_string(AlertKind k) noexcept {
  switch (k) {
    case AlertKind::PortScan: return "PortScan";
    case AlertKind::HighActivity: return "HighActivity";
    case AlertKind::ArpDuplicate: return "ArpDuplicate";
    case AlertKind::FloodDos: return "FloodDos";
  }
  return "?";
}

constexpr std::string_view to_string(Severity s) noexcept {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warning: return "warning";
    case Severity::Critical: return "critical";
  }
  return "?";
}

struct AlertEvidence {
  std::uint64_t packets = 0;          // packets inside the alert window(s)
  std::vector<std::uint16_t> ports;   // PortScan: distinct destination ports
  std::vector<MacAddr> macs;          // ArpDuplicate: competing claimants
  std::uint64_t peak_window_count = 0;
  double threshold = 0;
  std::optional<double> baseline_mean;
  std::optional<double> baseline_stddev;

  friend bool operator==(const AlertEvidence&, const AlertEvidence&) = default;
};

struct Alert {
  AlertKind kind = AlertKind::PortScan;
  std::string subject;  // IP or MAC
  Timestamp window_start;
  Timestamp window_end;
  Severity severity = Severity::Warning;
  AlertEvidence evidence;

  std::string summary() const;
  friend bool operator==(const Alert&, const Alert&) = default;
};

struct PortScanParams {
  double window_secs = 5.0;
  std::size_t distinct_port_threshold = 20;
};

struct FloodParams {
  double window_secs = 1.0;
  double pps_threshold = 500.0;
};

struct HighActivityParams {
  double window_secs = 10.0;
  std::size_t baseline_windows = 6;
  double sigma_factor = 3.0;
  std::uint64_t floor_packets = 10;
};

struct DetectorConfig {
  PortScanParams port_scan;
  FloodParams flood;
  HighActivityParams high_activity;
};

namespace detail {

inline std::int64_t secs_to_ns(double s) { return static_cast<std::int64_t>(std::llround(s * 1e9)); }

struct TimedEvent {
  std::int64_t t;
  std::uint16_t port;
};

struct Span {
  std::int64_t start;
  std::int64_t end;
  std::uint64_t packets;
  std::uint64_t peak;
  std::set<std::uint16_t> ports;
};

/// Slides a window of `width` ns starting at each event; whenever `qualifies`
/// holds for the events in [t_i, t_i + width) the covered span is merged into
/// the current alert span.
template <typename Qualifies>
std::vector<Span> sliding_spans(std::vector<TimedEvent> ev, std::int64_t width, Qualifies qualifies) {
  std::stable_sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  std::vector<Span> spans;
  std::map<std::uint16_t, std::uint64_t> ports;
  std::size_t j = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    while (j < ev.size() && ev[j].t - ev[i].t < width) ++ports[ev[j++].port];
    std::uint64_t count = j - i;
    if (qualifies(count, ports.size())) {
      if (!spans.empty() && ev[i].t <= spans.back().end) {
        auto& s = spans.back();
        s.end = std::max(s.end, ev[j - 1].t);
        s.peak = std::max(s.peak, count);
      } else {
        spans.push_back({ev[i].t, ev[j - 1].t, 0, count, {}});
      }
      for (const auto& [p, _] : ports) spans.back().ports.insert(p);
    }
    if (--ports[ev[i].port] == 0) ports.erase(ev[i].port);
  }
  for (auto& s : spans)
    for (const auto& e : ev)
      if (e.t >= s.start && e.t <= s.end) ++s.packets;
  return spans;
}

}  // namespace detail

/// Sources whose TCP SYN (without ACK) and UDP packets reach at least
/// `distinct_port_threshold` destination ports within one window.
template <typename Range>
std::vector<Alert> detect_port_scan(const Range& records, const PortScanParams& p = {}) {
  std::map<Ipv4Addr, std::vector<detail::TimedEvent>> by_source;
  for (const auto& r : records) {
    auto* ip = r.template find<Ipv4Header>();
    if (!ip) continue;
    if (auto* t = r.template find<TcpHeader>()) {
      if (t->syn() && !t->ack_flag()) by_source[ip->src].push_back({r.frame.ts.to_ns(), t->dst_port});
    } else if (auto* u = r.template find<UdpHeader>()) {
      by_source[ip->src].push_back({r.frame.ts.to_ns(), u->dst_port});
    }
  }
  std::vector<Alert> out;
  const auto threshold = std::max<std::size_t>(p.distinct_port_threshold, 1);
  for (auto& [src, events] : by_source) {
    auto spans = detail::sliding_spans(std::move(events), detail::secs_to_ns(p.window_secs),
                                       [&](std::uint64_t, std::size_t distinct) { return distinct >= threshold; });
    for (auto& s : spans) {
      Alert a;
      a.kind = AlertKind::PortScan;
      a.subject = src.to_string();
      a.window_start = Timestamp::from_ns(s.start);
      a.window_end = Timestamp::from_ns(s.end);
      a.severity = Severity::Warning;
      a.evidence.packets = s.packets;
      a.evidence.ports.assign(s.ports.begin(), s.ports.end());
      a.evidence.peak_window_count = s.peak;
      a.evidence.threshold = static_cast<double>(threshold);
      out.push_back(std::move(a));
    }
  }
  return out;
}

/// Destinations receiving more than pps_threshold * window_secs IPv4 packets
/// within one window.
template <typename Range>
std::vector<Alert> detect_flood(const Range& records, const FloodParams& p = {}) {
  std::map<Ipv4Addr, std::vector<detail::TimedEvent>> by_dest;
  for (const auto& r : records)
    if (auto* ip = r.template find<Ipv4Header>()) by_dest[ip->dst].push_back({r.frame.ts.to_ns(), 0});
  const double limit = p.pps_threshold * p.window_secs;
  std::vector<Alert> out;
  for (auto& [dst, events] : by_dest) {
    auto spans = detail::sliding_spans(std::move(events), detail::secs_to_ns(p.window_secs),
                                       [&](std::uint64_t count, std::size_t) { return static_cast<double>(count) > limit; });
    for (auto& s : spans) {
      Alert a;
      a.kind = AlertKind::FloodDos;
      a.subject = dst.to_string();
      a.window_start = Timestamp::from_ns(s.start);
      a.window_end = Timestamp::from_ns(s.end);
      a.severity = Severity::Critical;
      a.evidence.packets = s.packets;
      a.evidence.peak_window_count = s.peak;
      a.evidence.threshold = limit;
      out.push_back(std::move(a));
    }
  }
  return out;
}

/// Per-source packet counts in fixed windows aligned to the first record.
/// A window alerts when its count exceeds mean + sigma_factor * stddev of the
/// preceding baseline_windows (population stddev) and exceeds floor_packets.
/// Consecutive alerting windows merge into one alert.
template <typename Range>
std::vector<Alert> detect_high_activity(const Range& records, const HighActivityParams& p = {}) {
  std::vector<Alert> out;
  if (p.baseline_windows < 2) return out;
  std::optional<std::int64_t> origin;
  std::int64_t latest = 0;
  for (const auto& r : records) {
    auto t = r.frame.ts.to_ns();
    origin = origin ? std::min(*origin, t) : t;
    latest = std::max(latest, t);
  }
  if (!origin) return out;
  const auto width = std::max<std::int64_t>(detail::secs_to_ns(p.window_secs), 1);
  const auto bins = static_cast<std::size_t>((latest - *origin) / width) + 1;

  std::map<Ipv4Addr, std::vector<std::uint64_t>> series;
  for (const auto& r : records) {
    auto* ip = r.template find<Ipv4Header>();
    if (!ip) continue;
    auto& s = series[ip->src];
    if (s.empty()) s.assign(bins, 0);
    ++s[static_cast<std::size_t>((r.frame.ts.to_ns() - *origin) / width)];
  }

  const auto B = p.baseline_windows;
  for (const auto& [src, counts] : series) {
    std::optional<Alert> current;
    std::size_t last_bin = 0;
    for (std::size_t k = B; k < counts.size(); ++k) {
      double mean = 0;
      for (std::size_t i = k - B; i < k; ++i) mean += static_cast<double>(counts[i]);
      mean /= static_cast<double>(B);
      double var = 0;
      for (std::size_t i = k - B; i < k; ++i) var += (counts[i] - mean) * (counts[i] - mean);
      double sd = std::sqrt(var / static_cast<double>(B));
      double c = static_cast<double>(counts[k]);
      if (!(c > mean + p.sigma_factor * sd && counts[k] > p.floor_packets)) continue;

      auto start = Timestamp::from_ns(*origin + static_cast<std::int64_t>(k) * width);
      auto end = Timestamp::from_ns(*origin + static_cast<std::int64_t>(k + 1) * width - 1);
      if (current && last_bin + 1 == k) {
        current->window_end = end;
        current->evidence.packets += counts[k];
        current->evidence.peak_window_count = std::max(current->evidence.peak_window_count, counts[k]);
      } else {
        if (current) out.push_back(std::move(*current));
        Alert a;
        a.kind = AlertKind::HighActivity;
        a.subject = src.to_string();
        a.window_start = start;
        a.window_end = end;
        a.severity = Severity::Warning;
        a.evidence.packets = counts[k];
        a.evidence.peak_window_count = counts[k];
        a.evidence.threshold = mean + p.sigma_factor * sd;
        a.evidence.baseline_mean = mean;
        a.evidence.baseline_stddev = sd;
        current = std::move(a);
      }
      last_bin = k;
    }
    if (current) out.push_back(std::move(*current));
  }
  return out;
}

/// IPv4 addresses claimed by two or more MACs in ARP replies.
template <typename Range>
std::vector<Alert> detect_arp_duplicates(const Range& records) {
  struct Claims {
    std::set<MacAddr> macs;
    Timestamp first;
    Timestamp last;
    std::uint64_t packets = 0;
  };
  std::map<Ipv4Addr, Claims> claims;
  for (const auto& r : records) {
    auto* arp = r.template find<ArpPacket>();
    if (!arp || arp->opcode != ArpPacket::reply) continue;
    auto [it, inserted] = claims.try_emplace(arp->sender_ip);
    auto& c = it->second;
    if (inserted) c.first = c.last = r.frame.ts;
    c.macs.insert(arp->sender_mac);
    c.first = std::min(c.first, r.frame.ts);
    c.last = std::max(c.last, r.frame.ts);
    ++c.packets;
  }
  std::vector<Alert> out;
  for (const auto& [ip, c] : claims) {
    if (c.macs.size() < 2) continue;
    Alert a;
    a.kind = AlertKind::ArpDuplicate;
    a.subject = ip.to_string();
    a.window_start = c.first;
    a.window_end = c.last;
    a.severity = Severity::Critical;
    a.evidence.packets = c.packets;
    a.evidence.macs.assign(c.macs.begin(), c.macs.end());
    out.push_back(std::move(a));
  }
  return out;
}

/// Critical first, then by window start, kind and subject.
inline void sort_alerts(std::vector<Alert>& alerts) {
  std::stable_sort(alerts.begin(), alerts.end(), [](const Alert& x, const Alert& y) {
    return std::tuple(-static_cast<int>(x.severity), x.window_start, static_cast<int>(x.kind), x.subject) <
           std::tuple(-static_cast<int>(y.severity), y.window_start, static_cast<int>(y.kind), y.subject);
  });
}

template <typename Range>
std::vector<Alert> run_detectors(const Range& records, const DetectorConfig& cfg = {}) {
  std::vector<Alert> all;
  for (auto&& batch : {detect_port_scan(records, cfg.port_scan), detect_flood(records, cfg.flood),
                       detect_high_activity(records, cfg.high_activity), detect_arp_duplicates(records)})
    all.insert(all.end(), batch.begin(), batch.end());
  sort_alerts(all);
  return all;
}

inline std::string Alert::summary() const {
  std::string s = std::string(to_string(kind)) + " " + subject + ": ";
  switch (kind) {
    case AlertKind::PortScan:
      s += std::to_string(evidence.ports.size()) + " distinct ports probed";
      break;
    case AlertKind::FloodDos:
      s += std::to_string(evidence.peak_window_count) + " packets in one window";
      break;
    case AlertKind::HighActivity:
      s += std::to_string(evidence.peak_window_count) + " packets in one window";
      break;
    case AlertKind::ArpDuplicate: {
      s += "claimed by";
      for (const auto& m : evidence.macs) s += " " + m.to_string();
      break;
    }
  }
  return s;
}

}  // namespace sniff
