#pragma once

// Reference implementations used as test oracles. They are written
// separately from the library and kept deliberately naive.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oracle {

using nlohmann::json;

// --------------------------------------------------------------- checksum

/// Sums all 16-bit words in a wide accumulator and folds once at the end.
inline std::uint16_t ones_complement_checksum(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < bytes.size(); i += 2) {
    std::uint64_t hi = bytes[i];
    std::uint64_t lo = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    sum += (hi << 8) | lo;
  }
  while (sum > 0xffff) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum & 0xffff);
}

// ----------------------------------------------------------------- filters

/// Packet fields as exported by the reference dissector.
struct RefPacket {
  std::set<std::string> protocols;  // lowercase filter names
  std::optional<std::uint32_t> ip_src, ip_dst;
  std::optional<std::string> mac_src, mac_dst;
  std::optional<std::uint16_t> sport, dport;
};

inline std::uint32_t parse_ip(const std::string& s) {
  unsigned a, b, c, d;
  std::sscanf(s.c_str(), "%u.%u.%u.%u", &a, &b, &c, &d);
  return (a << 24) | (b << 16) | (c << 8) | d;
}

inline RefPacket ref_packet(const json& fields) {
  RefPacket p;
  static const std::map<std::string, std::string> names = {{"eth", "ethernet"}, {"arp", "arp"},  {"ipv4", "ipv4"},
                                                           {"icmp", "icmp"},    {"udp", "udp"},  {"tcp", "tcp"},
                                                           {"http", "http"}};
  for (const auto& [key, name] : names)
    if (fields.contains(key)) p.protocols.insert(name);
  if (fields.contains("eth")) {
    p.mac_src = fields["eth"]["src"].get<std::string>();
    p.mac_dst = fields["eth"]["dst"].get<std::string>();
  }
  if (fields.contains("ipv4")) {
    p.ip_src = parse_ip(fields["ipv4"]["src"]);
    p.ip_dst = parse_ip(fields["ipv4"]["dst"]);
  }
  for (const char* l4 : {"tcp", "udp"}) {
    if (fields.contains(l4)) {
      p.sport = fields[l4]["sport"].get<std::uint16_t>();
      p.dport = fields[l4]["dport"].get<std::uint16_t>();
    }
  }
  return p;
}

struct RefExpr {
  enum Kind { All, Cmp, And, Or, Not } kind = All;
  std::string field;  // as written in the filter language
  bool eq = true;
  std::string value;  // textual value
  std::vector<RefExpr> kids;
};

inline bool prefix_contains(const std::string& value, std::uint32_t addr) {
  auto slash = value.find('/');
  auto base = parse_ip(value.substr(0, slash));
  int len = slash == std::string::npos ? 32 : std::stoi(value.substr(slash + 1));
  std::uint32_t mask = len == 0 ? 0 : ~std::uint32_t{0} << (32 - len);
  return (addr & mask) == (base & mask);
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// A comparison on a missing field is false for both == and !=.
inline bool ref_eval(const RefExpr& e, const RefPacket& p) {
  switch (e.kind) {
    case RefExpr::All: return true;
    case RefExpr::And: return ref_eval(e.kids[0], p) && ref_eval(e.kids[1], p);
    case RefExpr::Or: return ref_eval(e.kids[0], p) || ref_eval(e.kids[1], p);
    case RefExpr::Not: return !ref_eval(e.kids[0], p);
    case RefExpr::Cmp: break;
  }
  auto f = lower(e.field);
  auto decide = [&](bool exists, bool hit) { return exists && (e.eq ? hit : !hit); };
  if (f == "ip.src") return decide(p.ip_src.has_value(), p.ip_src && prefix_contains(e.value, *p.ip_src));
  if (f == "ip.dst") return decide(p.ip_dst.has_value(), p.ip_dst && prefix_contains(e.value, *p.ip_dst));
  if (f == "ip.addr")
    return decide(p.ip_src.has_value(),
                  p.ip_src && (prefix_contains(e.value, *p.ip_src) || prefix_contains(e.value, *p.ip_dst)));
  auto v = lower(e.value);
  std::replace(v.begin(), v.end(), '-', ':');
  if (f == "mac.src") return decide(p.mac_src.has_value(), p.mac_src && *p.mac_src == v);
  if (f == "mac.dst") return decide(p.mac_dst.has_value(), p.mac_dst && *p.mac_dst == v);
  if (f == "mac.addr") return decide(p.mac_src.has_value(), p.mac_src && (*p.mac_src == v || *p.mac_dst == v));
  if (f == "proto") {
    auto name = v == "ip" ? std::string("ipv4") : v;
    return decide(!p.protocols.empty(), p.protocols.count(name) > 0);
  }
  if (f.rfind("port", 0) == 0) {
    auto port = static_cast<std::uint16_t>(std::stoul(v));
    if (f == "port") return decide(p.sport.has_value(), p.sport && (*p.sport == port || *p.dport == port));
    if (f == "port.src") return decide(p.sport.has_value(), p.sport && *p.sport == port);
    if (f == "port.dst") return decide(p.dport.has_value(), p.dport && *p.dport == port);
  }
  throw std::logic_error("unknown field " + e.field);
}

/// Renders with random keyword casing and spacing; always fully
/// parenthesized so the text is unambiguous for any precedence.
inline std::string render(const RefExpr& e, std::mt19937_64& rng) {
  auto word = [&](std::string w) {
    if (rng() % 3 == 0)
      for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return w;
  };
  auto sp = [&] { return std::string(1 + rng() % 2, ' '); };
  switch (e.kind) {
    case RefExpr::All: return word("true");
    case RefExpr::Cmp: return word(e.field) + (rng() % 2 ? " " : "") + (e.eq ? "==" : "!=") + (rng() % 2 ? " " : "") + e.value;
    case RefExpr::Not: return word("not") + sp() + "(" + render(e.kids[0], rng) + ")";
    case RefExpr::And:
    case RefExpr::Or:
      return "(" + render(e.kids[0], rng) + ")" + sp() + word(e.kind == RefExpr::And ? "and" : "or") + sp() + "(" +
             render(e.kids[1], rng) + ")";
  }
  return {};
}

struct ValuePools {
  std::vector<std::string> ips, macs, ports;
};

inline RefExpr random_comparison(std::mt19937_64& rng, const ValuePools& pools) {
  static const char* fields[] = {"ip.src", "ip.dst", "ip.addr", "mac.src", "mac.dst",
                                 "mac.addr", "proto", "port", "port.src", "port.dst"};
  static const char* protos[] = {"ethernet", "arp", "ipv4", "ip", "icmp", "udp", "tcp", "http"};
  RefExpr e;
  e.kind = RefExpr::Cmp;
  e.field = fields[rng() % 10];
  e.eq = rng() % 3 != 0;
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  if (e.field.rfind("ip.", 0) == 0) {
    e.value = pick(pools.ips);
    static const int lens[] = {8, 16, 24, 28, 30};
    if (rng() % 3 == 0) e.value += "/" + std::to_string(lens[rng() % 5]);
  } else if (e.field.rfind("mac.", 0) == 0) {
    e.value = pick(pools.macs);
  } else if (e.field == "proto") {
    e.value = protos[rng() % 8];
  } else {
    e.value = pick(pools.ports);
  }
  return e;
}

inline RefExpr random_expr(std::mt19937_64& rng, const ValuePools& pools, int depth) {
  auto r = rng() % 10;
  if (depth <= 0 || r < 3) return r == 0 && depth > 0 ? RefExpr{} : random_comparison(rng, pools);
  RefExpr e;
  if (r < 5) {
    e.kind = RefExpr::Not;
    e.kids.push_back(random_expr(rng, pools, depth - 1));
    return e;
  }
  e.kind = r < 8 ? RefExpr::And : RefExpr::Or;
  e.kids.push_back(random_expr(rng, pools, depth - 1));
  e.kids.push_back(random_expr(rng, pools, depth - 1));
  return e;
}

// --------------------------------------------------------------- detectors

struct TraceEvent {
  std::int64_t t;
  std::uint32_t src, dst;
  enum Kind { TcpSyn, TcpSynAck, TcpAck, Udp, Icmp, ArpReply, ArpRequest } kind;
  std::uint16_t dport = 0;
  std::string mac;  // ARP sender MAC
};

struct RefAlert {
  std::string subject;
  std::int64_t start, end;
  std::uint64_t packets;
  std::set<std::uint16_t> ports;
  std::set<std::string> macs;

  friend bool operator==(const RefAlert&, const RefAlert&) = default;
};

inline std::string ip_text(std::uint32_t v) {
  return std::to_string(v >> 24) + "." + std::to_string((v >> 16) & 0xff) + "." + std::to_string((v >> 8) & 0xff) +
         "." + std::to_string(v & 0xff);
}

/// Every window [t_i, t_i + width) anchored at an event is tested; the
/// qualifying windows, each spanning its first to its last event, are merged
/// while they overlap.
template <typename Qualifies>
std::vector<RefAlert> window_scan(const std::string& subject, std::vector<std::pair<std::int64_t, std::uint16_t>> ev,
                                  std::int64_t width, Qualifies qualifies) {
  std::sort(ev.begin(), ev.end(), [](auto& a, auto& b) { return a.first < b.first; });
  struct Win {
    std::int64_t start, end;
    std::set<std::uint16_t> ports;
  };
  std::vector<Win> wins;
  for (const auto& anchor : ev) {
    Win w{anchor.first, anchor.first, {}};
    std::size_t count = 0;
    for (const auto& e : ev) {
      if (e.first < anchor.first || e.first - anchor.first >= width) continue;
      ++count;
      w.ports.insert(e.second);
      w.end = std::max(w.end, e.first);
    }
    if (qualifies(count, w.ports.size())) wins.push_back(w);
  }
  std::vector<RefAlert> out;
  for (const auto& w : wins) {
    if (!out.empty() && w.start <= out.back().end) {
      out.back().end = std::max(out.back().end, w.end);
      out.back().ports.insert(w.ports.begin(), w.ports.end());
    } else {
      out.push_back({subject, w.start, w.end, 0, w.ports, {}});
    }
  }
  for (auto& a : out)
    for (const auto& e : ev)
      if (e.first >= a.start && e.first <= a.end) ++a.packets;
  return out;
}

inline std::vector<RefAlert> port_scan(const std::vector<TraceEvent>& trace, std::int64_t width, std::size_t threshold) {
  std::map<std::uint32_t, std::vector<std::pair<std::int64_t, std::uint16_t>>> by_src;
  for (const auto& e : trace)
    if (e.kind == TraceEvent::TcpSyn || e.kind == TraceEvent::Udp) by_src[e.src].push_back({e.t, e.dport});
  std::vector<RefAlert> out;
  for (auto& [src, ev] : by_src)
    for (auto& a : window_scan(ip_text(src), ev, width, [&](std::size_t, std::size_t d) { return d >= threshold; }))
      out.push_back(a);
  return out;
}

inline std::vector<RefAlert> flood(const std::vector<TraceEvent>& trace, std::int64_t width, double limit) {
  std::map<std::uint32_t, std::vector<std::pair<std::int64_t, std::uint16_t>>> by_dst;
  for (const auto& e : trace)
    if (e.kind != TraceEvent::ArpReply && e.kind != TraceEvent::ArpRequest) by_dst[e.dst].push_back({e.t, 0});
  std::vector<RefAlert> out;
  for (auto& [dst, ev] : by_dst)
    for (auto a : window_scan(ip_text(dst), ev, width, [&](std::size_t n, std::size_t) { return double(n) > limit; })) {
      a.ports.clear();
      out.push_back(a);
    }
  return out;
}

/// Per-source counts in windows aligned to the first event of the whole
/// trace. The mean/stddev test is evaluated in exact integer arithmetic:
/// c > m + k*s  <=>  B*c - S > k * sqrt(B*Q - S^2)  with S, Q the sum and sum
/// of squares of the B baseline counts.
inline std::vector<RefAlert> high_activity(const std::vector<TraceEvent>& trace, std::int64_t width, std::size_t B,
                                           double k, std::uint64_t floor) {
  std::vector<RefAlert> out;
  if (trace.empty() || B < 2) return out;
  std::int64_t origin = trace.front().t, last = trace.front().t;
  for (const auto& e : trace) {
    origin = std::min(origin, e.t);
    last = std::max(last, e.t);
  }
  std::size_t bins = static_cast<std::size_t>((last - origin) / width) + 1;
  std::map<std::uint32_t, std::vector<long long>> series;
  for (const auto& e : trace) {
    if (e.kind == TraceEvent::ArpReply || e.kind == TraceEvent::ArpRequest) continue;
    auto& s = series[e.src];
    s.resize(bins, 0);
    ++s[static_cast<std::size_t>((e.t - origin) / width)];
  }
  for (const auto& [src, c] : series) {
    std::vector<bool> hot(c.size(), false);
    for (std::size_t i = B; i < c.size(); ++i) {
      long long S = 0, Q = 0;
      for (std::size_t j = i - B; j < i; ++j) {
        S += c[j];
        Q += c[j] * c[j];
      }
      long long lhs = static_cast<long long>(B) * c[i] - S;
      long long var = static_cast<long long>(B) * Q - S * S;
      bool above = lhs > 0 && static_cast<long double>(lhs) * lhs > static_cast<long double>(k) * k * var;
      hot[i] = above && c[i] > static_cast<long long>(floor);
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!hot[i]) continue;
      auto j = i;
      std::uint64_t packets = 0;
      while (j < c.size() && hot[j]) packets += static_cast<std::uint64_t>(c[j++]);
      out.push_back({ip_text(src), origin + static_cast<std::int64_t>(i) * width,
                     origin + static_cast<std::int64_t>(j) * width - 1, packets, {}, {}});
      i = j;
    }
  }
  return out;
}

inline std::vector<RefAlert> arp_duplicates(const std::vector<TraceEvent>& trace) {
  std::map<std::uint32_t, RefAlert> claims;
  for (const auto& e : trace) {
    if (e.kind != TraceEvent::ArpReply) continue;
    auto [it, fresh] = claims.try_emplace(e.src, RefAlert{ip_text(e.src), e.t, e.t, 0, {}, {}});
    it->second.start = std::min(it->second.start, e.t);
    it->second.end = std::max(it->second.end, e.t);
    it->second.macs.insert(e.mac);
    ++it->second.packets;
  }
  std::vector<RefAlert> out;
  for (auto& [_, a] : claims)
    if (a.macs.size() >= 2) out.push_back(a);
  return out;
}

// ------------------------------------------------------------ echo pairing

struct EchoMsg {
  std::uint64_t index;
  std::int64_t t;
  bool request;
  std::uint32_t requester, peer;  // for replies: requester = destination, peer = source
  std::uint16_t ident, seq;
};

/// request index -> reply index. Replies are considered in time order and
/// every candidate request is examined to find the earliest eligible one.
inline std::map<std::uint64_t, std::optional<std::uint64_t>> pair_echoes(const std::vector<EchoMsg>& msgs) {
  std::map<std::uint64_t, std::optional<std::uint64_t>> out;
  std::vector<EchoMsg> replies;
  for (const auto& m : msgs) {
    if (m.request)
      out[m.index] = std::nullopt;
    else
      replies.push_back(m);
  }
  std::sort(replies.begin(), replies.end(),
            [](const auto& a, const auto& b) { return std::pair(a.t, a.index) < std::pair(b.t, b.index); });
  for (const auto& rep : replies) {
    const EchoMsg* best = nullptr;
    for (const auto& q : msgs) {
      if (!q.request || out[q.index] || q.t > rep.t) continue;
      if (q.peer != rep.peer || q.ident != rep.ident || q.seq != rep.seq) continue;
      if (!best || std::pair(q.t, q.index) < std::pair(best->t, best->index)) best = &q;
    }
    if (best) out[best->index] = rep.index;
  }
  return out;
}

}  // namespace oracle
