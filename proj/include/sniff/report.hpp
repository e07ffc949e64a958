#pragma once

#include <cinttypes>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "sniff/analysis.hpp"
#include "sniff/document.hpp"

namespace sniff {

struct ReportSession {
  std::string id;
  std::string source;
  std::string filter;
  std::string state;
  SessionCounters counters;
  std::optional<Timestamp> t0;
};

struct Report {
  ReportSession session;
  ProtocolStats stats;
  std::vector<Conversation> conversations;  // top N by bytes
  std::size_t conversation_total = 0;
  std::vector<EchoPairing> pairings;
  std::vector<Alert> alerts;
  Timestamp generated_at;
};

inline constexpr std::string_view report_schema = "sniff.report/1";

/// Orders conversations by bytes (descending, ties by key) and keeps the top
/// `top_n`; alerts are sorted by severity then time.
inline Report generate_report(ReportSession session, ProtocolStats stats, std::vector<Conversation> conversations,
                              std::vector<EchoPairing> pairings, std::vector<Alert> alerts, Timestamp generated_at,
                              std::size_t top_n = 10) {
  Report r;
  r.session = std::move(session);
  r.stats = std::move(stats);
  r.conversation_total = conversations.size();
  std::stable_sort(conversations.begin(), conversations.end(), [](const auto& x, const auto& y) {
    if (x.bytes() != y.bytes()) return x.bytes() > y.bytes();
    return std::tie(x.a, x.b, x.protocol) < std::tie(y.a, y.b, y.protocol);
  });
  if (conversations.size() > top_n) conversations.resize(top_n);
  r.conversations = std::move(conversations);
  r.pairings = std::move(pairings);
  sort_alerts(alerts);
  r.alerts = std::move(alerts);
  r.generated_at = generated_at;
  return r;
}

/// Runs every analysis over `records`. `stats` may cover more packets than
/// `records` (a session keeps statistics for evicted records).
template <typename Range>
Report analyze(ReportSession session, const Range& records, std::optional<ProtocolStats> stats,
               Timestamp generated_at, const DetectorConfig& cfg = {}, std::size_t top_n = 10) {
  return generate_report(std::move(session), stats ? std::move(*stats) : accumulate_stats(records),
                         build_conversations(records), pair_echoes(records), run_detectors(records, cfg),
                         generated_at, top_n);
}

inline Json to_document(const Report& r) {
  Json conversations = Json::array();
  for (const auto& c : r.conversations) conversations.push_back(to_document(c));
  Json pairings = Json::array();
  for (const auto& p : r.pairings) pairings.push_back(to_document(p));
  Json alerts = Json::array();
  for (const auto& a : r.alerts) alerts.push_back(to_document(a));
  return {{"schema", report_schema},
          {"generated_at", format_utc(r.generated_at)},
          {"session",
           {{"id", r.session.id},
            {"source", r.session.source},
            {"filter", r.session.filter},
            {"state", r.session.state},
            {"counters", to_document(r.session.counters)},
            {"t0", r.session.t0 ? Json(format_utc(*r.session.t0)) : Json()}}},
          {"stats", to_document(r.stats)},
          {"conversations", {{"total", r.conversation_total}, {"top", conversations}}},
          {"echo_pairings", pairings},
          {"alerts", alerts}};
}

inline std::string render_document(const Report& r) { return to_document(r).dump(2) + "\n"; }

namespace detail {

inline std::string seconds_text(std::int64_t ns) {
  SummaryRow row;
  row.time_ns = ns;
  return row.time_text();
}

inline std::string fixed(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace detail

inline std::string render_stats_text(const ProtocolStats& stats) {
  std::ostringstream o;
  char line[256];
  o << "Protocol statistics: " << stats.total_packets << " packets, " << stats.total_bytes << " bytes, "
    << detail::seconds_text(stats.duration_ns()) << " s\n";
  std::snprintf(line, sizeof line, "  %-10s %10s %12s\n", "Protocol", "Packets", "Bytes");
  o << line;
  for (const auto& [name, c] : stats.by_protocol) {
    std::snprintf(line, sizeof line, "  %-10s %10" PRIu64 " %12" PRIu64 "\n", name.c_str(), c.packets, c.bytes);
    o << line;
  }
  return o.str();
}

inline std::string render_alerts_text(const std::vector<Alert>& alerts) {
  std::ostringstream o;
  o << "Alerts: " << alerts.size() << "\n";
  for (const auto& a : alerts) {
    o << "  [" << to_string(a.severity) << "] " << a.summary() << " (" << format_utc(a.window_start) << " .. "
      << format_utc(a.window_end) << ", " << a.evidence.packets << " packets)\n";
  }
  return o.str();
}

inline std::string render_text(const Report& r) {
  std::ostringstream o;
  char line[256];
  o << "Capture report\n";
  o << "  session    " << r.session.id << "\n";
  o << "  source     " << r.session.source << "\n";
  o << "  filter     " << (r.session.filter.empty() ? "(none)" : r.session.filter) << "\n";
  o << "  state      " << r.session.state << "\n";
  o << "  packets    seen " << r.session.counters.seen << ", matched " << r.session.counters.matched << ", dropped "
    << r.session.counters.dropped << "\n";
  o << "  generated  " << format_utc(r.generated_at) << "\n\n";

  o << render_stats_text(r.stats) << "\n";

  o << "Conversations: top " << r.conversations.size() << " of " << r.conversation_total << " by bytes\n";
  for (const auto& c : r.conversations) {
    std::snprintf(line, sizeof line, "  %-21s <-> %-21s %-4s %6" PRIu64 " pkts %9" PRIu64 " bytes (%" PRIu64 "/%" PRIu64 ")\n",
                  c.a.to_string().c_str(), c.b.to_string().c_str(), c.protocol.c_str(), c.packets(), c.bytes(),
                  c.packets_ab, c.packets_ba);
    o << line;
  }
  o << "\n";

  std::size_t answered = 0;
  for (const auto& p : r.pairings) answered += p.paired();
  o << "Echo pairings: " << r.pairings.size() << " requests, " << answered << " answered\n";
  for (const auto& p : r.pairings) {
    o << "  " << p.requester.to_string() << " -> " << p.peer.to_string() << " id=" << p.ident << " seq=" << p.seq;
    if (p.rtt_ns)
      o << " reply #" << *p.reply_index << " rtt=" << detail::fixed("%.3f", static_cast<double>(*p.rtt_ns) / 1e6)
        << " ms\n";
    else
      o << " no reply\n";
  }
  o << "\n";

  o << render_alerts_text(r.alerts);
  return o.str();
}

}  // namespace sniff
