#pragma once

#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sniff/dissect.hpp"

namespace sniff::cli {

enum class Mode { Read, Live, ListInterfaces, Serve };

struct CliConfig {
  Mode mode = Mode::Read;
  std::string interface;
  std::string input;
  std::string output;
  std::string filter;
  bool stats = false;
  bool alerts = false;
  std::string report;
  bool promiscuous = true;
  std::uint32_t snaplen = 262144;
  std::size_t ring = 100000;
  std::uint64_t count = 0;
  double duration_secs = 0;
  std::string serve_address = "127.0.0.1:8080";
  bool allow_external = false;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Throws UsageError. Help requests are reported through `help`.
CliConfig parse_args(const std::vector<std::string>& args, std::string* help = nullptr);

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Column layout: No right-aligned in 6, Time right-aligned in 14, Source and
// Destination left-aligned in 17, Protocol left-aligned in 8, Length
// right-aligned in 6, Info unpadded. Columns are separated by one space and
// never truncated.

inline std::string render_header_line() {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%6s %14s %-17s %-17s %-8s %6s %s", "No", "Time", "Source", "Destination", "Protocol",
                "Length", "Info");
  return buf;
}

inline std::string render_summary_line(const SummaryRow& row) {
  char head[160];
  std::snprintf(head, sizeof head, "%6" PRIu64 " %14s %-17s %-17s %-8s %6" PRIu32 " ", row.no, row.time_text().c_str(),
                row.source.c_str(), row.destination.c_str(), row.protocol.c_str(), row.length);
  return head + row.info;
}

}  // namespace sniff::cli
