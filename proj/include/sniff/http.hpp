#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sniff/bytes.hpp"

namespace sniff {

struct HttpSummary {
  enum class Kind { Request, Response };

  Kind kind = Kind::Request;
  std::string method;         // requests
  std::string target;         // requests
  std::uint16_t status_code = 0;  // responses
  std::string reason;         // responses
  std::string version;        // "HTTP/1.1"
  std::vector<std::pair<std::string, std::string>> headers;
  bool truncated = false;     // header block did not end with an empty line

  static constexpr std::size_t max_header_lines = 64;

  bool is_request() const noexcept { return kind == Kind::Request; }

  friend bool operator==(const HttpSummary&, const HttpSummary&) = default;
};

inline constexpr std::array<std::string_view, 9> http_methods{
    "GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH", "TRACE", "CONNECT"};

namespace detail {

inline bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

inline bool is_http_version(std::string_view v) noexcept {
  return v.size() == 8 && v.substr(0, 5) == "HTTP/" && is_digit(v[5]) && v[6] == '.' && is_digit(v[7]);
}

inline bool is_visible(std::string_view s) noexcept {
  for (unsigned char c : s)
    if (c < 0x21 || c > 0x7e) return false;
  return true;
}

inline bool is_reason_text(std::string_view s) noexcept {
  for (unsigned char c : s)
    if (c != '\t' && (c < 0x20 || c == 0x7f)) return false;
  return true;
}

inline bool is_token(std::string_view s) noexcept {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (c <= 0x20 || c >= 0x7f) return false;
    if (std::string_view("()<>@,;:\\\"/[]?={}").find(static_cast<char>(c)) != std::string_view::npos)
      return false;
  }
  return true;
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

/// Splits off one line (without the terminator). Returns false when the
/// remaining text has no line terminator; `line` then holds the remainder.
inline bool next_line(std::string_view& text, std::string_view& line) noexcept {
  auto nl = text.find('\n');
  if (nl == std::string_view::npos) {
    line = text;
    text = {};
    return false;
  }
  line = text.substr(0, nl);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  text.remove_prefix(nl + 1);
  return true;
}

inline bool parse_request_line(std::string_view line, HttpSummary& out) {
  auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos) return false;
  auto method = line.substr(0, sp1);
  bool known = false;
  for (auto m : http_methods) known = known || m == method;
  if (!known) return false;
  auto rest = line.substr(sp1 + 1);
  auto sp2 = rest.find(' ');
  if (sp2 == std::string_view::npos || sp2 == 0) return false;
  auto target = rest.substr(0, sp2);
  auto version = rest.substr(sp2 + 1);
  if (!is_visible(target) || !is_http_version(version)) return false;
  out.kind = HttpSummary::Kind::Request;
  out.method = method;
  out.target = target;
  out.version = version;
  return true;
}

inline bool parse_status_line(std::string_view line, HttpSummary& out) {
  if (line.size() < 12 || !is_http_version(line.substr(0, 8)) || line[8] != ' ') return false;
  auto code = line.substr(9, 3);
  if (!is_digit(code[0]) || !is_digit(code[1]) || !is_digit(code[2])) return false;
  std::string_view reason;
  if (line.size() > 12) {
    if (line[12] != ' ') return false;
    reason = line.substr(13);
    if (!is_reason_text(reason)) return false;
  }
  out.kind = HttpSummary::Kind::Response;
  out.version = line.substr(0, 8);
  out.status_code = static_cast<std::uint16_t>((code[0] - '0') * 100 + (code[1] - '0') * 10 + (code[2] - '0'));
  out.reason = reason;
  return true;
}

}  // namespace detail

/// Recognizes HTTP from the start line alone: a known method followed by a
/// target and version, or an "HTTP/x.y NNN" status line. Ports never decide.
/// Header lines are collected up to the blank line or the line cap; anything
/// cut short sets `truncated`.
inline std::optional<HttpSummary> detect_http(ByteSpan payload, [[maybe_unused]] std::uint16_t src_port,
                                              [[maybe_unused]] std::uint16_t dst_port) {
  if (payload.empty()) return std::nullopt;
  std::string_view text(reinterpret_cast<const char*>(payload.data()), payload.size());
  std::string_view line;
  bool complete = detail::next_line(text, line);

  HttpSummary out;
  if (!detail::parse_request_line(line, out) && !detail::parse_status_line(line, out)) return std::nullopt;
  if (!complete) {
    out.truncated = true;
    return out;
  }

  while (true) {
    if (out.headers.size() >= HttpSummary::max_header_lines) {
      out.truncated = true;
      break;
    }
    bool terminated = detail::next_line(text, line);
    if (terminated && line.empty()) break;
    auto colon = line.find(':');
    if (!terminated || colon == std::string_view::npos || !detail::is_token(line.substr(0, colon))) {
      out.truncated = true;
      break;
    }
    out.headers.emplace_back(std::string(line.substr(0, colon)), std::string(detail::trim(line.substr(colon + 1))));
  }
  return out;
}

}  // namespace sniff
