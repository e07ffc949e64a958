#pragma once

#include <compare>
#include <cstdint>

#include "sniff/bytes.hpp"

namespace sniff {

/// Capture timestamp with nanosecond resolution.
struct Timestamp {
  std::int64_t sec = 0;
  std::uint32_t nsec = 0;  // 0..999'999'999

  constexpr std::int64_t to_ns() const noexcept { return sec * 1'000'000'000 + nsec; }

  static constexpr Timestamp from_ns(std::int64_t ns) noexcept {
    auto s = ns / 1'000'000'000;
    auto r = ns % 1'000'000'000;
    if (r < 0) {
      r += 1'000'000'000;
      --s;
    }
    return {s, static_cast<std::uint32_t>(r)};
  }

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// One captured frame: timestamp, the captured bytes and the on-wire length.
/// cap_len is data.size() and never exceeds orig_len.
struct RawFrame {
  Timestamp ts;
  std::uint32_t orig_len = 0;
  Bytes data;

  std::uint32_t cap_len() const noexcept { return static_cast<std::uint32_t>(data.size()); }
  bool truncated() const noexcept { return cap_len() < orig_len; }

  friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

}  // namespace sniff
