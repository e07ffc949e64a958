#pragma once

#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sniff {

struct MacAddr {
  std::array<std::uint8_t, 6> octets{};

  static constexpr MacAddr broadcast() noexcept { return {{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}}; }

  bool is_broadcast() const noexcept { return *this == broadcast(); }

  /// Lowercase colon-separated hex, e.g. "aa:bb:cc:dd:ee:ff".
  std::string to_string() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(17);
    for (std::size_t i = 0; i < octets.size(); ++i) {
      if (i) s.push_back(':');
      s.push_back(digits[octets[i] >> 4]);
      s.push_back(digits[octets[i] & 0xf]);
    }
    return s;
  }

  /// Accepts six colon- or dash-separated hex pairs, either case.
  static std::optional<MacAddr> parse(std::string_view text) {
    if (text.size() != 17) return std::nullopt;
    MacAddr mac;
    for (std::size_t i = 0; i < 6; ++i) {
      auto pair = text.substr(i * 3, 2);
      if (i < 5 && text[i * 3 + 2] != ':' && text[i * 3 + 2] != '-') return std::nullopt;
      unsigned v = 0;
      for (char c : pair) {
        v <<= 4;
        if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
        else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
        else return std::nullopt;
      }
      mac.octets[i] = static_cast<std::uint8_t>(v);
    }
    return mac;
  }

  friend auto operator<=>(const MacAddr&, const MacAddr&) = default;
};

/// IPv4 address held in host byte order.
struct Ipv4Addr {
  std::uint32_t value = 0;

  constexpr Ipv4Addr() = default;
  constexpr explicit Ipv4Addr(std::uint32_t v) : value(v) {}
  constexpr Ipv4Addr(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

  std::string to_string() const {
    std::string s;
    s.reserve(15);
    for (int shift = 24; shift >= 0; shift -= 8) {
      s += std::to_string((value >> shift) & 0xff);
      if (shift) s.push_back('.');
    }
    return s;
  }

  /// Dotted quad, decimal octets only, no leading '+' or whitespace.
  static std::optional<Ipv4Addr> parse(std::string_view text) {
    std::uint32_t v = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
      if (i) {
        if (p == end || *p != '.') return std::nullopt;
        ++p;
      }
      if (p == end || *p < '0' || *p > '9') return std::nullopt;
      unsigned octet = 0;
      auto [next, ec] = std::from_chars(p, end, octet);
      if (ec != std::errc{} || octet > 255 || next - p > 3) return std::nullopt;
      v = (v << 8) | octet;
      p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4Addr{v};
  }

  friend constexpr auto operator<=>(const Ipv4Addr&, const Ipv4Addr&) = default;
};

/// Address plus prefix length. An exact address is a /32.
struct Ipv4Prefix {
  Ipv4Addr base;
  std::uint8_t length = 32;

  constexpr std::uint32_t mask() const noexcept {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  }

  constexpr bool contains(Ipv4Addr a) const noexcept {
    return (a.value & mask()) == (base.value & mask());
  }

  std::string to_string() const {
    return length == 32 ? base.to_string() : base.to_string() + "/" + std::to_string(length);
  }

  /// "a.b.c.d" or "a.b.c.d/n". Host bits below the prefix are cleared.
  static std::optional<Ipv4Prefix> parse(std::string_view text) {
    auto slash = text.find('/');
    auto addr = Ipv4Addr::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    if (slash == std::string_view::npos) return Ipv4Prefix{*addr, 32};
    auto len_text = text.substr(slash + 1);
    unsigned len = 0;
    auto [p, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
    if (ec != std::errc{} || p != len_text.data() + len_text.size() || len_text.empty() || len > 32)
      return std::nullopt;
    Ipv4Prefix out{*addr, static_cast<std::uint8_t>(len)};
    out.base.value &= out.mask();
    return out;
  }

  friend constexpr auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;
};

}  // namespace sniff
