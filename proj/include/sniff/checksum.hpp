#pragma once

#include <cstdint>

#include "sniff/addr.hpp"
#include "sniff/bytes.hpp"
#include "sniff/error.hpp"

namespace sniff {

/// Adds big-endian 16-bit words of `data` into a running 32-bit accumulator.
/// An odd trailing byte is padded with zero on the right.
inline std::uint32_t ones_complement_accumulate(std::uint32_t sum, ByteSpan data) noexcept {
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) {
    sum += load_be16(data, i);
    sum = (sum & 0xffff) + (sum >> 16);
  }
  if (i < data.size()) {
    sum += std::uint32_t{data[i]} << 8;
    sum = (sum & 0xffff) + (sum >> 16);
  }
  return sum;
}

inline std::uint16_t fold_ones_complement(std::uint32_t sum) noexcept {
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(sum);
}

/// Internet checksum (one's complement of the one's-complement sum).
inline std::uint16_t internet_checksum(ByteSpan data) noexcept {
  return static_cast<std::uint16_t>(~fold_ones_complement(ones_complement_accumulate(0, data)));
}

namespace detail {
inline void check_ipv4_header_span(ByteSpan header) {
  if (header.size() % 2 != 0) throw DecodeError(DecodeErrc::OddLength, "ipv4 checksum");
  if (header.size() < 20) throw DecodeError(DecodeErrc::TruncatedFrame, "ipv4 checksum");
}
}  // namespace detail

/// Checksum for an IPv4 header whose checksum field has been zeroed.
inline std::uint16_t compute_ipv4_checksum(ByteSpan header_with_zeroed_checksum) {
  detail::check_ipv4_header_span(header_with_zeroed_checksum);
  return internet_checksum(header_with_zeroed_checksum);
}

/// True iff the words of the header, checksum included, sum to 0xffff.
inline bool verify_ipv4_checksum(ByteSpan header) {
  detail::check_ipv4_header_span(header);
  return fold_ones_complement(ones_complement_accumulate(0, header)) == 0xffff;
}

/// Sum of the IPv4 pseudo-header used by TCP and UDP.
inline std::uint32_t pseudo_header_sum(Ipv4Addr src, Ipv4Addr dst, std::uint8_t protocol,
                                       std::size_t segment_length) noexcept {
  std::uint32_t sum = 0;
  sum += src.value >> 16;
  sum += src.value & 0xffff;
  sum += dst.value >> 16;
  sum += dst.value & 0xffff;
  sum += protocol;
  sum += static_cast<std::uint32_t>(segment_length & 0xffff);
  return fold_ones_complement(sum);
}

/// Checksum of a TCP/UDP segment (its checksum field zeroed) under the
/// IPv4 pseudo-header.
inline std::uint16_t transport_checksum(Ipv4Addr src, Ipv4Addr dst, std::uint8_t protocol,
                                        ByteSpan segment) noexcept {
  auto sum = ones_complement_accumulate(pseudo_header_sum(src, dst, protocol, segment.size()), segment);
  return static_cast<std::uint16_t>(~fold_ones_complement(sum));
}

/// A segment with its stored checksum verifies when the full sum is 0xffff.
inline bool verify_transport_checksum(Ipv4Addr src, Ipv4Addr dst, std::uint8_t protocol,
                                      ByteSpan segment) noexcept {
  auto sum = ones_complement_accumulate(pseudo_header_sum(src, dst, protocol, segment.size()), segment);
  return fold_ones_complement(sum) == 0xffff;
}

}  // namespace sniff
