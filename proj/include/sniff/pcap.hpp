#pragma once

// Classic libpcap file format: a 24-byte global header followed by records of
// a 16-byte header and the captured bytes. Both byte orders and both
// timestamp resolutions are read; writing defaults to nanoseconds in native
// order.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sniff/frame.hpp"

namespace sniff {

enum class TsResolution { Micro, Nano };
enum class ByteOrder { Little, Big };

inline constexpr ByteOrder native_byte_order =
    std::endian::native == std::endian::big ? ByteOrder::Big : ByteOrder::Little;

namespace pcap_magic {
inline constexpr std::uint32_t micro = 0xA1B2C3D4;
inline constexpr std::uint32_t nano = 0xA1B23C4D;
}  // namespace pcap_magic

inline constexpr std::uint32_t linktype_ethernet = 1;
inline constexpr std::size_t pcap_global_header_size = 24;
inline constexpr std::size_t pcap_record_header_size = 16;

struct PcapMetadata {
  TsResolution resolution = TsResolution::Nano;
  ByteOrder byte_order = native_byte_order;
  std::uint16_t version_major = 2;
  std::uint16_t version_minor = 4;
  std::int32_t thiszone = 0;
  std::uint32_t sigfigs = 0;
  std::uint32_t snaplen = 262144;
  std::uint32_t linktype = linktype_ethernet;

  friend bool operator==(const PcapMetadata&, const PcapMetadata&) = default;
};

class PcapError : public std::runtime_error {
 public:
  enum class Code { BadMagic, TruncatedFile, FrameTooLarge, BadRecord, Io };

  PcapError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) noexcept {
  return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

inline std::uint32_t load32(const std::uint8_t* p, ByteOrder order) noexcept {
  if (order == ByteOrder::Little)
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

inline std::uint16_t load16(const std::uint8_t* p, ByteOrder order) noexcept {
  if (order == ByteOrder::Little) return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline void store32(std::uint8_t* p, std::uint32_t v, ByteOrder order) noexcept {
  for (int i = 0; i < 4; ++i) {
    int shift = order == ByteOrder::Little ? 8 * i : 8 * (3 - i);
    p[i] = static_cast<std::uint8_t>(v >> shift);
  }
}

inline void store16(std::uint8_t* p, std::uint16_t v, ByteOrder order) noexcept {
  if (order == ByteOrder::Little) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
  } else {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
  }
}

/// Reads up to n bytes; returns how many arrived.
inline std::size_t read_some(std::istream& in, std::uint8_t* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace detail

/// Streaming reader: holds one record at a time.
class PcapReader {
 public:
  /// Records larger than this are treated as corruption rather than allocated.
  static constexpr std::uint32_t max_record_size = 256u << 20;

  explicit PcapReader(std::istream& in) : in_(in) {
    std::uint8_t hdr[pcap_global_header_size];
    auto got = detail::read_some(in_, hdr, sizeof hdr);
    if (got < 4) throw PcapError(PcapError::Code::BadMagic, "pcap: file too short for magic number");
    auto le = detail::load32(hdr, ByteOrder::Little);
    if (le == pcap_magic::micro || le == pcap_magic::nano) {
      meta_.byte_order = ByteOrder::Little;
    } else if (detail::byteswap32(le) == pcap_magic::micro || detail::byteswap32(le) == pcap_magic::nano) {
      meta_.byte_order = ByteOrder::Big;
      le = detail::byteswap32(le);
    } else {
      throw PcapError(PcapError::Code::BadMagic, "pcap: unrecognized magic number");
    }
    meta_.resolution = le == pcap_magic::nano ? TsResolution::Nano : TsResolution::Micro;
    if (got < sizeof hdr) throw PcapError(PcapError::Code::TruncatedFile, "pcap: truncated global header");
    auto bo = meta_.byte_order;
    meta_.version_major = detail::load16(hdr + 4, bo);
    meta_.version_minor = detail::load16(hdr + 6, bo);
    meta_.thiszone = static_cast<std::int32_t>(detail::load32(hdr + 8, bo));
    meta_.sigfigs = detail::load32(hdr + 12, bo);
    meta_.snaplen = detail::load32(hdr + 16, bo);
    meta_.linktype = detail::load32(hdr + 20, bo);
  }

  const PcapMetadata& metadata() const noexcept { return meta_; }
  std::uint64_t frames_read() const noexcept { return count_; }

  /// Next frame, or nullopt at a clean end of file. A record cut short throws
  /// TruncatedFile after all earlier frames have been returned.
  std::optional<RawFrame> next() {
    std::uint8_t rh[pcap_record_header_size];
    auto got = detail::read_some(in_, rh, sizeof rh);
    if (got == 0) return std::nullopt;
    if (got < sizeof rh)
      throw PcapError(PcapError::Code::TruncatedFile,
                      "pcap: record header of frame " + std::to_string(count_ + 1) + " cut short");
    auto bo = meta_.byte_order;
    RawFrame f;
    f.ts.sec = detail::load32(rh, bo);
    auto frac = detail::load32(rh + 4, bo);
    auto incl = detail::load32(rh + 8, bo);
    f.orig_len = detail::load32(rh + 12, bo);
    if (meta_.resolution == TsResolution::Micro) {
      if (frac >= 1'000'000)
        throw PcapError(PcapError::Code::BadRecord, "pcap: microsecond field out of range");
      f.ts.nsec = frac * 1000;
    } else {
      if (frac >= 1'000'000'000)
        throw PcapError(PcapError::Code::BadRecord, "pcap: nanosecond field out of range");
      f.ts.nsec = frac;
    }
    if (incl > max_record_size)
      throw PcapError(PcapError::Code::BadRecord, "pcap: record length " + std::to_string(incl) + " is implausible");
    // Some writers store orig_len < incl_len; the captured bytes are authoritative.
    if (f.orig_len < incl) f.orig_len = incl;
    f.data.resize(incl);
    if (detail::read_some(in_, f.data.data(), incl) < incl)
      throw PcapError(PcapError::Code::TruncatedFile,
                      "pcap: body of frame " + std::to_string(count_ + 1) + " cut short");
    ++count_;
    return f;
  }

 private:
  std::istream& in_;
  PcapMetadata meta_;
  std::uint64_t count_ = 0;
};

struct PcapWriteOptions {
  TsResolution resolution = TsResolution::Nano;
  ByteOrder byte_order = native_byte_order;
  std::uint32_t snaplen = 262144;
  std::uint32_t linktype = linktype_ethernet;
};

class PcapWriter {
 public:
  PcapWriter(std::ostream& out, PcapWriteOptions opts = {}) : out_(out), opts_(opts) {
    std::uint8_t hdr[pcap_global_header_size]{};
    auto bo = opts_.byte_order;
    detail::store32(hdr, opts_.resolution == TsResolution::Nano ? pcap_magic::nano : pcap_magic::micro, bo);
    detail::store16(hdr + 4, 2, bo);
    detail::store16(hdr + 6, 4, bo);
    detail::store32(hdr + 16, opts_.snaplen, bo);
    detail::store32(hdr + 20, opts_.linktype, bo);
    put(hdr, sizeof hdr);
  }

  void write(const RawFrame& f) {
    if (f.cap_len() > opts_.snaplen)
      throw PcapError(PcapError::Code::FrameTooLarge, "pcap: frame of " + std::to_string(f.cap_len()) +
                                                          " bytes exceeds snaplen " + std::to_string(opts_.snaplen));
    std::uint8_t rh[pcap_record_header_size];
    auto bo = opts_.byte_order;
    std::uint32_t frac = f.ts.nsec;
    if (opts_.resolution == TsResolution::Micro) {
      frac = f.ts.nsec / 1000;
      if (f.ts.nsec % 1000 != 0) ++precision_loss_;
    }
    detail::store32(rh, static_cast<std::uint32_t>(f.ts.sec), bo);
    detail::store32(rh + 4, frac, bo);
    detail::store32(rh + 8, f.cap_len(), bo);
    detail::store32(rh + 12, std::max(f.orig_len, f.cap_len()), bo);
    put(rh, sizeof rh);
    put(f.data.data(), f.data.size());
    ++count_;
  }

  /// Frames whose sub-microsecond digits were dropped.
  std::uint64_t precision_loss() const noexcept { return precision_loss_; }
  std::uint64_t frames_written() const noexcept { return count_; }

 private:
  void put(const std::uint8_t* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw PcapError(PcapError::Code::Io, "pcap: write failed");
  }

  std::ostream& out_;
  PcapWriteOptions opts_;
  std::uint64_t precision_loss_ = 0;
  std::uint64_t count_ = 0;
};

struct PcapContents {
  PcapMetadata metadata;
  std::vector<RawFrame> frames;
};

/// Reads a whole stream into memory.
inline PcapContents read_pcap(std::istream& in) {
  PcapReader r(in);
  PcapContents out{r.metadata(), {}};
  while (auto f = r.next()) out.frames.push_back(std::move(*f));
  return out;
}

struct PcapImage {
  std::string bytes;
  std::uint64_t precision_loss = 0;
};

inline PcapImage write_pcap(const std::vector<RawFrame>& frames, PcapWriteOptions opts = {}) {
  std::ostringstream os(std::ios::binary);
  PcapWriter w(os, opts);
  for (const auto& f : frames) w.write(f);
  return {std::move(os).str(), w.precision_loss()};
}

}  // namespace sniff
