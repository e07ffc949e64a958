#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sniff {

enum class DecodeErrc {
  TruncatedFrame,
  BadVersion,
  BadIhl,
  BadLength,
  BadDataOffset,
  UnsupportedArp,
  OddLength,
};

constexpr std::string_view to_string(DecodeErrc code) noexcept {
  switch (code) {
    case DecodeErrc::TruncatedFrame: return "TruncatedFrame";
    case DecodeErrc::BadVersion: return "BadVersion";
    case DecodeErrc::BadIhl: return "BadIhl";
    case DecodeErrc::BadLength: return "BadLength";
    case DecodeErrc::BadDataOffset: return "BadDataOffset";
    case DecodeErrc::UnsupportedArp: return "UnsupportedArp";
    case DecodeErrc::OddLength: return "OddLength";
  }
  return "Unknown";
}

/// Raised by the per-layer decoders. `dissect` never lets one escape.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrc code, std::string_view layer)
      : std::runtime_error(std::string(layer) + ": " + std::string(to_string(code))),
        code_(code) {}

  DecodeErrc code() const noexcept { return code_; }

 private:
  DecodeErrc code_;
};

}  // namespace sniff
