#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ifaddrs.h>
#include <linux/if_packet.h>
#include <net/if.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include "sniff/addr.hpp"
#include "sniff/capture.hpp"

namespace sniff {

struct InterfaceInfo {
  std::string name;
  std::string description;
  std::optional<MacAddr> mac;
  std::vector<Ipv4Addr> ipv4;
  bool up = false;

  friend bool operator==(const InterfaceInfo&, const InterfaceInfo&) = default;
};

using InterfaceEnumerator = std::function<std::vector<InterfaceInfo>()>;

/// Environment variable holding a comma-separated fake listing, e.g.
/// "eth1,eth0". The value "EPERM" simulates an unprivileged host.
inline constexpr const char* fixture_ifaces_env = "SNIFF_FIXTURE_IFACES";

/// Enumerates via getifaddrs(3), merging the per-family entries by name.
inline std::vector<InterfaceInfo> system_interfaces() {
  ifaddrs* head = nullptr;
  if (getifaddrs(&head) != 0) {
    if (errno == EPERM || errno == EACCES)
      throw CaptureError(CaptureError::Code::PermissionDenied, "interface enumeration not permitted");
    throw CaptureError(CaptureError::Code::Io, "getifaddrs failed");
  }
  std::map<std::string, InterfaceInfo> byname;
  for (auto* ifa = head; ifa; ifa = ifa->ifa_next) {
    auto& info = byname[ifa->ifa_name];
    info.name = ifa->ifa_name;
    info.up = (ifa->ifa_flags & IFF_UP) != 0;
    if (info.description.empty()) info.description = (ifa->ifa_flags & IFF_LOOPBACK) ? "loopback" : "ethernet";
    if (!ifa->ifa_addr) continue;
    if (ifa->ifa_addr->sa_family == AF_INET) {
      auto* sin = reinterpret_cast<const sockaddr_in*>(ifa->ifa_addr);
      info.ipv4.emplace_back(ntohl(sin->sin_addr.s_addr));
    } else if (ifa->ifa_addr->sa_family == AF_PACKET) {
      auto* sll = reinterpret_cast<const sockaddr_ll*>(ifa->ifa_addr);
      if (sll->sll_halen == 6) {
        MacAddr m;
        std::copy_n(sll->sll_addr, 6, m.octets.begin());
        info.mac = m;
      }
    }
  }
  freeifaddrs(head);
  std::vector<InterfaceInfo> out;
  for (auto& [_, info] : byname) out.push_back(std::move(info));
  return out;
}

/// Honors SNIFF_FIXTURE_IFACES when set, otherwise the real system listing.
inline std::vector<InterfaceInfo> fixture_or_system_interfaces() {
  const char* env = std::getenv(fixture_ifaces_env);
  if (!env) return system_interfaces();
  std::string listing = env;
  if (listing == "EPERM") throw CaptureError(CaptureError::Code::PermissionDenied, "interface enumeration not permitted");
  std::vector<InterfaceInfo> out;
  std::size_t pos = 0;
  while (pos <= listing.size()) {
    auto comma = listing.find(',', pos);
    auto name = listing.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!name.empty()) out.push_back({name, "fixture", std::nullopt, {}, true});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

/// Sorted by name; duplicate names collapse to the first entry.
inline std::vector<InterfaceInfo> list_interfaces(const InterfaceEnumerator& enumerate = fixture_or_system_interfaces) {
  auto all = enumerate();
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  all.erase(std::unique(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.name == b.name; }),
            all.end());
  return all;
}

}  // namespace sniff
