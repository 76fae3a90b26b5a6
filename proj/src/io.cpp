#include "catkit/io.hpp"

#include <cstdio>

namespace catkit {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string provenance_header(const std::string& kind, const std::string& config_text,
                              std::uint64_t seed) {
  return "# catkit " + kind + " config_hash=" + hex64(fnv1a64(config_text)) +
         " seed=" + std::to_string(seed) + "\n";
}

}  // namespace catkit
