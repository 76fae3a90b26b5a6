#pragma once

#include <cstdint>
#include <string>

namespace catkit {

// FNV-1a 64-bit over the canonical config text; embedded in output headers so
// two files are byte-identical exactly when config and seed agree.
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

// "# catkit <kind> config_hash=<hex> seed=<seed>\n"
std::string provenance_header(const std::string& kind, const std::string& config_text,
                              std::uint64_t seed);

}  // namespace catkit
