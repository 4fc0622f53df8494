#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tcfd {

std::uint64_t fnv1a64(std::string_view data);

/// Stable prompt fingerprint used by the scripted mock backend: FNV-1a 64 of
/// the prompt text as 16 lowercase hex digits.
std::string fingerprint(std::string_view text);

std::string sha256_hex(std::string_view data);

}  // namespace tcfd
