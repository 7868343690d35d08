#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace genaff {

// SHA-256 digest as a lowercase hex string. Used for cache keys and input
// file digests in run manifests.
std::string sha256_hex(std::string_view data);

std::string sha256_file_hex(const std::string& path);

} // namespace genaff
