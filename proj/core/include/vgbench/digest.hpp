#pragma once

#include <string>
#include <string_view>

namespace vgbench {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Lower-case hex HMAC-SHA-256 of `message` under `key`.
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

/// `n` random bytes from the OpenSSL generator, hex encoded.
std::string random_hex(std::size_t n);

}  // namespace vgbench
