#pragma once

#include <string>
#include <string_view>

namespace untangle {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string sha256_file_hex(const std::string& path);

}  // namespace untangle
