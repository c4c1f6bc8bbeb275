#pragma once

#include <string>
#include <string_view>

namespace boundary {

std::string sha256_hex(std::string_view bytes);
std::string sha256_hex_file(const std::string& path);

}  // namespace boundary
