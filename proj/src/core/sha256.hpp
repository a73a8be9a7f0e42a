#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace svc {

std::array<uint8_t, 32> sha256(const void* data, size_t len);
std::array<uint8_t, 32> sha256(const std::string& s);
std::string hex_digest(const std::array<uint8_t, 32>& d);

}  // namespace svc
