#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace guiguard::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// nullopt on malformed input (bad characters or length).
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::array<std::uint8_t, 32> sha256(std::string_view text);

}  // namespace guiguard::codec
