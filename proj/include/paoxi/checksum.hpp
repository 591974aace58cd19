#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace paoxi {

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view text, std::uint32_t seed = 0);

/// Eight lowercase hex digits.
std::string to_hex(std::uint32_t value);

std::string read_text_file(const std::filesystem::path& path);
std::string file_crc32_hex(const std::filesystem::path& path);

}  // namespace paoxi
