#pragma once

#include <cstdint>
#include <span>

namespace quake {

// CRC-32 (IEEE 802.3): reflected 0xEDB88320, init/xorout 0xFFFFFFFF.
std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

}  // namespace quake
