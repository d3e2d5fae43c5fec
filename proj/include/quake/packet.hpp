#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quake {

// Wire format, all integers little-endian:
//   magic "QUKE" | version u8 (=1) | seq u32 | sample_rate u32 | count u16 |
//   samples count x i16 | crc32 u32 over all prior bytes (IEEE)
struct TelemetryPacket {
  std::uint32_t seq = 0;
  std::uint32_t sample_rate = 0;
  std::vector<std::int16_t> samples;  // count >= 1

  bool operator==(const TelemetryPacket&) const = default;
};

struct PacketError : std::runtime_error {
  enum class Reason { bad_magic, bad_version, crc_mismatch, truncated, empty };
  Reason reason;

  PacketError(Reason r, const std::string& msg)
      : std::runtime_error(msg), reason(r) {}
};

constexpr std::size_t kPacketHeaderSize = 4 + 1 + 4 + 4 + 2;
constexpr std::size_t kMaxSamplesPerPacket = 256;

std::size_t encoded_packet_size(std::size_t count);
std::vector<std::uint8_t> encode_packet(const TelemetryPacket& p);
TelemetryPacket decode_packet(std::span<const std::uint8_t> bytes);

}  // namespace quake
