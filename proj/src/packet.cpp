#include "quake/packet.hpp"

#include <cstring>

#include "quake/crc32.hpp"

namespace quake {

namespace {
constexpr std::uint8_t kVersion = 1;
}

std::size_t encoded_packet_size(std::size_t count) {
  return kPacketHeaderSize + 2 * count + 4;
}

std::vector<std::uint8_t> encode_packet(const TelemetryPacket& p) {
  if (p.samples.empty())
    throw PacketError(PacketError::Reason::empty, "packet: empty sample block");
  if (p.samples.size() > 0xFFFF)
    throw PacketError(PacketError::Reason::empty, "packet: count exceeds u16");

  std::vector<std::uint8_t> out;
  out.reserve(encoded_packet_size(p.samples.size()));
  out.insert(out.end(), {'Q', 'U', 'K', 'E'});
  out.push_back(kVersion);
  auto put_u32 = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
  };
  put_u32(p.seq);
  put_u32(p.sample_rate);
  out.push_back(std::uint8_t(p.samples.size()));
  out.push_back(std::uint8_t(p.samples.size() >> 8));
  for (std::int16_t s : p.samples) {
    out.push_back(std::uint8_t(std::uint16_t(s)));
    out.push_back(std::uint8_t(std::uint16_t(s) >> 8));
  }
  put_u32(crc32_ieee(out));
  return out;
}

TelemetryPacket decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPacketHeaderSize + 4)
    throw PacketError(PacketError::Reason::truncated,
                      "packet: shorter than header");
  const std::size_t count = std::size_t(bytes[13]) | std::size_t(bytes[14]) << 8;
  const std::size_t expected = encoded_packet_size(count);
  if (bytes.size() != expected)
    throw PacketError(PacketError::Reason::truncated,
                      "packet: size " + std::to_string(bytes.size()) +
                          " does not match count (expected " +
                          std::to_string(expected) + ")");

  auto get_u32 = [&bytes](std::size_t at) {
    return std::uint32_t(bytes[at]) | std::uint32_t(bytes[at + 1]) << 8 |
           std::uint32_t(bytes[at + 2]) << 16 |
           std::uint32_t(bytes[at + 3]) << 24;
  };
  if (crc32_ieee(bytes.subspan(0, expected - 4)) != get_u32(expected - 4))
    throw PacketError(PacketError::Reason::crc_mismatch, "packet: CRC mismatch");
  if (std::memcmp(bytes.data(), "QUKE", 4) != 0)
    throw PacketError(PacketError::Reason::bad_magic, "packet: bad magic");
  if (bytes[4] != kVersion)
    throw PacketError(PacketError::Reason::bad_version,
                      "packet: unsupported version " + std::to_string(bytes[4]));
  if (count == 0)
    throw PacketError(PacketError::Reason::empty, "packet: zero sample count");

  TelemetryPacket p;
  p.seq = get_u32(5);
  p.sample_rate = get_u32(9);
  p.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t raw = std::uint16_t(bytes[kPacketHeaderSize + 2 * i]) |
                              std::uint16_t(bytes[kPacketHeaderSize + 2 * i + 1])
                                  << 8;
    p.samples[i] = std::int16_t(raw);
  }
  return p;
}

}  // namespace quake
