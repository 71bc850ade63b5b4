#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "snnood/network.hpp"
#include "snnood/scp_detector.hpp"

namespace snnood {

/// Binary container for trained models and fitted detectors:
/// magic "SNNOOD01", a little-endian version word, a length-prefixed section
/// table (name + payload), and a trailing CRC32 over everything before it.
/// Numeric arrays are little-endian IEEE-754 32-bit, so a round trip
/// restores them bit-exactly.
struct ArtifactStore {
  std::string path;
  std::uint32_t format_version = 1;
};

inline constexpr char kStoreMagic[8] = {'S', 'N', 'N', 'O', 'O', 'D', '0', '1'};

/// Writes model and detector (the detector may be empty) into one container.
void persist(const ArtifactStore& store, const NetworkModel<float>& model,
             const ScpDetector& detector);

/// Reads a container back. Throws CorruptionError on checksum failure,
/// FormatError on bad magic/version/layout.
std::pair<NetworkModel<float>, ScpDetector> restore(const ArtifactStore& store);

/// CRC-32 (IEEE 802.3) over a byte range.
std::uint32_t crc32(const unsigned char* data, std::size_t len);

}  // namespace snnood
