#pragma once

#include <cstdint>

namespace rbc {

inline constexpr const char* kCodeVersion = "1.0.0";
inline constexpr std::uint32_t kSnapshotFormatVersion = 1;
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

} // namespace rbc
