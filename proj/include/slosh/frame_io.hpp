#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "slosh/pbf.hpp"

namespace slosh {

inline constexpr std::uint32_t kFrameFileVersion = 1;

/// FrameFile layout (all little-endian):
///   "SLSHFRMS" | u32 version | u32 endian tag 0x01020304 | u64 particles N
///   | u64 frames F | f64 dt | f64 seconds_per_frame | N × u8 kind
///   | u32 R | R × (u64 frame, f64 pitch, f64 roll)
///   | F × (u64 payload bytes | N×3 positions | N×3 velocities | N×3 normals
///          | 9 orientation (row-major) | 3 center)
///   | u64 FNV-1a of all preceding bytes
std::string serialize_frames(const FrameSequence& seq);
FrameSequence deserialize_frames(std::string_view bytes, const std::string& what = "frame data");

/// Atomic: writes a temp file next to `path`, then renames it.
/// Throws InputError for an empty sequence, IoError on failure.
void write_frames(const FrameSequence& seq, const std::filesystem::path& path);
/// Throws CorruptionError / VersionError / IoError.
FrameSequence read_frames(const std::filesystem::path& path);

/// One CSV per frame: kind,x,y,z,vx,vy,vz.
void export_csv(const FrameSequence& seq, const std::filesystem::path& dir);

}  // namespace slosh
