#include "slosh/frame_io.hpp"

#include <cstdio>
#include <fstream>

#include "slosh/binio.hpp"
#include "slosh/errors.hpp"

namespace slosh {
namespace {

constexpr char kMagic[8] = {'S', 'L', 'S', 'H', 'F', 'R', 'M', 'S'};

std::uint64_t frame_payload_bytes(std::uint64_t n) { return (n * 9 + 12) * 8; }

}  // namespace

std::string serialize_frames(const FrameSequence& seq) {
  if (seq.empty()) throw InputError("write_frames: empty sequence");
  seq.validate();
  const std::size_t n = seq.frames[0].size();
  binio::Writer w;
  w.bytes(std::string_view(kMagic, 8));
  w.u32(kFrameFileVersion);
  w.u32(binio::kEndianTag);
  w.u64(n);
  w.u64(seq.size());
  w.f64(seq.dt);
  w.f64(seq.seconds_per_frame);
  for (Kind k : seq.frames[0].kinds) w.u8(static_cast<std::uint8_t>(k));
  w.u32(static_cast<std::uint32_t>(seq.rotations.size()));
  for (const auto& r : seq.rotations) {
    w.u64(r.frame);
    w.f64(r.pitch);
    w.f64(r.roll);
  }
  for (std::size_t f = 0; f < seq.size(); ++f) {
    const ParticleSet& p = seq.frames[f];
    w.u64(frame_payload_bytes(n));
    for (const auto* arr : {&p.positions, &p.velocities, &p.normals})
      for (const Vec3& v : *arr)
        for (int d = 0; d < 3; ++d) w.f64(v[d]);
    const auto& t = seq.transforms[f];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) w.f64(t.orientation(r, c));
    for (int d = 0; d < 3; ++d) w.f64(t.center[d]);
  }
  w.u64(binio::fnv1a64(w.data()));
  return std::move(w.data());
}

FrameSequence deserialize_frames(std::string_view bytes, const std::string& what) {
  if (bytes.size() < 8 || std::string_view(bytes.data(), 8) != std::string_view(kMagic, 8))
    throw CorruptionError(what + ": not a frame file (bad magic)");
  binio::Reader r(bytes, what);
  r.bytes(8);
  const std::uint32_t version = r.u32();
  if (version != kFrameFileVersion)
    throw VersionError(what + ": frame file version " + std::to_string(version) + ", this build reads " +
                       std::to_string(kFrameFileVersion));
  if (r.u32() != binio::kEndianTag) throw CorruptionError(what + ": endianness tag mismatch");
  if (bytes.size() < r.pos() + 8) throw CorruptionError(what + ": truncated header");
  const std::uint64_t stored = binio::Reader(bytes.substr(bytes.size() - 8), what).u64();
  if (stored != binio::fnv1a64(bytes.substr(0, bytes.size() - 8)))
    throw CorruptionError(what + ": checksum mismatch (truncated or damaged file)");

  const std::uint64_t n = r.u64();
  const std::uint64_t frames = r.u64();
  FrameSequence seq;
  seq.dt = r.f64();
  seq.seconds_per_frame = r.f64();
  if (n > bytes.size() || frames > bytes.size()) throw CorruptionError(what + ": implausible header counts");
  std::vector<Kind> kinds(n);
  for (auto& k : kinds) {
    const std::uint8_t b = r.u8();
    if (b > 1) throw CorruptionError(what + ": unknown particle kind " + std::to_string(b));
    k = static_cast<Kind>(b);
  }
  const std::uint32_t rot = r.u32();
  for (std::uint32_t i = 0; i < rot; ++i) {
    ScheduledRotation s;
    s.frame = r.u64();
    s.pitch = r.f64();
    s.roll = r.f64();
    seq.rotations.push_back(s);
  }
  for (std::uint64_t f = 0; f < frames; ++f) {
    const std::uint64_t len = r.u64();
    if (len != frame_payload_bytes(n))
      throw CorruptionError(what + ": frame " + std::to_string(f) + " payload length " + std::to_string(len) +
                            " does not match particle count " + std::to_string(n));
    ParticleSet p;
    p.kinds = kinds;
    for (auto* arr : {&p.positions, &p.velocities, &p.normals}) {
      arr->resize(n);
      for (Vec3& v : *arr)
        for (int d = 0; d < 3; ++d) v[d] = r.f64();
    }
    FrameTransform t;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) t.orientation(i, c) = r.f64();
    for (int d = 0; d < 3; ++d) t.center[d] = r.f64();
    seq.frames.push_back(std::move(p));
    seq.transforms.push_back(t);
  }
  if (r.remaining() != 8) throw CorruptionError(what + ": trailing bytes after last frame");
  return seq;
}

void write_frames(const FrameSequence& seq, const std::filesystem::path& path) {
  binio::atomic_write(path, serialize_frames(seq));
}

FrameSequence read_frames(const std::filesystem::path& path) {
  return deserialize_frames(binio::read_file(path), path.string());
}

void export_csv(const FrameSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < seq.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.csv", f);
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out.precision(17);
    out << "kind,x,y,z,vx,vy,vz\n";
    const ParticleSet& p = seq.frames[f];
    for (std::size_t i = 0; i < p.size(); ++i) {
      out << (p.kinds[i] == Kind::Fluid ? "fluid" : "boundary");
      for (int d = 0; d < 3; ++d) out << ',' << p.positions[i][d];
      for (int d = 0; d < 3; ++d) out << ',' << p.velocities[i][d];
      out << '\n';
    }
  }
}

}  // namespace slosh
