#pragma once

// "vgrid" volume files: a JSON header `<name>.json` and a raw little-endian
// payload `<name>.bin`.
//
//   {"magic":"vgrid1","kind":"labels","dtype":"u64","shape":[Z,Y,X]}
//   {"magic":"vgrid1","kind":"affinities","dtype":"f32","shape":[3,Z,Y,X]}

#include <filesystem>
#include <string>
#include <variant>

#include "mala/volume.hpp"

namespace mala {

class VgridError : public Error {
public:
  enum class Kind { io, bad_magic, bad_header, dtype_mismatch, shape_mismatch, truncated, trailing_data };

  VgridError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

using AnyVolume = std::variant<LabelVolume, AffinityVolume>;

// `path` may be the bare volume name or either of its two file names.
AnyVolume read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);
AffinityVolume read_affinities(const std::filesystem::path& path);

void write_volume(const LabelVolume& vol, const std::filesystem::path& path);
void write_volume(const AffinityVolume& vol, const std::filesystem::path& path);
// Edge fields of doubles (e.g. gradients) are stored as f32 affinities-kind volumes.
void write_volume(const GradientVolume& vol, const std::filesystem::path& path);

std::string vgrid_header(const LabelVolume& vol);
std::string vgrid_header(const AffinityVolume& vol);

} // namespace mala
