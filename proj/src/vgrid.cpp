#include "mala/vgrid.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mala {
namespace {

namespace fs = std::filesystem;
using Kind = VgridError::Kind;

constexpr const char* kMagic = "vgrid1";

fs::path base_of(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") return fs::path(path).replace_extension();
  return path;
}

fs::path with_ext(const fs::path& base, const char* ext) {
  return fs::path(base.string() + ext);
}

template <typename T>
void to_little_endian(std::vector<T>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
}

std::string make_header(const char* kind, const char* dtype, std::vector<std::uint64_t> shape) {
  nlohmann::ordered_json h;
  h["magic"] = kMagic;
  h["kind"] = kind;
  h["dtype"] = dtype;
  h["shape"] = std::move(shape);
  return h.dump();
}

template <typename T>
void write_pair(const fs::path& path, const std::string& header, std::vector<T> values) {
  const auto base = base_of(path);
  {
    std::ofstream out(with_ext(base, ".json"), std::ios::binary | std::ios::trunc);
    if (!out) throw VgridError(Kind::io, "cannot open " + with_ext(base, ".json").string());
    out << header << '\n';
  }
  to_little_endian(values);
  std::ofstream out(with_ext(base, ".bin"), std::ios::binary | std::ios::trunc);
  if (!out) throw VgridError(Kind::io, "cannot open " + with_ext(base, ".bin").string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw VgridError(Kind::io, "write failed for " + with_ext(base, ".bin").string());
}

struct Header {
  std::string kind;
  std::string dtype;
  std::vector<std::uint64_t> shape;
};

Header parse_header(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw VgridError(Kind::io, "cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw VgridError(Kind::bad_header, "malformed vgrid header " + file.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("magic") || j["magic"] != kMagic)
    throw VgridError(Kind::bad_magic, "bad magic in " + file.string());
  Header h;
  try {
    h.kind = j.at("kind").get<std::string>();
    h.dtype = j.at("dtype").get<std::string>();
    h.shape = j.at("shape").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw VgridError(Kind::bad_header, "incomplete vgrid header " + file.string() + ": " + e.what());
  }
  if (h.kind == "labels") {
    if (h.dtype != "u64") throw VgridError(Kind::dtype_mismatch, "labels must be u64, got " + h.dtype);
    if (h.shape.size() != 3) throw VgridError(Kind::shape_mismatch, "labels shape must be [Z,Y,X]");
  } else if (h.kind == "affinities") {
    if (h.dtype != "f32") throw VgridError(Kind::dtype_mismatch, "affinities must be f32, got " + h.dtype);
    if (h.shape.size() != 4 || h.shape[0] != kAxes)
      throw VgridError(Kind::shape_mismatch, "affinities shape must be [3,Z,Y,X]");
  } else {
    throw VgridError(Kind::bad_header, "unknown vgrid kind '" + h.kind + "'");
  }
  return h;
}

template <typename T>
std::vector<T> read_payload(const fs::path& file, std::uint64_t count) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw VgridError(Kind::io, "cannot open " + file.string());
  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  const auto expected = count * sizeof(T);
  if (bytes < expected)
    throw VgridError(Kind::truncated, "payload " + file.string() + " has " + std::to_string(bytes) +
                                          " bytes, expected " + std::to_string(expected));
  if (bytes > expected)
    throw VgridError(Kind::trailing_data, "payload " + file.string() + " has " + std::to_string(bytes) +
                                              " bytes, expected " + std::to_string(expected));
  std::vector<T> values(count);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (!in) throw VgridError(Kind::io, "read failed for " + file.string());
  to_little_endian(values);
  return values;
}

Shape3 shape_from(const std::vector<std::uint64_t>& dims) {
  Shape3 s{dims[0], dims[1], dims[2]};
  try {
    s.validate();
  } catch (const Error& e) {
    throw VgridError(Kind::shape_mismatch, e.what());
  }
  return s;
}

} // namespace

std::string vgrid_header(const LabelVolume& vol) {
  return make_header("labels", "u64", {vol.shape.z, vol.shape.y, vol.shape.x});
}

std::string vgrid_header(const AffinityVolume& vol) {
  return make_header("affinities", "f32", {kAxes, vol.shape.z, vol.shape.y, vol.shape.x});
}

AnyVolume read_volume(const fs::path& path) {
  const auto base = base_of(path);
  const auto h = parse_header(with_ext(base, ".json"));
  if (h.kind == "labels") {
    const auto s = shape_from(h.shape);
    return LabelVolume(s, read_payload<std::uint64_t>(with_ext(base, ".bin"), s.voxels()));
  }
  const auto s = shape_from({h.shape[1], h.shape[2], h.shape[3]});
  return AffinityVolume(s, read_payload<float>(with_ext(base, ".bin"), kAxes * s.voxels()));
}

LabelVolume read_labels(const fs::path& path) {
  auto v = read_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw VgridError(Kind::dtype_mismatch, path.string() + " holds affinities, expected labels");
}

AffinityVolume read_affinities(const fs::path& path) {
  auto v = read_volume(path);
  if (auto* a = std::get_if<AffinityVolume>(&v)) return std::move(*a);
  throw VgridError(Kind::dtype_mismatch, path.string() + " holds labels, expected affinities");
}

void write_volume(const LabelVolume& vol, const fs::path& path) {
  write_pair(path, vgrid_header(vol), vol.data);
}

void write_volume(const AffinityVolume& vol, const fs::path& path) {
  write_pair(path, vgrid_header(vol), vol.data);
}

void write_volume(const GradientVolume& vol, const fs::path& path) {
  AffinityVolume f(vol.shape);
  for (std::size_t i = 0; i < vol.data.size(); ++i) f.data[i] = static_cast<float>(vol.data[i]);
  write_volume(f, path);
}

} // namespace mala
