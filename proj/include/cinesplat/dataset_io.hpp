#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cinesplat/common.hpp"
#include "cinesplat/forward_model.hpp"

namespace cinesplat {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

template <typename T>
void write_blob(const std::filesystem::path& path, const T* data, std::size_t count) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!f) throw IoError("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path.string());
  const auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != count * sizeof(T))
    throw IoError("unexpected size for " + path.string() + ": got " + std::to_string(bytes) +
                  ", want " + std::to_string(count * sizeof(T)));
  std::vector<T> out(count);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw IoError("read failed: " + path.string());
  return out;
}

// complex64 on disk: interleaved float32 pairs.
inline void write_c64(const std::filesystem::path& path, std::span<const Cx> data) {
  std::vector<float> packed(2 * data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    packed[2 * i] = static_cast<float>(data[i].real());
    packed[2 * i + 1] = static_cast<float>(data[i].imag());
  }
  write_blob(path, packed.data(), packed.size());
}

inline std::vector<Cx> read_c64(const std::filesystem::path& path, std::size_t count) {
  const auto packed = read_blob<float>(path, 2 * count);
  std::vector<Cx> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = Cx(packed[2 * i], packed[2 * i + 1]);
  return out;
}

}  // namespace detail

// Container layout: header.json plus raw little-endian blobs (y.c64, mask.u8
// or points.f64, coils.c64, optional reference.c64).
inline void save_dataset(const KSpaceDataset& ds, const std::filesystem::path& dir) {
  ds.check_consistent();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());

  nlohmann::json h;
  h["format_version"] = kDatasetFormatVersion;
  h["coords"] = kCoordConvention;
  h["height"] = ds.height;
  h["width"] = ds.width;
  h["frames"] = ds.frames;
  h["n_coils"] = ds.n_coils;
  h["noise_std"] = ds.noise_std;
  h["pattern"] = ds.pattern.kind == PatternKind::cartesian ? "cartesian" : "points";
  nlohmann::json blobs;
  blobs["y"] = "y.c64";
  blobs["coils"] = "coils.c64";
  if (ds.pattern.kind == PatternKind::cartesian) {
    blobs["mask"] = "mask.u8";
  } else {
    blobs["points"] = "points.f64";
    std::vector<std::size_t> counts;
    for (int t = 0; t < ds.frames; ++t) counts.push_back(ds.pattern.samples_in_frame(t));
    h["samples_per_frame"] = counts;
  }
  if (ds.has_reference()) blobs["reference"] = "reference.c64";
  h["blobs"] = blobs;

  std::ofstream hf(dir / "header.json");
  if (!hf) throw IoError("cannot write header.json in " + dir.string());
  hf << h.dump(2) << "\n";
  hf.close();

  detail::write_c64(dir / "y.c64", ds.samples);
  detail::write_c64(dir / "coils.c64", ds.coils.data);
  if (ds.pattern.kind == PatternKind::cartesian) {
    detail::write_blob(dir / "mask.u8", ds.pattern.mask.data(), ds.pattern.mask.size());
  } else {
    std::vector<double> flat;
    flat.reserve(2 * ds.pattern.points.size());
    for (const auto& p : ds.pattern.points) {
      flat.push_back(p[0]);
      flat.push_back(p[1]);
    }
    detail::write_blob(dir / "points.f64", flat.data(), flat.size());
  }
  if (ds.has_reference()) detail::write_c64(dir / "reference.c64", ds.reference.data);
}

inline KSpaceDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream hf(dir / "header.json");
  if (!hf) throw IoError("cannot open header.json in " + dir.string());
  nlohmann::json h;
  try {
    hf >> h;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed header.json: " + std::string(e.what()));
  }
  if (h.at("format_version").get<int>() != kDatasetFormatVersion)
    throw IoError("unsupported dataset format version");
  if (h.at("coords").get<std::string>() != kCoordConvention)
    throw IoError("unknown coordinate convention: " + h.at("coords").get<std::string>());

  KSpaceDataset ds;
  ds.height = h.at("height").get<int>();
  ds.width = h.at("width").get<int>();
  ds.frames = h.at("frames").get<int>();
  ds.n_coils = h.at("n_coils").get<int>();
  ds.noise_std = h.at("noise_std").get<Real>();

  ds.pattern.frames = ds.frames;
  ds.pattern.height = ds.height;
  ds.pattern.width = ds.width;
  const std::string kind = h.at("pattern").get<std::string>();
  if (kind == "cartesian") {
    ds.pattern.kind = PatternKind::cartesian;
    ds.pattern.mask = detail::read_blob<std::uint8_t>(
        dir / "mask.u8", static_cast<std::size_t>(ds.frames) * ds.height * ds.width);
    ds.pattern.finalize();
  } else if (kind == "points") {
    ds.pattern.kind = PatternKind::points;
    const auto counts = h.at("samples_per_frame").get<std::vector<std::size_t>>();
    if (static_cast<int>(counts.size()) != ds.frames)
      throw IoError("samples_per_frame length mismatch");
    ds.pattern.offsets.assign(static_cast<std::size_t>(ds.frames) + 1, 0);
    for (int t = 0; t < ds.frames; ++t)
      ds.pattern.offsets[t + 1] = ds.pattern.offsets[t] + counts[static_cast<std::size_t>(t)];
    const auto flat =
        detail::read_blob<double>(dir / "points.f64", 2 * ds.pattern.offsets.back());
    ds.pattern.points.resize(ds.pattern.offsets.back());
    for (std::size_t i = 0; i < ds.pattern.points.size(); ++i)
      ds.pattern.points[i] = {flat[2 * i], flat[2 * i + 1]};
    ds.pattern.finalize();
  } else {
    throw IoError("unknown pattern kind: " + kind);
  }

  ds.coils = CoilMaps(ds.n_coils, ds.height, ds.width);
  ds.coils.data = detail::read_c64(dir / "coils.c64",
                                   static_cast<std::size_t>(ds.n_coils) * ds.height * ds.width);
  ds.samples = detail::read_c64(
      dir / "y.c64", static_cast<std::size_t>(ds.n_coils) * ds.pattern.total_samples());
  if (h.at("blobs").contains("reference")) {
    ds.reference = CineImage(ds.height, ds.width, ds.frames);
    ds.reference.data = detail::read_c64(
        dir / "reference.c64", static_cast<std::size_t>(ds.frames) * ds.height * ds.width);
  }
  ds.check_consistent();
  return ds;
}

}  // namespace cinesplat
