#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include <nlohmann/json.hpp>

#include "cinesplat/common.hpp"
#include "cinesplat/grid.hpp"
#include "cinesplat/metrics.hpp"

namespace cinesplat {

inline void write_png16(const std::filesystem::path& path, const std::uint16_t* pix,
                        int height, int width) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot open for writing: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] =
        reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(pix + static_cast<std::size_t>(y) * width));
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw IoError("png write failed: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);  // rows are native little-endian u16
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace detail {

inline std::uint16_t quantize16(Real v) {
  if (!(v > 0)) return 0;
  if (v >= 1) return 65535;
  return static_cast<std::uint16_t>(std::lround(v * Real(65535)));
}

inline std::string frame_name(const std::string& prefix, int t) {
  std::ostringstream s;
  s << prefix << "_" << std::setfill('0') << std::setw(3) << t << ".png";
  return s.str();
}

}  // namespace detail

// Magnitude stack as 16-bit grayscale PNGs (prefix_000.png, ...) plus a
// sidecar JSON recording the quantization scale so values can be recovered.
// scale <= 0 means use the stack's peak magnitude. Returns the scale used.
inline Real save_magnitude_pngs(const CineImage& img, const std::filesystem::path& dir,
                                const std::string& prefix, Real scale = 0) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());
  if (scale <= 0) {
    for (const Cx& v : img.data) scale = std::max(scale, std::abs(v));
    if (scale <= 0) scale = 1;
  }
  const std::size_t px = img.frame_size();
  std::vector<std::uint16_t> pix(px);
  for (int t = 0; t < img.frames; ++t) {
    auto f = img.frame(t);
    for (std::size_t i = 0; i < px; ++i) pix[i] = detail::quantize16(std::abs(f[i]) / scale);
    write_png16(dir / detail::frame_name(prefix, t), pix.data(), img.height, img.width);
  }
  nlohmann::json side;
  side["scale"] = scale;
  side["height"] = img.height;
  side["width"] = img.width;
  side["frames"] = img.frames;
  std::ofstream sf(dir / (prefix + "_scale.json"));
  if (!sf) throw IoError("cannot write scale sidecar in " + dir.string());
  sf << side.dump(2) << "\n";
  return scale;
}

inline nlohmann::json metric_report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["psnr_db"] = {{"per_frame", r.psnr_db.per_frame}, {"mean", r.psnr_db.mean}};
  j["ssim"] = {{"per_frame", r.ssim_val.per_frame}, {"mean", r.ssim_val.mean}};
  j["band_psnr_db"] = {{"low", r.bands.low}, {"mid", r.bands.mid}, {"high", r.bands.high}};
  if (r.weight_rank >= 0) {
    j["weight_rank"] = r.weight_rank;
    j["rank_bound"] = r.rank_bound;
  }
  return j;
}

// One row per frame, then mean and band summary rows.
inline void save_metric_csv(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << std::setprecision(17);
  f << "frame,psnr_db,ssim\n";
  for (std::size_t t = 0; t < r.psnr_db.per_frame.size(); ++t)
    f << t << "," << r.psnr_db.per_frame[t] << "," << r.ssim_val.per_frame[t] << "\n";
  f << "mean," << r.psnr_db.mean << "," << r.ssim_val.mean << "\n";
  f << "band_low," << r.bands.low << ",\n";
  f << "band_mid," << r.bands.mid << ",\n";
  f << "band_high," << r.bands.high << ",\n";
  if (!f) throw IoError("write failed: " + path.string());
}

inline void save_metric_report(const MetricReport& r, const std::filesystem::path& json_path,
                               const std::filesystem::path& csv_path) {
  std::ofstream jf(json_path);
  if (!jf) throw IoError("cannot open for writing: " + json_path.string());
  jf << metric_report_to_json(r).dump(2) << "\n";
  save_metric_csv(r, csv_path);
}

}  // namespace cinesplat
