#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cinesplat/common.hpp"
#include "cinesplat/optimizer.hpp"
#include "cinesplat/temporal.hpp"

namespace cinesplat {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace detail {

inline constexpr std::array<char, 8> kModelMagic = {'C', 'S', 'P', 'L', 'A', 'T', '0', '1'};

struct BlockDef {
  const char* name;
  int offset;  // within one primitive's parameter stride
  int length;
};

inline std::vector<BlockDef> model_blocks(const ParamLayout& lay) {
  const int g = lay.rank_geom, c = lay.rank_contrast;
  return {
      {"mu", 0, 2},
      {"theta", 2, 1},
      {"log_s", 3, 2},
      {"xi", 5, 2},
      {"coeff_mu", lay.coeff_mu_off(), 2 * g},
      {"coeff_theta", lay.coeff_theta_off(), g},
      {"coeff_log_s", lay.coeff_log_s_off(), 2 * g},
      {"coeff_xi", lay.coeff_xi_off(), 2 * g},
      {"u", lay.u_off(), 2 * c},
      {"coeff_w", lay.coeff_w_off(), 2 * g},
  };
}

template <typename T>
void write_raw(std::ofstream& f, const T* data, std::size_t count) {
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& f, T* data, std::size_t count) {
  f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

}  // namespace detail

// Model file: 8-byte magic, u32 format version, u64 JSON header length, the
// header itself, then float64 blobs. Per-primitive blocks come first (each
// gathered across primitives), then the two temporal bases. Complex values
// are interleaved re,im. Round-trips are bit-exact.
inline void save_model(const PrimitiveSet& ps, const std::filesystem::path& path) {
  nlohmann::json h;
  h["coords"] = kCoordConvention;
  h["count"] = ps.count;
  h["frames"] = ps.frames();
  h["rank_geom"] = ps.layout.rank_geom;
  h["rank_contrast"] = ps.layout.rank_contrast;
  h["grid_height"] = ps.grid_height;
  h["grid_width"] = ps.grid_width;
  h["mode"] = ps.gaussian_mode ? "gaussian" : "gabor";
  std::vector<std::string> names;
  for (const auto& b : detail::model_blocks(ps.layout)) names.push_back(b.name);
  names.push_back("basis_geom");
  names.push_back("basis_contrast");
  h["blocks"] = names;
  const std::string header = h.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(detail::kModelMagic.data(), detail::kModelMagic.size());
  const std::uint32_t ver = kModelFormatVersion;
  const std::uint64_t hlen = header.size();
  detail::write_raw(f, &ver, 1);
  detail::write_raw(f, &hlen, 1);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));

  const int stride = ps.stride();
  for (const auto& b : detail::model_blocks(ps.layout)) {
    for (int n = 0; n < ps.count; ++n)
      detail::write_raw(f, ps.params.data() + static_cast<std::size_t>(n) * stride + b.offset,
                        static_cast<std::size_t>(b.length));
  }
  detail::write_raw(f, ps.bases.v_geom.data(), ps.bases.v_geom.size());
  detail::write_raw(f, reinterpret_cast<const Real*>(ps.bases.v_contrast.data()),
                    2 * ps.bases.v_contrast.size());
  if (!f) throw IoError("write failed: " + path.string());
}

inline PrimitiveSet load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::array<char, 8> magic{};
  f.read(magic.data(), magic.size());
  if (!f || magic != detail::kModelMagic) throw IoError("not a model file: " + path.string());
  std::uint32_t ver = 0;
  std::uint64_t hlen = 0;
  detail::read_raw(f, &ver, 1);
  detail::read_raw(f, &hlen, 1);
  if (!f || ver != kModelFormatVersion) throw IoError("unsupported model format version");
  std::string header(hlen, '\0');
  f.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw IoError("truncated model header: " + path.string());

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model header: " + std::string(e.what()));
  }
  if (h.at("coords").get<std::string>() != kCoordConvention)
    throw IoError("unknown coordinate convention: " + h.at("coords").get<std::string>());
  const std::string mode = h.at("mode").get<std::string>();
  if (mode != "gabor" && mode != "gaussian") throw IoError("unknown model mode: " + mode);

  PrimitiveSet ps;
  ps.count = h.at("count").get<int>();
  ps.grid_height = h.at("grid_height").get<int>();
  ps.grid_width = h.at("grid_width").get<int>();
  ps.gaussian_mode = mode == "gaussian";
  ps.layout = {h.at("rank_geom").get<int>(), h.at("rank_contrast").get<int>()};
  const int frames = h.at("frames").get<int>();
  if (ps.count < 1 || frames < 1 || ps.layout.rank_geom < 1 || ps.layout.rank_contrast < 1 ||
      ps.grid_height < 1 || ps.grid_width < 1)
    throw IoError("bad model dimensions");
  ps.params.assign(static_cast<std::size_t>(ps.count) * ps.stride(), Real(0));
  ps.bases.frames = frames;
  ps.bases.rank_geom = ps.layout.rank_geom;
  ps.bases.rank_contrast = ps.layout.rank_contrast;
  ps.bases.v_geom.assign(static_cast<std::size_t>(frames) * ps.layout.rank_geom, Real(0));
  ps.bases.v_contrast.assign(static_cast<std::size_t>(frames) * ps.layout.rank_contrast, Cx(0, 0));

  const int stride = ps.stride();
  for (const auto& b : detail::model_blocks(ps.layout)) {
    for (int n = 0; n < ps.count; ++n)
      detail::read_raw(f, ps.params.data() + static_cast<std::size_t>(n) * stride + b.offset,
                       static_cast<std::size_t>(b.length));
  }
  detail::read_raw(f, ps.bases.v_geom.data(), ps.bases.v_geom.size());
  detail::read_raw(f, reinterpret_cast<Real*>(ps.bases.v_contrast.data()),
                   2 * ps.bases.v_contrast.size());
  if (!f) throw IoError("truncated model blobs: " + path.string());
  f.peek();
  if (!f.eof()) throw IoError("trailing bytes in model file: " + path.string());
  return ps;
}

inline nlohmann::json config_to_json(const FitConfig& c) {
  nlohmann::json j;
  j["n_init"] = c.n_init;
  j["n_max"] = c.n_max;
  j["rank_geom"] = c.rank_geom;
  j["rank_contrast"] = c.rank_contrast;
  j["iters"] = c.iters;
  j["lambda_s"] = c.lambda_s;
  j["lambda_t"] = c.lambda_t;
  j["lr"] = {{"mu", c.lr.mu},         {"theta", c.lr.theta}, {"log_s", c.lr.log_s},
             {"xi", c.lr.xi},         {"coeffs", c.lr.coeffs}, {"bases", c.lr.bases}};
  j["lr_final_frac"] = c.lr_final_frac;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["density_interval"] = c.density_interval;
  j["density_start"] = c.density_start;
  j["density_end"] = c.density_end;
  j["prune_frac"] = c.prune_frac;
  j["split_percentile"] = c.split_percentile;
  j["eps_abs"] = c.eps_abs;
  j["gaussian_mode"] = c.gaussian_mode;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["n_sigma"] = c.n_sigma;
  j["tile"] = c.tile;
  return j;
}

inline FitConfig config_from_json(const nlohmann::json& j) {
  FitConfig c;
  c.n_init = j.value("n_init", c.n_init);
  c.n_max = j.value("n_max", c.n_max);
  c.rank_geom = j.value("rank_geom", c.rank_geom);
  c.rank_contrast = j.value("rank_contrast", c.rank_contrast);
  c.iters = j.value("iters", c.iters);
  c.lambda_s = j.value("lambda_s", c.lambda_s);
  c.lambda_t = j.value("lambda_t", c.lambda_t);
  if (j.contains("lr")) {
    const auto& l = j.at("lr");
    c.lr.mu = l.value("mu", c.lr.mu);
    c.lr.theta = l.value("theta", c.lr.theta);
    c.lr.log_s = l.value("log_s", c.lr.log_s);
    c.lr.xi = l.value("xi", c.lr.xi);
    c.lr.coeffs = l.value("coeffs", c.lr.coeffs);
    c.lr.bases = l.value("bases", c.lr.bases);
  }
  c.lr_final_frac = j.value("lr_final_frac", c.lr_final_frac);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.density_interval = j.value("density_interval", c.density_interval);
  c.density_start = j.value("density_start", c.density_start);
  c.density_end = j.value("density_end", c.density_end);
  c.prune_frac = j.value("prune_frac", c.prune_frac);
  c.split_percentile = j.value("split_percentile", c.split_percentile);
  c.eps_abs = j.value("eps_abs", c.eps_abs);
  c.gaussian_mode = j.value("gaussian_mode", c.gaussian_mode);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.n_sigma = j.value("n_sigma", c.n_sigma);
  c.tile = j.value("tile", c.tile);
  return c;
}

inline nlohmann::json report_to_json(const FitReport& r, const FitConfig& cfg) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["config"] = config_to_json(cfg);
  j["wall_seconds"] = r.wall_seconds;
  j["trace_data"] = r.trace_data;
  j["trace_sparsity"] = r.trace_sparsity;
  j["trace_tv"] = r.trace_tv;
  j["trace_count"] = r.trace_count;
  j["final_data_loss"] = r.final_data_loss;
  if (r.has_metrics) {
    j["final_psnr"] = r.final_psnr;
    j["final_ssim"] = r.final_ssim;
  }
  return j;
}

inline void save_report(const FitReport& r, const FitConfig& cfg, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << report_to_json(r, cfg).dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace cinesplat
