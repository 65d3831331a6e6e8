// Command-line front end: dataset synthesis, fitting, rendering, metrics,
// and the numerical self-checks. Exit codes: 0 success, 1 usage error,
// 2 numerical failure, 3 I/O error.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cinesplat/cinesplat.hpp"

namespace fs = std::filesystem;
using namespace cinesplat;
using nlohmann::json;

namespace {

struct Dims {
  int height = 8, width = 8, frames = 3;
};

Dims parse_dims(const std::string& s) {
  Dims d;
  char extra;
  if (std::sscanf(s.c_str(), "%dx%dx%d%c", &d.height, &d.width, &d.frames, &extra) != 3 ||
      d.height < 1 || d.width < 1 || d.frames < 1)
    throw std::invalid_argument("dims must look like HxWxT, got '" + s + "'");
  return d;
}

// Raw complex stack next to the PNGs: float64 (re, im) pairs, frame-major.
// The <prefix>_scale.json sidecar written by the PNG exporter carries dims.
void write_raw_stack(const fs::path& dir, const std::string& prefix, const CineImage& img) {
  detail::write_blob(dir / (prefix + "_raw.f64c"), img.data.data(), img.data.size());
}

CineImage read_raw_stack(const fs::path& dir, const std::string& prefix) {
  std::ifstream sf(dir / (prefix + "_scale.json"));
  if (!sf) throw IoError("cannot open " + (dir / (prefix + "_scale.json")).string());
  json side;
  try {
    sf >> side;
  } catch (const json::exception& e) {
    throw IoError("malformed sidecar: " + std::string(e.what()));
  }
  CineImage img(side.at("height").get<int>(), side.at("width").get<int>(),
                side.at("frames").get<int>());
  img.data = detail::read_blob<Cx>(dir / (prefix + "_raw.f64c"), img.data.size());
  return img;
}

// A reconstruction source is either a model file (rendered at native
// resolution) or a directory produced by `fit`/`render` holding a raw stack.
CineImage load_stack(const fs::path& path, int threads, int* weight_rank, int* rank_bound) {
  if (fs::is_directory(path)) {
    for (const char* prefix : {"recon", "render"})
      if (fs::exists(path / (std::string(prefix) + "_raw.f64c")))
        return read_raw_stack(path, prefix);
    throw IoError("no raw render stack found under " + path.string());
  }
  const PrimitiveSet ps = load_model(path);
  RasterConfig rc;
  rc.threads = threads;
  CineImage img(ps.grid_height, ps.grid_width, ps.frames());
  for (int t = 0; t < ps.frames(); ++t) {
    const ComplexGrid g = render_at(ps, t, ps.grid_height, ps.grid_width, rc);
    std::copy(g.data.begin(), g.data.end(), img.frame(t).begin());
  }
  if (weight_rank) *weight_rank = numerical_rank(weight_matrix(ps));
  if (rank_bound) *rank_bound = ps.layout.rank_geom + ps.layout.rank_contrast;
  return img;
}

struct PhantomArgs {
  std::string spec_file, out, preset = "default";
  int n_coils = 4, acs = 4, spokes = 0;
  int height = 64, width = 64, frames = 8;
  MaskKind mask = MaskKind::variable_density;
  double accel = 4.0, noise = 0.0;
  std::uint64_t seed = 0;
};

int run_phantom(const PhantomArgs& a, int threads) {
  PhantomSpec spec;
  if (!a.spec_file.empty()) {
    std::ifstream f(a.spec_file);
    if (!f) throw IoError("cannot open " + a.spec_file);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw IoError("malformed phantom spec: " + std::string(e.what()));
    }
    spec = phantom_from_json(j);
  } else if (a.preset == "default") {
    spec = default_phantom(a.height, a.width, a.frames);
  } else if (a.preset == "benchmark") {
    spec = benchmark_phantom(a.height, a.width, a.frames);
  } else {
    throw std::invalid_argument("unknown preset " + a.preset);
  }

  const CoilMaps coils = make_coils(a.n_coils, spec.height, spec.width, Rng64::derive(a.seed, 1));
  const SamplingPattern pattern = make_mask(a.mask, a.accel, spec.frames, spec.height, spec.width,
                                            a.acs, Rng64::derive(a.seed, 2), a.spokes);
  const KSpaceDataset ds =
      simulate(spec, coils, pattern, a.noise, Rng64::derive(a.seed, 3), threads);
  save_dataset(ds, a.out);
  {
    std::ofstream f(fs::path(a.out) / "phantom.json");
    if (!f) throw IoError("cannot write phantom.json in " + a.out);
    f << phantom_to_json(spec).dump(2) << "\n";
  }
  std::printf("phantom: %dx%dx%d, %d coils, %zu samples/frame -> %s\n", spec.height, spec.width,
              spec.frames, a.n_coils, ds.pattern.samples_in_frame(0), a.out.c_str());
  return 0;
}

struct FitArgs {
  std::string data, out, mode = "gabor";
  FitConfig cfg;
};

int run_fit(const FitArgs& a, int threads) {
  const KSpaceDataset ds = load_dataset(a.data);
  FitConfig cfg = a.cfg;
  cfg.gaussian_mode = (a.mode == "gaussian");
  cfg.threads = threads;
  cfg.validate();

  const auto [ps, report] = fit(ds, cfg);

  fs::create_directories(a.out);
  save_model(ps, fs::path(a.out) / "model.bin");
  save_report(report, cfg, fs::path(a.out) / "report.json");

  RasterConfig rc;
  rc.n_sigma = cfg.n_sigma;
  rc.tile = cfg.tile;
  rc.threads = threads;
  CineImage recon(ds.height, ds.width, ds.frames);
  for (int t = 0; t < ds.frames; ++t) {
    const ComplexGrid g = render_at(ps, t, ds.height, ds.width, rc);
    std::copy(g.data.begin(), g.data.end(), recon.frame(t).begin());
  }
  save_magnitude_pngs(recon, a.out, "recon");
  write_raw_stack(a.out, "recon", recon);

  std::printf("fit: %d primitives after %d iters, data loss %.6g\n", ps.count, cfg.iters,
              report.final_data_loss);
  if (report.has_metrics)
    std::printf("fit: PSNR %.2f dB, SSIM %.4f\n", report.final_psnr, report.final_ssim);
  return 0;
}

struct RenderArgs {
  std::string model, out, frame = "all", band = "all";
  int scale = 1;
  double xi_threshold = 0.25;
};

int run_render(const RenderArgs& a, int threads) {
  const PrimitiveSet ps = load_model(a.model);
  if (a.scale < 1) throw std::invalid_argument("--scale must be >= 1");
  if (a.band != "all" && a.scale != 1)
    throw std::invalid_argument("--band low/high requires --scale 1");

  std::vector<int> sel;
  if (a.frame == "all") {
    for (int t = 0; t < ps.frames(); ++t) sel.push_back(t);
  } else {
    const int t = std::stoi(a.frame);
    if (t < 0 || t >= ps.frames()) throw std::invalid_argument("frame index out of range");
    sel.push_back(t);
  }

  RasterConfig rc;
  rc.threads = threads;
  const int oh = ps.grid_height * a.scale, ow = ps.grid_width * a.scale;
  CineImage stack(oh, ow, static_cast<int>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    ComplexGrid g;
    if (a.band == "all") {
      g = render_at(ps, sel[i], oh, ow, rc);
    } else {
      const Decomposition d = frequency_decompose(ps, sel[i], a.xi_threshold, rc);
      g = (a.band == "low") ? d.low : d.high;
    }
    std::copy(g.data.begin(), g.data.end(), stack.frame(static_cast<int>(i)).begin());
  }

  fs::create_directories(a.out);
  const std::string prefix = a.band == "all" ? "render" : "band_" + a.band;
  save_magnitude_pngs(stack, a.out, prefix);
  write_raw_stack(a.out, prefix, stack);
  std::printf("render: %zu frame(s) at %dx%d -> %s/%s_*.png\n", sel.size(), oh, ow, a.out.c_str(),
              prefix.c_str());
  return 0;
}

struct MetricsArgs {
  std::string recon, ref, data, out = "metrics.json";
  std::vector<double> bands = {1.0 / 6.0, 0.5};
};

int run_metrics(const MetricsArgs& a, int threads) {
  if (a.bands.size() != 2) throw std::invalid_argument("--bands needs exactly c1,c2");

  int weight_rank = -1, rank_bound = -1;
  const CineImage recon = load_stack(a.recon, threads, &weight_rank, &rank_bound);

  CineImage ref;
  if (a.ref == "from-dataset") {
    if (a.data.empty()) throw std::invalid_argument("--ref from-dataset requires --data DIR");
    const KSpaceDataset ds = load_dataset(a.data);
    if (!ds.has_reference()) throw std::invalid_argument("dataset has no reference frames");
    ref = ds.reference;
  } else if (fs::exists(fs::path(a.ref) / "header.json")) {
    const KSpaceDataset ds = load_dataset(a.ref);
    if (!ds.has_reference()) throw std::invalid_argument("dataset has no reference frames");
    ref = ds.reference;
  } else {
    ref = load_stack(a.ref, threads, nullptr, nullptr);
  }
  if (recon.height != ref.height || recon.width != ref.width || recon.frames != ref.frames)
    throw std::invalid_argument("reconstruction and reference shapes disagree");

  MetricReport r = compute_metrics(recon, ref, a.bands[0], a.bands[1]);
  r.weight_rank = weight_rank;
  r.rank_bound = rank_bound;

  fs::path csv = a.out;
  csv.replace_extension(".csv");
  save_metric_report(r, a.out, csv);
  std::printf("metrics: PSNR %.2f dB, SSIM %.4f, bands %.2f/%.2f/%.2f dB -> %s\n", r.psnr_db.mean,
              r.ssim_val.mean, r.bands.low, r.bands.mid, r.bands.high, a.out.c_str());
  return 0;
}

struct GradcheckArgs {
  std::string dims = "8x8x3", out = "gradcheck_result.json";
  GradcheckConfig gc;
};

int run_gradcheck(const GradcheckArgs& a) {
  GradcheckConfig gc = a.gc;
  const Dims d = parse_dims(a.dims);
  gc.height = d.height;
  gc.width = d.width;
  gc.frames = d.frames;

  const GradcheckResult r = run_gradcheck(gc);
  const Real threshold = 1e-3;
  const bool pass = r.max_rel_err < threshold;

  json j;
  j["max_rel_err"] = r.max_rel_err;
  j["threshold"] = threshold;
  j["pass"] = pass;
  json blocks;
  for (const auto& [name, err] : r.per_block) blocks[name] = err;
  j["per_block"] = blocks;
  {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot write " + a.out);
    f << j.dump(2) << "\n";
  }
  for (const auto& [name, err] : r.per_block)
    std::printf("gradcheck: %-14s max rel err %.3e\n", name.c_str(), err);
  std::printf("gradcheck: overall %.3e (threshold %.0e) -> %s\n", r.max_rel_err, threshold,
              pass ? "pass" : "FAIL");
  return pass ? 0 : 2;
}

struct AdjointArgs {
  std::string dims = "16x16x3", pattern = "cartesian", out = "adjointcheck_result.json";
  AdjointCheckConfig ac;
};

int run_adjointcheck(const AdjointArgs& a) {
  AdjointCheckConfig ac = a.ac;
  const Dims d = parse_dims(a.dims);
  ac.height = d.height;
  ac.width = d.width;
  ac.frames = d.frames;
  ac.kind = (a.pattern == "points") ? PatternKind::points : PatternKind::cartesian;

  const Real worst = run_adjoint_check(ac);
  const Real threshold = 1e-10;
  const bool pass = worst < threshold;

  json j;
  j["max_rel_err"] = worst;
  j["threshold"] = threshold;
  j["pattern"] = a.pattern;
  j["trials"] = ac.trials;
  j["pass"] = pass;
  {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot write " + a.out);
    f << j.dump(2) << "\n";
  }
  std::printf("adjointcheck: %s max rel err %.3e (threshold %.0e) -> %s\n", a.pattern.c_str(),
              worst, threshold, pass ? "pass" : "FAIL");
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic MRI reconstruction with frequency-modulated Gaussian primitives"};
  app.require_subcommand(1);
  int threads = default_thread_count();
  app.add_option("--threads", threads, "worker threads (default: all cores)")
      ->check(CLI::PositiveNumber);

  const std::map<std::string, MaskKind> mask_names{
      {"uniform-random", MaskKind::uniform_random},
      {"variable-density", MaskKind::variable_density},
      {"radial-points", MaskKind::radial_points}};

  PhantomArgs pa;
  auto* ph = app.add_subcommand("phantom", "synthesize an undersampled multi-coil dataset");
  ph->add_option("--spec", pa.spec_file, "phantom description json (default: built-in preset)");
  ph->add_option("--preset", pa.preset, "built-in phantom: default | benchmark")
      ->check(CLI::IsMember({"default", "benchmark"}));
  ph->add_option("--height", pa.height);
  ph->add_option("--width", pa.width);
  ph->add_option("--frames", pa.frames);
  ph->add_option("--coils", pa.n_coils);
  ph->add_option("--mask", pa.mask, "sampling pattern kind")
      ->transform(CLI::CheckedTransformer(mask_names));
  ph->add_option("--accel", pa.accel, "acceleration factor");
  ph->add_option("--acs", pa.acs, "fully sampled center lines (cartesian kinds)");
  ph->add_option("--spokes", pa.spokes, "spokes per frame (radial; 0 = derive from --accel)");
  ph->add_option("--noise", pa.noise, "complex noise standard deviation");
  ph->add_option("--seed", pa.seed);
  ph->add_option("--out", pa.out)->required();

  FitArgs fa;
  auto* ft = app.add_subcommand("fit", "fit the primitive model to a dataset");
  ft->add_option("--data", fa.data)->required();
  ft->add_option("--mode", fa.mode)->check(CLI::IsMember({"gabor", "gaussian"}));
  ft->add_option("--n", fa.cfg.n_init, "initial primitive count");
  ft->add_option("--n-max", fa.cfg.n_max, "primitive budget for density control");
  ft->add_option("--rank-geom", fa.cfg.rank_geom);
  ft->add_option("--rank-contrast", fa.cfg.rank_contrast);
  ft->add_option("--iters", fa.cfg.iters);
  ft->add_option("--lambda-s", fa.cfg.lambda_s, "weight sparsity strength");
  ft->add_option("--lambda-t", fa.cfg.lambda_t, "temporal smoothness strength");
  ft->add_option("--seed", fa.cfg.seed);
  ft->add_option("--out", fa.out)->required();

  RenderArgs ra;
  auto* rd = app.add_subcommand("render", "render a fitted model to magnitude images");
  rd->add_option("--model", ra.model)->required();
  rd->add_option("--frame", ra.frame, "frame index or 'all'");
  rd->add_option("--scale", ra.scale, "integer resolution multiplier");
  rd->add_option("--band", ra.band)->check(CLI::IsMember({"low", "high", "all"}));
  rd->add_option("--xi-threshold", ra.xi_threshold,
                 "band split point as a fraction of the Nyquist limit");
  rd->add_option("--out", ra.out)->required();

  MetricsArgs ma;
  auto* mt = app.add_subcommand("metrics", "score a reconstruction against a reference");
  mt->add_option("--recon", ma.recon, "model file or directory with a raw render stack")
      ->required();
  mt->add_option("--ref", ma.ref, "'from-dataset' (with --data) or a dataset/render path")
      ->required();
  mt->add_option("--data", ma.data, "dataset directory supplying the reference");
  mt->add_option("--bands", ma.bands, "band edges c1,c2 as fractions of Nyquist")
      ->delimiter(',')
      ->expected(1, 2);
  mt->add_option("--out", ma.out, "metric report json path (csv written next to it)");

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of analytic gradients");
  gc->add_option("--seed", ga.gc.seed);
  gc->add_option("--n", ga.gc.n_prims);
  gc->add_option("--dims", ga.dims, "instance dims HxWxT");
  gc->add_option("--coils", ga.gc.n_coils);
  gc->add_option("--lambda-s", ga.gc.lambda_s);
  gc->add_option("--lambda-t", ga.gc.lambda_t);
  gc->add_flag("--mutate", ga.gc.mutate, "flip one derivative's sign (negative control)");
  gc->add_option("--out", ga.out);

  AdjointArgs aa;
  auto* ac = app.add_subcommand("adjointcheck", "operator adjoint dot tests");
  ac->add_option("--seed", aa.ac.seed);
  ac->add_option("--dims", aa.dims, "instance dims HxWxT");
  ac->add_option("--coils", aa.ac.n_coils);
  ac->add_option("--pattern", aa.pattern)->check(CLI::IsMember({"cartesian", "points"}));
  ac->add_option("--trials", aa.ac.trials);
  ac->add_option("--out", aa.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (ph->parsed()) return run_phantom(pa, threads);
    if (ft->parsed()) return run_fit(fa, threads);
    if (rd->parsed()) return run_render(ra, threads);
    if (mt->parsed()) return run_metrics(ma, threads);
    if (gc->parsed()) return run_gradcheck(ga);
    if (ac->parsed()) return run_adjointcheck(aa);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
