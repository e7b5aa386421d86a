#include "omrkit/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "omrkit/annotation.hpp"
#include "omrkit/augment.hpp"
#include "omrkit/detection.hpp"
#include "omrkit/dwd_post.hpp"
#include "omrkit/error.hpp"
#include "omrkit/eval.hpp"
#include "omrkit/image.hpp"
#include "omrkit/imbalance.hpp"
#include "omrkit/io_util.hpp"
#include "omrkit/scan_align.hpp"
#include "omrkit/synth.hpp"

namespace omrkit::cli {

namespace fs = std::filesystem;

namespace {

/// Expected-wait target for margin augmentation, in pages.
constexpr double kWaitTarget = 10.0;
constexpr double kLowNccWarning = 0.5;

std::string format(const char* fmt, double a, double b, double c, double d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

fs::path resolve_image(const fs::path& dataset_path, const Page& page) {
  if (!page.image_path) throw Error(Errc::missing_image, "page '" + page.id + "' has no image");
  const fs::path image(*page.image_path);
  return image.is_absolute() ? image : dataset_path.parent_path() / image;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create directory '" + dir.string() + "'");
}

struct SynthOptions {
  std::string out;
  std::size_t pages = 1;
  std::uint64_t seed = 0;
  bool balanced = false;
  std::optional<double> zipf;
  PageSpec spec;
  bool emit_maps = false;
  NoiseSpec noise;
};

int run_synth(const SynthOptions& o, std::ostream& out) {
  PageSpec spec = o.spec;
  spec.balanced = o.balanced;
  if (o.zipf) {
    const auto weights = zipf_weights(glyph_catalogue().size(), *o.zipf);
    spec.glyph_mix.clear();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      spec.glyph_mix.push_back({glyph_catalogue()[i].class_name, weights[i]});
    }
  }
  const auto synth = generate_dataset(spec, o.pages, o.seed);
  std::vector<MapStack> maps;
  if (o.emit_maps) {
    for (std::size_t i = 0; i < synth.dataset.pages.size(); ++i) {
      NoiseSpec noise = o.noise;
      noise.seed = derive_seed(o.seed, i);
      maps.push_back(render_maps(synth.dataset.pages[i], noise, synth.dataset.class_registry));
    }
  }
  validate(synth.dataset);

  const fs::path dir(o.out);
  ensure_dir(dir);
  for (std::size_t i = 0; i < synth.dataset.pages.size(); ++i) {
    const auto& page = synth.dataset.pages[i];
    write_pgm(synth.images[i], dir / *page.image_path);
    if (o.emit_maps) write_dwm(maps[i], dir / (page.id + ".dwm"));
  }
  save_dataset(synth.dataset, dir / "dataset.json");

  std::size_t symbols = 0;
  for (const auto& page : synth.dataset.pages) symbols += page.annotations.size();
  out << "pages: " << synth.dataset.pages.size() << "\n"
      << "symbols: " << symbols << "\n"
      << "dataset: " << (dir / "dataset.json").string() << "\n";
  return ExitStatus::ok;
}

int run_stats(const std::string& path, std::size_t top, double head_coverage, std::ostream& out) {
  const Dataset dataset = load_dataset(path);
  out << format_stats_report(class_histogram(dataset), top, head_coverage);
  return ExitStatus::ok;
}

struct AugmentOptions {
  std::string dataset;
  std::string out;
  AugmentConfig cfg;
  double head_coverage = kDefaultHeadCoverage;
  std::optional<std::size_t> max_rare;
};

int run_augment(const AugmentOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path dataset_path(o.dataset);
  const Dataset dataset = load_dataset(dataset_path);
  if (o.cfg.num_crops <= 0 || o.cfg.crop_w <= 0 || o.cfg.crop_h <= 0 || o.cfg.margin_rows <= 0 ||
      o.cfg.gap < 0) {
    throw Error(Errc::validation_error, "augmentation sizes must be positive");
  }
  const auto stats = class_histogram(dataset);
  const auto rare = select_rare(stats, o.head_coverage, o.max_rare);
  if (rare.empty()) throw Error(Errc::empty_bank, "rare set is empty at this head coverage");

  const auto k = static_cast<std::size_t>(o.cfg.num_crops);
  const double wait = expected_wait(rare.size(), k);
  if (wait > kWaitTarget) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "warning: %zu rare classes give an expected wait of %.3f pages (> %.0f); "
                  "at %zu crops per page the bound holds for at most %zu classes\n",
                  rare.size(), wait, kWaitTarget, k, max_rare_for_wait(k, kWaitTarget));
    err << buf;
  }

  const auto bank = build_crop_bank(dataset, rare, o.cfg, [&](const Page& page) {
    return read_pgm(resolve_image(dataset_path, page));
  });

  Dataset augmented = dataset;
  std::vector<GrayImage> images;
  for (std::size_t i = 0; i < dataset.pages.size(); ++i) {
    const Page& page = dataset.pages[i];
    const GrayImage image = read_pgm(resolve_image(dataset_path, page));
    Rng rng(derive_seed(o.cfg.seed, i));
    const auto crops = sample_crops(bank, k, rng);
    auto result = augment_page(page, image, crops, o.cfg);
    result.page.image_path = page.id + ".pgm";
    augmented.pages[i] = std::move(result.page);
    images.push_back(std::move(result.image));
  }
  validate(augmented);

  const fs::path dir(o.out);
  ensure_dir(dir);
  for (std::size_t i = 0; i < augmented.pages.size(); ++i) {
    write_pgm(images[i], dir / *augmented.pages[i].image_path);
  }
  save_dataset(augmented, dir / "dataset.json");

  out << "rare classes: " << rare.size() << "\n";
  for (const auto& name : rare) {
    const auto it = bank.by_class.find(name);
    out << "  " << name << " crops=" << (it == bank.by_class.end() ? 0 : it->second.size()) << "\n";
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "expected wait: %.4f pages\n", wait);
  out << buf << "augmented pages: " << augmented.pages.size() << "\n";
  return ExitStatus::ok;
}

int run_cached(const std::string& dataset, const std::string& out_path, std::ostream& out) {
  const auto table = build_cached_boxes(load_dataset(dataset));
  write_file_atomic(out_path, cached_boxes_to_json(table));
  out << "cached classes: " << table.boxes.size() << "\n";
  for (const auto& name : table.empty_classes) out << "  no instances: " << name << "\n";
  return ExitStatus::ok;
}

struct DetectOptions {
  std::vector<std::string> maps;
  std::string registry;
  std::string mode = "regressed";
  std::string cache;
  std::string out;
  PostConfig cfg;
};

int run_detect(DetectOptions o, std::ostream& out) {
  const auto mode = parse_box_mode(o.mode);
  if (!mode) throw Error(Errc::validation_error, "unknown box mode '" + o.mode + "'");
  o.cfg.box_mode = *mode;
  o.cfg.validate();
  const Dataset registry = load_dataset(o.registry);
  std::optional<CachedBoxTable> table;
  if (!o.cache.empty()) table = cached_boxes_from_json(read_file(o.cache));
  if (*mode != BoxMode::regressed && !table) {
    throw Error(Errc::missing_cache_entry, "--cache is required for mode '" + o.mode + "'");
  }
  std::vector<PageDetections> pages;
  for (const auto& path : o.maps) {
    MapStack maps = read_dwm(path);
    maps.sanitize();
    pages.push_back({fs::path(path).stem().string(),
                     detect(maps, registry.class_registry, o.cfg, table ? &*table : nullptr)});
  }
  save_detections(pages, o.out);
  for (const auto& page : pages) {
    out << page.page_id << ": " << page.detections.size() << " detections\n";
  }
  return ExitStatus::ok;
}

int run_eval(const std::string& dets, const std::string& gt, double iou_threshold,
             const std::string& out_path, std::ostream& out) {
  const auto result = evaluate(load_detections(dets), load_dataset(gt), iou_threshold);
  if (!out_path.empty()) write_file_atomic(out_path, eval_to_json(result));
  out << format_eval_table(result);
  return ExitStatus::ok;
}

int run_bias(const std::string& dets, const std::string& gt, std::size_t bins, std::ostream& out) {
  out << format_bias_report(size_bias_report(load_detections(dets), load_dataset(gt), bins));
  return ExitStatus::ok;
}

struct AlignOptions {
  std::string reference;
  std::string scan;
  std::string annotations;
  std::string page;
  std::string out;
  SearchRange range;
};

int run_align(const AlignOptions& o, std::ostream& out, std::ostream& err) {
  Dataset dataset = load_dataset(o.annotations);
  const auto reference = read_pgm(o.reference);
  const auto scan = read_pgm(o.scan);
  auto it = std::find_if(dataset.pages.begin(), dataset.pages.end(),
                         [&](const Page& p) { return p.id == o.page; });
  if (it == dataset.pages.end()) {
    throw Error(Errc::validation_error, "page '" + o.page + "' not found in " + o.annotations);
  }
  if (reference.width() != it->width || reference.height() != it->height) {
    throw Error(Errc::validation_error, "reference image size does not match page '" + o.page + "'");
  }
  const AlignResult result = estimate_transform(reference, scan, o.range);
  *it = transfer_annotations(*it, result.transform);
  it->image_path = o.scan;
  save_dataset(dataset, o.out);
  out << format("theta=%.4f tx=%.4f ty=%.4f ncc=%.6f\n", result.transform.theta_deg,
                result.transform.tx, result.transform.ty, result.ncc);
  if (result.ncc < kLowNccWarning) {
    err << "warning: low NCC; the scan may need more than a rigid alignment\n";
  }
  return ExitStatus::ok;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::io_error:
    case Errc::schema_error:
    case Errc::malformed_label:
      return ExitStatus::io_or_format;
    default:
      return ExitStatus::validation;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"omrkit: optical music recognition dataset and detection tooling", "omrkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough(false);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic score pages with exact ground truth");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--pages", synth.pages, "Number of pages")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->required();
  synth_cmd->add_flag("--balanced", synth.balanced, "Equal class counts per page");
  synth_cmd->add_option("--zipf", synth.zipf, "Power-law exponent for class weights");
  synth_cmd->add_option("--width", synth.spec.width, "Page width")->capture_default_str();
  synth_cmd->add_option("--height", synth.spec.height, "Page height")->capture_default_str();
  synth_cmd->add_option("--staves", synth.spec.num_staves, "Staves per page")->capture_default_str();
  synth_cmd->add_option("--symbols-per-staff", synth.spec.symbols_per_staff, "Symbols per staff")
      ->capture_default_str();
  synth_cmd->add_option("--top-margin", synth.spec.top_margin, "Free rows at the top")->capture_default_str();
  synth_cmd->add_flag("--emit-maps", synth.emit_maps, "Also write oracle .dwm map files");
  synth_cmd->add_option("--noise-sigma", synth.noise.energy_noise_sigma, "Energy noise sigma");
  synth_cmd->add_option("--confusion", synth.noise.class_confusion, "Class confusion probability");
  synth_cmd->add_option("--smoothing", synth.noise.box_smoothing_radius, "Box map smoothing radius");

  std::string stats_path;
  std::size_t stats_top = 10;
  double stats_head = kDefaultHeadCoverage;
  auto* stats_cmd = app.add_subcommand("stats", "Class frequency report");
  stats_cmd->add_option("dataset", stats_path, "Dataset document")->required();
  stats_cmd->add_option("--top", stats_top, "k for top-k coverage")->capture_default_str()->check(CLI::PositiveNumber);
  stats_cmd->add_option("--head-coverage", stats_head, "Head coverage for the rare set")
      ->capture_default_str();

  AugmentOptions augment;
  std::size_t max_rare = 0;
  auto* augment_cmd = app.add_subcommand("augment", "Paste rare-symbol crops into the top margin");
  augment_cmd->add_option("dataset", augment.dataset, "Dataset document")->required();
  augment_cmd->add_option("--out", augment.out, "Output directory")->required();
  augment_cmd->add_option("--seed", augment.cfg.seed, "Random seed")->required();
  augment_cmd->add_option("--num-crops", augment.cfg.num_crops, "Crops per page")->capture_default_str();
  augment_cmd->add_option("--crop-w", augment.cfg.crop_w, "Crop width")->capture_default_str();
  augment_cmd->add_option("--crop-h", augment.cfg.crop_h, "Crop height")->capture_default_str();
  augment_cmd->add_option("--margin-rows", augment.cfg.margin_rows, "Crop rows in the margin band")
      ->capture_default_str();
  augment_cmd->add_option("--gap", augment.cfg.gap, "Pixels between crops")->capture_default_str();
  augment_cmd->add_option("--head-coverage", augment.head_coverage, "Head coverage for the rare set")
      ->capture_default_str();
  auto* max_rare_opt = augment_cmd->add_option("--max-rare", max_rare, "Cap on the rare-set size");

  std::string cached_dataset;
  std::string cached_out;
  auto* cached_cmd = app.add_subcommand("cached", "Build the per-class cached box table");
  cached_cmd->add_option("dataset", cached_dataset, "Dataset document")->required();
  cached_cmd->add_option("--out", cached_out, "Output table")->required();

  DetectOptions detect_opts;
  auto* detect_cmd = app.add_subcommand("detect", "Extract detections from .dwm map files");
  detect_cmd->add_option("maps", detect_opts.maps, "Map files")->required();
  detect_cmd->add_option("--registry", detect_opts.registry, "Dataset providing the class registry")
      ->required();
  detect_cmd->add_option("--mode", detect_opts.mode, "regressed, cached or hybrid")->capture_default_str();
  detect_cmd->add_option("--cache", detect_opts.cache, "Cached box table");
  detect_cmd->add_option("--tau", detect_opts.cfg.energy_threshold, "Energy threshold")->capture_default_str();
  detect_cmd->add_option("--connectivity", detect_opts.cfg.connectivity, "4 or 8")->capture_default_str();
  detect_cmd->add_option("--min-area", detect_opts.cfg.min_area, "Minimum component area")->capture_default_str();
  detect_cmd->add_option("--delta", detect_opts.cfg.hybrid_tolerance, "Hybrid tolerance")->capture_default_str();
  detect_cmd->add_option("--out", detect_opts.out, "Detections document")->required();

  std::string eval_dets;
  std::string eval_gt;
  std::string eval_out;
  double eval_iou = 0.5;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP and macro mAP");
  eval_cmd->add_option("--dets", eval_dets, "Detections document")->required();
  eval_cmd->add_option("--gt", eval_gt, "Ground-truth dataset")->required();
  eval_cmd->add_option("--iou", eval_iou, "IoU threshold")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Structured result file");

  AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "Rigidly align a scan to its reference page");
  align_cmd->add_option("--reference", align.reference, "Reference PGM")->required();
  align_cmd->add_option("--scan", align.scan, "Scanned PGM")->required();
  align_cmd->add_option("--annotations", align.annotations, "Dataset document")->required();
  align_cmd->add_option("--page", align.page, "Page id")->required();
  align_cmd->add_option("--out", align.out, "Aligned dataset document")->required();
  align_cmd->add_option("--max-theta", align.range.max_theta_deg, "Rotation search range (deg)")
      ->capture_default_str();
  align_cmd->add_option("--max-shift", align.range.max_shift, "Shift search range (px)")
      ->capture_default_str();

  std::string bias_dets;
  std::string bias_gt;
  std::size_t bias_bins = 4;
  auto* bias_cmd = app.add_subcommand("bias", "Box-size bias by ground-truth size bin");
  bias_cmd->add_option("--dets", bias_dets, "Detections document")->required();
  bias_cmd->add_option("--gt", bias_gt, "Ground-truth dataset")->required();
  bias_cmd->add_option("--bins", bias_bins, "Equal-population bins")->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<const char*> argv{"omrkit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return ExitStatus::ok;
    err << app.help();
    return ExitStatus::usage;
  }

  try {
    if (*synth_cmd) return run_synth(synth, out);
    if (*stats_cmd) return run_stats(stats_path, stats_top, stats_head, out);
    if (*augment_cmd) {
      if (*max_rare_opt) augment.max_rare = max_rare;
      return run_augment(augment, out, err);
    }
    if (*cached_cmd) return run_cached(cached_dataset, cached_out, out);
    if (*detect_cmd) return run_detect(detect_opts, out);
    if (*eval_cmd) return run_eval(eval_dets, eval_gt, eval_iou, eval_out, out);
    if (*align_cmd) return run_align(align, out, err);
    if (*bias_cmd) return run_bias(bias_dets, bias_gt, bias_bins, out);
  } catch (const Error& e) {
    err << "omrkit: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  err << app.help();
  return ExitStatus::usage;
}

}  // namespace omrkit::cli
