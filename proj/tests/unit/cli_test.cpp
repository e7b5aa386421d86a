#include <doctest.h>

#include <sstream>

#include "omrkit/augment.hpp"
#include "omrkit/cli.hpp"
#include "omrkit/detection.hpp"
#include "omrkit/image.hpp"
#include "omrkit/io_util.hpp"
#include "omrkit/scan_align.hpp"
#include "omrkit/synth.hpp"
#include "support/rare_fixture.hpp"
#include "support/temp_dir.hpp"

using namespace omrkit;
using omrkit::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    files.emplace_back(e.path().filename().string(), read_file(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Small pages keep the map files and alignment search quick.
std::vector<std::string> synth_args(const fs::path& out, const std::string& seed) {
  return {"synth", "--out", out.string(), "--pages", "2", "--seed", seed, "--width", "400",
          "--height", "360", "--staves", "2", "--symbols-per-staff", "8", "--top-margin", "90"};
}

}  // namespace

TEST_CASE("help, version and usage errors") {
  const auto help = run_cli({"--help"});
  CHECK(help.code == 0);
  for (const char* cmd : {"synth", "stats", "augment", "cached", "detect", "eval", "align", "bias"}) {
    CHECK(help.out.find(cmd) != std::string::npos);
  }
  const auto version = run_cli({"--version"});
  CHECK(version.code == 0);
  CHECK(version.out.find(cli::kVersion) != std::string::npos);

  const auto unknown = run_cli({"frobnicate"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("synth") != std::string::npos);
  CHECK(run_cli({}).code == 1);
}

TEST_CASE("stats on a missing file names the path") {
  const auto r = run_cli({"stats", "missing.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.json") != std::string::npos);
}

TEST_CASE("randomized commands require --seed") {
  TempDir tmp("cli_seed");
  const auto ds = testing::write_rare_fixture(tmp / "in", 3);
  CHECK(run_cli({"augment", ds.string(), "--out", (tmp / "o").string()}).code == 1);
  CHECK(run_cli({"synth", "--out", (tmp / "s").string(), "--pages", "1"}).code == 1);
  CHECK_FALSE(fs::exists(tmp / "o"));
}

TEST_CASE("synth is deterministic and stats reads its output") {
  TempDir tmp("cli_synth");
  REQUIRE(run_cli(synth_args(tmp / "a", "7")).code == 0);
  REQUIRE(run_cli(synth_args(tmp / "b", "7")).code == 0);
  REQUIRE(run_cli(synth_args(tmp / "c", "8")).code == 0);
  CHECK(snapshot(tmp / "a") == snapshot(tmp / "b"));
  CHECK(snapshot(tmp / "a") != snapshot(tmp / "c"));

  const auto s1 = run_cli({"stats", (tmp / "a" / "dataset.json").string()});
  const auto s2 = run_cli({"stats", (tmp / "a" / "dataset.json").string()});
  CHECK(s1.code == 0);
  CHECK(s1.out == s2.out);
  CHECK(s1.out.find("noteheadBlack") != std::string::npos);
}

TEST_CASE("augment warns exactly when the rare set exceeds the wait bound") {
  TempDir tmp("cli_warn");
  for (const std::size_t n : {114u, 115u}) {
    CAPTURE(n);
    const auto ds = testing::write_rare_fixture(tmp / ("in" + std::to_string(n)), n);
    const auto r = run_cli({"augment", ds.string(), "--out", (tmp / ("o" + std::to_string(n))).string(),
                            "--seed", "1"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rare classes: " + std::to_string(n)) != std::string::npos);
    const bool warned = r.err.find("warning") != std::string::npos;
    CHECK(warned == (n > 114));
    if (warned) CHECK(r.err.find("at most 114") != std::string::npos);
  }
}

TEST_CASE("augment writes nothing when a page cannot take the band") {
  TempDir tmp("cli_fail");
  Dataset d;
  d.register_class("head");
  d.register_class("rare");
  Page page{"p", 600, 400, "p.pgm", {}};
  for (int i = 0; i < 20; ++i) page.annotations.push_back({"head", {10.0 + 20 * i, 300, 16.0 + 20 * i, 306}, {}, {}, {}});
  page.annotations.push_back({"rare", {100, 20, 110, 30}, {}, {}, {}});  // inside the band
  d.pages.push_back(page);
  fs::create_directories(tmp / "in");
  write_pgm(GrayImage(400, 600, 255), tmp / "in" / "p.pgm");
  save_dataset(d, tmp / "in" / "ds.json");
  const auto r = run_cli({"augment", (tmp / "in" / "ds.json").string(), "--out", (tmp / "o").string(),
                          "--seed", "3"});
  CHECK(r.code == 3);
  CHECK(r.err.find("DoesNotFit") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp / "o" / "dataset.json"));
}

TEST_CASE("detect, eval, cached and bias pipeline") {
  TempDir tmp("cli_pipe");
  auto args = synth_args(tmp / "s", "11");
  args.push_back("--emit-maps");
  REQUIRE(run_cli(args).code == 0);
  const std::string ds = (tmp / "s" / "dataset.json").string();
  const std::string table = (tmp / "cache.json").string();

  REQUIRE(run_cli({"cached", ds, "--out", table}).code == 0);
  const std::vector<std::string> maps{(tmp / "s" / "page_000.dwm").string(),
                                      (tmp / "s" / "page_001.dwm").string()};

  for (const std::string mode : {"regressed", "cached", "hybrid"}) {
    CAPTURE(mode);
    const std::string dets = (tmp / ("dets_" + mode + ".json")).string();
    std::vector<std::string> det_args{"detect", maps[0], maps[1], "--registry", ds, "--mode", mode,
                                      "--out", dets};
    if (mode != "regressed") {
      det_args.push_back("--cache");
      det_args.push_back(table);
    }
    REQUIRE(run_cli(det_args).code == 0);
    const auto first = read_file(dets);
    REQUIRE(run_cli(det_args).code == 0);
    CHECK(read_file(dets) == first);

    const std::string res = (tmp / ("eval_" + mode + ".json")).string();
    const auto e = run_cli({"eval", "--dets", dets, "--gt", ds, "--out", res});
    CHECK(e.code == 0);
    CHECK(e.out.find("mAP") != std::string::npos);
    CHECK(fs::exists(res));

    const auto b = run_cli({"bias", "--dets", dets, "--gt", ds, "--bins", "3"});
    CHECK(b.code == 0);
  }

  CHECK(run_cli({"detect", maps[0], "--registry", ds, "--mode", "cached", "--out",
                 (tmp / "x.json").string()}).code == 3);
  CHECK(run_cli({"detect", maps[0], "--registry", ds, "--mode", "sideways", "--out",
                 (tmp / "x.json").string()}).code != 0);
  write_file_atomic(tmp / "bad.dwm", "DWM9");
  CHECK(run_cli({"detect", (tmp / "bad.dwm").string(), "--registry", ds, "--out",
                 (tmp / "x.json").string()}).code == 2);
}

TEST_CASE("align recovers a synthetic scan and rewrites the page") {
  TempDir tmp("cli_align");
  REQUIRE(run_cli(synth_args(tmp / "s", "5")).code == 0);
  const auto ref = read_pgm(tmp / "s" / "page_000.pgm");
  DegradeSpec spec;
  spec.warp = {1.5, -6.0, 4.0};
  spec.blur_sigma = 1.0;
  spec.noise_sigma = 5.0;
  Rng rng(2);
  write_pgm(degrade_image(ref, spec, rng), tmp / "scan.pgm");

  const std::vector<std::string> args{"align", "--reference", (tmp / "s" / "page_000.pgm").string(),
                                      "--scan", (tmp / "scan.pgm").string(), "--annotations",
                                      (tmp / "s" / "dataset.json").string(), "--page", "page_000",
                                      "--out", (tmp / "aligned.json").string(), "--max-theta", "3",
                                      "--max-shift", "10"};
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  double theta = 0, tx = 0, ty = 0, ncc = 0;
  REQUIRE(std::sscanf(r.out.c_str(), "theta=%lf tx=%lf ty=%lf ncc=%lf", &theta, &tx, &ty, &ncc) == 4);
  CHECK(std::abs(theta - 1.5) <= 0.1);
  CHECK(std::abs(tx + 6.0) <= 1.0);
  CHECK(std::abs(ty - 4.0) <= 1.0);
  CHECK(run_cli(args).out == r.out);

  const auto aligned = load_dataset(tmp / "aligned.json");
  const auto original = load_dataset(tmp / "s" / "dataset.json");
  CHECK(aligned.pages[1] == original.pages[1]);
  CHECK(aligned.pages[0].annotations.size() == original.pages[0].annotations.size());

  auto bad = args;
  bad[8] = "page_999";
  CHECK(run_cli(bad).code == 3);
}
