#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "freqshort/io.hpp"

namespace fs = std::filesystem;
using freqshort::read_file;

namespace {

const fs::path kWork = fs::temp_directory_path() / "freqshort_cli_test";

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const fs::path log = kWork / "last_output.txt";
  const std::string cmd = std::string(FREQSHORT_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream os;
  os << in.rdbuf();
  r.out = os.str();
  return r;
}

std::string p(const fs::path& path) { return path.string(); }

void same_f32_tree(const fs::path& a, const fs::path& b) {
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".f32") continue;
    ++files;
    const fs::path other = b / fs::relative(e.path(), a);
    REQUIRE(fs::exists(other));
    CHECK(read_file(e.path()) == read_file(other));
  }
  CHECK(files > 0);
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE("cli end to end") {
  Workspace ws;
  const fs::path d1 = kWork / "syn_a";
  const fs::path d2 = kWork / "syn_b";

  SUBCASE("usage errors exit with 2") {
    CHECK(run("--help").code == 0);
    CHECK(run("").code == 2);
    const Run bad_band = run("synthgen --band B5 --out " + p(d1));
    CHECK(bad_band.code == 2);
    CHECK(bad_band.out.find("B1,B2,B3,B4") != std::string::npos);
    CHECK(run("synthgen --band B1 --per-class 3,1 --out " + p(d1)).code == 2);
    CHECK(run("frobnicate").code == 2);
  }

  SUBCASE("synthgen, train and analysis commands") {
    const std::string gen = "synthgen --band B1 --per-class 6,2,2 --seed 7 --out ";
    REQUIRE(run(gen + p(d1)).code == 0);
    REQUIRE(run(gen + p(d2)).code == 0);
    same_f32_tree(d1, d2);
    int train_files = 0;
    for (const auto& e : fs::recursive_directory_iterator(d1 / "train")) train_files += e.path().extension() == ".f32";
    CHECK(train_files == 24);
    CHECK(fs::exists(d1 / "manifest.json"));

    const Run refused = run(gen + p(d1));
    CHECK(refused.code != 0);
    CHECK(refused.out.find("--overwrite") != std::string::npos);
    CHECK(run(gen + p(d1) + " --overwrite").code == 0);
    same_f32_tree(d1, d2);

    // Config file replays the resolved options; flags still override.
    const fs::path d3 = kWork / "syn_c";
    REQUIRE(run("--config " + p(d1 / "config.json") + " synthgen --out " + p(d3)).code == 0);
    same_f32_tree(d1, d3);
    const auto cfg = nlohmann::json::parse(freqshort::read_text(d3 / "config.json"));
    CHECK(cfg["command"] == "synthgen");
    CHECK(cfg["synthgen"]["seed"] == 7);
    CHECK(cfg["synthgen"]["out"] == p(d3));

    const std::string train = "train --data " + p(d1) + " --epochs 2 --batch-size 8 --probe-iterations 4 --out ";
    const fs::path r1 = kWork / "run1";
    const fs::path r2 = kWork / "run2";
    REQUIRE(run(train + p(r1)).code == 0);
    REQUIRE(run(train + p(r2)).code == 0);
    for (const char* f : {"trainlog.csv", "lr_schedule.csv", "probe_predictions.csv"}) {
      CHECK(read_file(r1 / f) == read_file(r2 / f));
    }
    CHECK(read_file(r1 / "model.fqlc") == read_file(r2 / "model.fqlc"));
    CHECK(fs::exists(r1 / "f1_curves.png"));
    CHECK(run("train --data " + p(kWork / "nowhere") + " --out " + p(kWork / "r3")).code == 1);
    const fs::path lp = kWork / "run_lp";
    CHECK(run(train + p(lp) + " --probe-filter lowpass:4").code == 0);
    CHECK(run(train + p(lp) + " --probe-filter lowpass:x").code == 2);

    const fs::path bs = kWork / "bandstop";
    REQUIRE(run("bandstop-eval --data " + p(d1) + " --checkpoint " + p(r1 / "model.fqlc") + " --out " + p(bs)).code == 0);
    int deltas = 0;
    for (const auto& e : fs::directory_iterator(bs)) deltas += e.path().filename().string().rfind("delta_", 0) == 0 && e.path().extension() == ".csv";
    CHECK(deltas == 6);
    CHECK(fs::exists(bs / "delta_B14.png"));
    CHECK(run("bandstop-eval --data " + p(d1) + " --checkpoint " + p(r1 / "model.fqlc") + " --pairs B15 --out " + p(bs)).code == 2);
    CHECK(run("bandstop-eval --data " + p(d1) + " --out " + p(bs)).code == 2);
    CHECK(run("bandstop-eval --data " + p(d1) + " --checkpoint " + p(kWork / "missing.fqlc") + " --out " + p(bs)).code == 1);

    const fs::path ad = kWork / "adcs";
    REQUIRE(run("adcs --data " + p(d1) + " --out " + p(ad)).code == 0);
    for (int c = 0; c < 4; ++c) CHECK(fs::exists(ad / ("adcs_C" + std::to_string(c) + ".f32")));
    CHECK(fs::exists(ad / "adcs_summary.csv"));

    const fs::path dm = kWork / "dfm";
    REQUIRE(run("dfm --data " + p(d1) + " --checkpoint " + p(r1 / "model.fqlc") + " --classes 0 --previews 1 --out " + p(dm)).code == 0);
    for (const char* f : {"scores_C0.f32", "dfm_C0_x1.f32", "dfm_C0_x5.png", "dfm_C0_x10.f32", "ranking_C0.csv", "shortcut_report.csv"}) {
      CHECK(fs::exists(dm / f));
    }
    const fs::path rp = kWork / "report";
    CHECK(run("shortcut-report --data " + p(d1) + " --checkpoint " + p(r1 / "model.fqlc") + " --dfm-dir " + p(dm) + " --classes 0 --out " + p(rp)).code == 0);
    CHECK(read_file(rp / "shortcut_report.csv") == read_file(dm / "shortcut_report.csv"));
    const Run missing = run("shortcut-report --data " + p(d1) + " --checkpoint " + p(r1 / "model.fqlc") + " --dfm-dir " + p(dm) + " --out " + p(rp));
    CHECK(missing.code == 1);
    CHECK(missing.out.find("class 1") != std::string::npos);

    const fs::path fl = kWork / "filtered";
    REQUIRE(run("filter --data " + p(d1) + " --mask keep:B14 --out " + p(fl)).code == 0);
    CHECK(fs::exists(fl / "test"));
    CHECK(run("filter --data " + p(d1) + " --mask file:" + p(dm / "dfm_C0_x5.f32") + " --out " + p(kWork / "f2")).code == 0);
    CHECK(run("filter --data " + p(d1) + " --mask stop:B9 --out " + p(kWork / "f3")).code == 2);
  }

  SUBCASE("tensor encode and decode") {
    const fs::path png = kWork / "img.png";
    freqshort::write_png(png, freqshort::Raster{1, 2, 2, {0, 255, 51, 102}});
    REQUIRE(run("encode --in " + p(png) + " --out " + p(kWork / "img.f32")).code == 0);
    CHECK(fs::file_size(kWork / "img.f32") == 32u);
    const freqshort::Tensor t = freqshort::read_tensor(kWork / "img.f32");
    CHECK(t.data == std::vector<float>{0.f, 1.f, 0.2f, 0.4f});
    CHECK(run("decode --in " + p(kWork / "img.f32") + " --out " + p(kWork / "back.png")).code == 0);
    const auto raster = freqshort::read_png(kWork / "back.png");
    CHECK(raster.pixels == std::vector<std::uint8_t>{0, 255, 51, 102});

    std::ofstream(kWork / "bad.f32") << "FQL0junkjunkjunk";
    const Run bad = run("decode --in " + p(kWork / "bad.f32"));
    CHECK(bad.code == 1);
    CHECK(bad.out.find("magic") != std::string::npos);
  }
  fs::remove_all(kWork);
}
