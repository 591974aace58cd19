// Runs the paoxi executable end to end on a tiny configuration.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "paoxi/checksum.hpp"
#include "paoxi/dataset_io.hpp"
#include "paoxi/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace paoxi;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("paoxi_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "tiny.json") << R"({
      "preset": "desk",
      "phantom": {"grid_dim": 16},
      "transport": {"n_packets": 400},
      "pipeline": {"zero_rows": 2}
    })";
    return d;
  }();
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const std::string& args) {
  const fs::path o = work() / "stdout.txt", e = work() / "stderr.txt";
  const std::string cmd = "cd " + work().string() + " && " PAOXI_CLI_PATH " " + args + " >" + o.string() +
                          " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(o), read_text_file(e)};
}

std::string tiny(const std::string& args) { return args + " --config tiny.json"; }

// Phantoms s000000..s000009 and their maps, built once.
void ensure_maps() {
  static bool done = false;
  if (done) return;
  REQUIRE(run_cli(tiny("generate --seed 0 --count 10 --out ph")).code == 0);
  REQUIRE(run_cli(tiny("simulate --phantoms ph --out maps")).code == 0);
  done = true;
}

void ensure_datasets() {
  static bool done = false;
  if (done) return;
  ensure_maps();
  REQUIRE(run_cli(tiny("build-dataset --phantoms ph --maps maps --snr 5 --snr 25 --out ds")).code == 0);
  done = true;
}

}  // namespace

TEST_CASE("generate writes one phantom per seed, reproducibly") {
  REQUIRE(run_cli(tiny("generate --seed 0 --count 10 --out gen_a")).code == 0);
  REQUIRE(run_cli(tiny("generate --seed 0 --count 10 --out gen_b")).code == 0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(work() / "gen_a")) {
    if (e.path().extension() != ".bin" && !e.path().string().ends_with(".phantom.json")) continue;
    ++n;
    CHECK(read_text_file(e.path()) == read_text_file(work() / "gen_b" / e.path().filename()));
  }
  CHECK(n == 40);
  // The snapshot alone reproduces the run.
  REQUIRE(run_cli("generate --config gen_a/generate.config.json --out gen_c").code == 0);
  CHECK(read_text_file(work() / "gen_c" / "s000007.so2.bin") ==
        read_text_file(work() / "gen_a" / "s000007.so2.bin"));
}

TEST_CASE("usage and config errors exit with 2") {
  std::ofstream(work() / "bad_diam.json") << R"({"phantom": {"diameter_range_cm": [0.4, 0.1]}})";
  auto r = run_cli("generate --config bad_diam.json --out bad");
  CHECK(r.code == 2);
  const auto msg = json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(msg["level"] == "error");
  CHECK(msg["kind"] == "config");
  CHECK(run_cli("generate --out x --no-such-flag").code == 2);
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("generate --preset galactic --out x").code == 2);
  std::ofstream(work() / "unknown.json") << R"({"phantom": {"grid": 8}})";
  CHECK(run_cli("generate --config unknown.json --out x").code == 2);
  CHECK(run_cli("generate --config missing.json --out x").code == 2);
}

TEST_CASE("print-config emits the resolved configuration") {
  const auto r = run_cli(tiny("generate --print-config --packets 77 --snr inf --snr 10 --out unused"));
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["transport"]["n_packets"] == 77);
  CHECK(j["phantom"]["grid_dim"] == 16);
  CHECK(j["pipeline"]["snr_db"][0] == "inf");
  CHECK(j["invocation"]["command"] == "generate");
  CHECK(!fs::exists(work() / "unused"));
}

TEST_CASE("shipped config files resolve to the built-in presets") {
  for (const std::string name : {"desk", "paper"}) {
    auto from_file = json::parse(run_cli("generate --config " PAOXI_CONFIG_DIR "/" + name + ".json --print-config --out x").out);
    auto from_flag = json::parse(run_cli("generate --preset " + name + " --print-config --out x").out);
    CHECK(from_file == from_flag);
  }
}

TEST_CASE("simulate writes one map and a closed ledger per phantom and wavelength") {
  REQUIRE(run_cli(tiny("generate --seed 20 --count 2 --out ph2")).code == 0);
  REQUIRE(run_cli(tiny("simulate --phantoms ph2 --out maps2")).code == 0);
  int maps = 0;
  for (const auto& e : fs::directory_iterator(work() / "maps2")) {
    const auto name = e.path().filename().string();
    if (name.find(".energy_") != std::string::npos) ++maps;
    if (name.find(".ledger_") != std::string::npos) {
      const auto j = json::parse(read_text_file(e.path()));
      CHECK(j["relative_closure_error"].get<double>() < 1e-9);
      CHECK(j["n_packets"] == 400);
    }
  }
  CHECK(maps == 4);
  CHECK(run_cli(tiny("simulate --phantoms ph2 --seed 5 --count 1 --out maps3")).code == 2);
  fs::create_directories(work() / "empty");
  CHECK(run_cli(tiny("simulate --phantoms empty --out maps4")).code == 2);
}

TEST_CASE("build-dataset writes samples, splits, and one variant per SNR") {
  ensure_datasets();
  for (const char* v : {"ds/snr_5dB", "ds/snr_25dB"}) {
    const auto m = read_manifest(work() / v);
    CHECK(m.samples.size() == 10);
    CHECK(m.in_split(Split::kTrain).size() == 8);
    CHECK(m.in_split(Split::kVal).size() == 1);
    CHECK(m.in_split(Split::kTest).size() == 1);
    CHECK_NOTHROW(verify_dataset(work() / v, m));
    CHECK(!fs::exists(work() / v / ".paoxi.lock"));
  }
  REQUIRE(run_cli(tiny("build-dataset --phantoms ph --maps maps --snr 25 --out ds_single")).code == 0);
  const auto single = read_manifest(work() / "ds_single");
  CHECK(single.config["dataset_snr_db"] == 25.0);
  // Same inputs, same bytes.
  CHECK(read_text_file(work() / "ds_single" / "s000003.pa700.bin") ==
        read_text_file(work() / "ds/snr_25dB" / "s000003.pa700.bin"));
  CHECK(run_cli(tiny("build-dataset --phantoms empty --maps maps --out ds_empty")).code == 2);
  CHECK(run_cli(tiny("build-dataset --phantoms ph2 --maps maps2 --out ds_small")).code == 2);
}

TEST_CASE("unmix reports the documented columns") {
  ensure_datasets();
  const auto r = run_cli(tiny("unmix --dataset ds/snr_5dB --dataset ds/snr_25dB --out un"));
  REQUIRE(r.code == 0);
  const auto t = parse_csv(read_text_file(work() / "un" / "unmix_report.csv"));
  CHECK(t.header == std::vector<std::string>{"method", "snr_db", "n_samples", "n_pixels", "n_invalid",
                                             "mean_abs_error", "median_abs_error", "fn_rate", "fp_rate",
                                             "tp", "fn", "fp", "tn", "raw_mean_abs_error",
                                             "raw_median_abs_error"});
  CHECK(t.rows.size() == 2);
  for (const auto& row : t.rows) CHECK(std::isfinite(std::stod(row[t.column("raw_median_abs_error")])));
  CHECK(fs::exists(work() / "un" / "snr_5dB"));
  CHECK(r.err.find("missing SNR level 10dB") != std::string::npos);
  CHECK(run_cli(tiny("unmix --dataset nowhere --out un2")).code == 2);
}

TEST_CASE("evaluate scores identity predictions as perfect and compares to the baseline") {
  ensure_datasets();
  const auto m = read_manifest(work() / "ds/snr_25dB");
  fs::create_directories(work() / "ident");
  for (const auto* e : m.in_split(Split::kTest)) {
    const auto rec = read_sample(work() / "ds/snr_25dB", *e);
    write_image(work() / "ident" / (e->sample_id + ".so2_pred.bin"), rec.so2_gt);
    Image<float> seg(rec.seg_gt.rows(), rec.seg_gt.cols());
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] = rec.seg_gt[i] ? 0.8f : 0.2f;
    write_image(work() / "ident" / (e->sample_id + ".seg_pred.bin"), seg);
  }
  const auto r =
      run_cli(tiny("evaluate --dataset ds/snr_25dB --predictions ident --method onet --baseline --out ev"));
  REQUIRE(r.code == 0);
  const auto t = parse_csv(read_text_file(work() / "ev" / "eval.csv"));
  REQUIRE(t.rows.size() == 2);
  const auto mi = t.column("method");
  const auto& model = t.rows[0][mi] == "onet" ? t.rows[0] : t.rows[1];
  CHECK(std::stod(model[t.column("median_abs_error")]) == 0.0);
  CHECK(std::stod(model[t.column("mean_abs_error")]) == 0.0);
  CHECK(std::stod(model[t.column("fn_rate")]) == 0.0);
  CHECK(std::stod(model[t.column("fp_rate")]) == 0.0);

  fs::create_directories(work() / "wrong");
  for (const auto* e : m.in_split(Split::kTest))
    write_image(work() / "wrong" / (e->sample_id + ".so2_pred.bin"), Image<float>(3, 3));
  CHECK(run_cli(tiny("evaluate --dataset ds/snr_25dB --predictions wrong --out ev2")).code == 2);
  CHECK(run_cli(tiny("evaluate --dataset ds/snr_25dB --predictions empty --out ev3")).code == 2);
}

TEST_CASE("plot draws one series per method, deterministically") {
  std::ofstream(work() / "fig4.csv")
      << "method,snr_db,n_samples,n_pixels,n_invalid,mean_abs_error,median_abs_error,fn_rate,fp_rate,tp,fn,fp,tn\n"
         "linear_unmixing,5,10,100,0,0.3,0.25,,,,,,\nlinear_unmixing,25,10,100,0,0.2,0.15,,,,,,\n"
         "onet,5,10,100,0,0.1,0.08,0.2,0.01,8,2,1,99\nonet,25,10,100,0,0.06,0.05,0.1,0.01,9,1,1,99\n";
  REQUIRE(run_cli("plot --csv fig4.csv --out a.svg").code == 0);
  REQUIRE(run_cli("plot --csv fig4.csv --out b.svg").code == 0);
  const auto svg = read_text_file(work() / "a.svg");
  CHECK(svg == read_text_file(work() / "b.svg"));
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 2);
  CHECK(svg.find(">onet<") != std::string::npos);
  REQUIRE(run_cli("plot --csv fig4.csv --y fn_rate --out fn.svg").code == 0);

  std::ofstream(work() / "empty.csv") << "method,snr_db,median_abs_error\n";
  CHECK(run_cli("plot --csv empty.csv --out e.svg").code == 2);
  std::ofstream(work() / "blank.csv") << "";
  CHECK(run_cli("plot --csv blank.csv --out e.svg").code == 2);
}

TEST_CASE("learning-curve fits and plots") {
  std::ofstream f(work() / "lc_points.csv");
  f << "train_size,median_error\n";
  for (double n : {100.0, 200.0, 400.0, 800.0, 1600.0}) f << n << ',' << 0.5 * std::pow(n, -0.5) + 0.05 << '\n';
  f.close();
  const auto r = run_cli("learning-curve --points lc_points.csv --out lc");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("trend nonincreasing=1") != std::string::npos);
  REQUIRE(run_cli("plot --csv lc/learning_curve.csv --out lc/lc.svg").code == 0);
  CHECK(read_text_file(work() / "lc" / "lc.svg").find("fitted_error") != std::string::npos);
}
