// paoxi: command-line front end.
//
//   generate       phantoms for a seed range
//   simulate       absorbed energy maps for every phantom and wavelength
//   build-dataset  sample records and manifest at one or more SNR levels
//   unmix          linear-unmixing predictions and error report
//   evaluate       error tables for predictions (and the baseline)
//   plot           SVG line plot of a report CSV
//   learning-curve power-law fit of error against training-set size
//
// Exit codes: 0 success, 2 usage/config/input error, 1 internal error.

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "paoxi/checksum.hpp"
#include "paoxi/dataset_io.hpp"
#include "paoxi/error.hpp"
#include "paoxi/experiment.hpp"
#include "paoxi/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace paoxi;

namespace {

void log_line(const char* level, const std::string& kind, const std::string& message) {
  std::cerr << json{{"level", level}, {"kind", kind}, {"message", message}}.dump() << '\n';
}

void warn(const std::string& message) { log_line("warning", "warning", message); }

struct Common {
  std::string config_file;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> count;
  std::optional<std::uint64_t> packets;
  std::optional<int> workers;
  std::vector<std::string> snr;
  std::string out;
  bool print_config = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config_file, "JSON config file; flags override its values");
  sub->add_option("--preset", c.preset_name, "base preset: paper or desk (default paper)");
  sub->add_option("--seed", c.seed, "first phantom seed");
  sub->add_option("--count", c.count, "number of phantom seeds");
  sub->add_option("--packets", c.packets, "photon packets per simulation");
  sub->add_option("--workers", c.workers, "OpenMP threads (0 = default)");
  sub->add_option("--snr", c.snr, "target SNR in dB (repeatable; 'inf' for noise-free)");
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  sub->add_flag("--print-config", c.print_config, "print the resolved config and exit");
}

double parse_snr(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad --snr value '" + s + "'");
  }
}

std::string snr_tag(double snr) {
  if (std::isinf(snr)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gdB", snr);
  return buf;
}

RunConfig resolve(const Common& c) {
  json file;
  if (!c.config_file.empty()) {
    if (!fs::exists(c.config_file)) throw ConfigError("config file " + c.config_file + " not found");
    try {
      file = json::parse(read_text_file(c.config_file));
    } catch (const json::exception& e) {
      throw ParseError(c.config_file + ": " + e.what());
    }
  }
  std::string name = c.preset_name;
  if (name.empty() && file.is_object() && file.contains("preset")) name = file["preset"].get<std::string>();
  if (name.empty()) name = "paper";
  RunConfig cfg = preset(name);
  if (!file.is_null()) cfg = apply_json(cfg, file);
  if (c.seed) cfg.first_seed = *c.seed;
  if (c.count) cfg.seed_count = *c.count;
  if (c.packets) cfg.transport.n_packets = *c.packets;
  if (c.workers) cfg.transport.workers = *c.workers;
  if (!c.snr.empty()) {
    cfg.snr_db.clear();
    for (const auto& s : c.snr) cfg.snr_db.push_back(parse_snr(s));
  }
  cfg.validate();
  cfg.transport.validate();
  cfg.phantom.validate();
  return cfg;
}

json snapshot(const RunConfig& cfg, const std::string& command, const json& inputs) {
  json j = to_json(cfg);
  j["invocation"] = {{"command", command}, {"inputs", inputs}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

void write_snapshot(const fs::path& dir, const std::string& command, const json& snap) {
  fs::create_directories(dir);
  write_text(dir / (command + ".config.json"), snap.dump(2) + "\n");
}

OpticsDb load_optics(const RunConfig& cfg) {
  return cfg.optics_dir.empty() ? OpticsDb::load_default() : OpticsDb::load(cfg.optics_dir);
}

// Phantom ids to process: an explicit seed range when given, otherwise every phantom on disk.
std::vector<std::string> select_ids(const Common& c, const RunConfig& cfg, const fs::path& phantoms) {
  const auto on_disk = list_phantoms(phantoms);
  if (!c.seed && !c.count) {
    if (on_disk.empty()) throw ConfigError("no phantoms in " + phantoms.string());
    return on_disk;
  }
  std::vector<std::string> ids;
  for (std::uint64_t s = cfg.first_seed; s < cfg.first_seed + cfg.seed_count; ++s) {
    const auto id = sample_id_for(s);
    if (!std::binary_search(on_disk.begin(), on_disk.end(), id)) {
      throw ConfigError("missing phantom " + id + " in " + phantoms.string());
    }
    ids.push_back(id);
  }
  return ids;
}

// --- generate -----------------------------------------------------------------

int cmd_generate(const Common& c) {
  const RunConfig cfg = resolve(c);
  const json snap = snapshot(cfg, "generate", json::object());
  if (c.print_config) {
    std::cout << snap.dump(2) << '\n';
    return 0;
  }
  const fs::path out = c.out;
  for (std::uint64_t s = cfg.first_seed; s < cfg.first_seed + cfg.seed_count; ++s) {
    PhantomSpec spec = cfg.phantom;
    spec.rng_seed = s;
    write_phantom(out, sample_id_for(s), generate_phantom(spec), spec);
  }
  write_snapshot(out, "generate", snap);
  std::cout << "wrote " << cfg.seed_count << " phantoms to " << out.string() << '\n';
  return 0;
}

// --- simulate -----------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& phantoms) {
  const RunConfig cfg = resolve(c);
  const json snap = snapshot(cfg, "simulate", {{"phantoms", phantoms}});
  if (c.print_config) {
    std::cout << snap.dump(2) << '\n';
    return 0;
  }
  const auto ids = select_ids(c, cfg, phantoms);
  const OpticsDb db = load_optics(cfg);
  const fs::path out = c.out;
  for (const auto& id : ids) {
    const PhantomFile p = read_phantom(phantoms, id);
    TransportConfig tc = cfg.transport;
    tc.rng_seed = transport_seed_for(cfg, p.spec.rng_seed);
    for (double wl : cfg.wavelengths_nm) {
      const TransportResult r = simulate(p.grid, db, wl, tc);
      if (r.ledger.relative_closure_error() > 1e-9) {
        throw std::logic_error(id + ": energy ledger does not close at " + std::to_string(wl) + " nm");
      }
      write_energy_map(out, id, r, tc.rng_seed);
    }
  }
  write_snapshot(out, "simulate", snap);
  std::cout << "wrote " << ids.size() * cfg.wavelengths_nm.size() << " energy maps to " << out.string() << '\n';
  return 0;
}

// --- build-dataset ------------------------------------------------------------

int cmd_build_dataset(const Common& c, const std::string& phantoms, const std::string& maps) {
  const RunConfig cfg = resolve(c);
  const json snap = snapshot(cfg, "build-dataset", {{"phantoms", phantoms}, {"maps", maps}});
  if (c.print_config) {
    std::cout << snap.dump(2) << '\n';
    return 0;
  }
  const auto ids = select_ids(c, cfg, phantoms);
  if (!fs::is_directory(maps)) throw ConfigError("map directory " + maps + " does not exist");
  const auto splits = assign_splits(ids, cfg.split_seed);
  std::map<std::string, Split> split_of;
  for (const auto& id : splits.train) split_of[id] = Split::kTrain;
  for (const auto& id : splits.val) split_of[id] = Split::kVal;
  for (const auto& id : splits.test) split_of[id] = Split::kTest;
  const std::string optics_crc = load_optics(cfg).checksum();

  for (double snr : cfg.snr_db) {
    const fs::path dir = cfg.snr_db.size() == 1 ? fs::path(c.out) : fs::path(c.out) / ("snr_" + snr_tag(snr));
    fs::create_directories(dir);
    DatasetLock lock(dir);
    std::vector<SampleEntry> entries(ids.size());
    std::vector<std::string> errors(ids.size());
    const auto n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.transport.workers > 0 ? cfg.transport.workers : omp_get_max_threads())
    for (std::int64_t i = 0; i < n; ++i) {
      try {
        const auto& id = ids[i];
        const PhantomFile p = read_phantom(phantoms, id);
        const auto a = read_energy_map(maps, id, cfg.wavelengths_nm[0]);
        const auto b = read_energy_map(maps, id, cfg.wavelengths_nm[1]);
        SampleRecord r = make_sample(id, p.spec.rng_seed, p.grid, a, b, snr, cfg, optics_crc);
        r.metadata.n_packets = a.n_packets;
        r.validate();
        entries[i] = write_sample(dir, r);
        entries[i].split = split_of.at(id);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (const auto& e : errors)
      if (!e.empty()) throw ConfigError(e);
    Manifest m;
    m.config = to_json(cfg);
    m.config["dataset_snr_db"] = std::isinf(snr) ? json(nullptr) : json(snr);
    m.optics_checksum = optics_crc;
    m.split_seed = cfg.split_seed;
    m.samples = std::move(entries);
    write_manifest(dir, m);
    write_snapshot(dir, "build-dataset", snap);
    std::cout << "wrote " << ids.size() << " samples (" << splits.train.size() << '/' << splits.val.size()
              << '/' << splits.test.size() << ") at " << snr_tag(snr) << " to " << dir.string() << '\n';
  }
  return 0;
}

// --- unmix / evaluate -------------------------------------------------------------

Split parse_split(const std::string& s) { return split_from_string(s); }

std::vector<const SampleEntry*> entries_for(const Manifest& m, const std::string& split) {
  if (split == "all") {
    std::vector<const SampleEntry*> out;
    for (const auto& e : m.samples) out.push_back(&e);
    return out;
  }
  return m.in_split(parse_split(split));
}

double dataset_snr(const Manifest& m, const std::string& dir) {
  if (!m.config.is_object() || !m.config.contains("dataset_snr_db")) {
    throw ConfigError(dir + ": manifest does not record the dataset SNR");
  }
  const auto& v = m.config["dataset_snr_db"];
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

struct LevelData {
  std::vector<EvalCase> cases;
  std::vector<Prediction> preds;
};

using Levels = std::map<std::pair<std::string, double>, LevelData>;

void check_paper_levels(const Levels& levels) {
  std::map<std::string, std::vector<double>> by_method;
  for (const auto& [key, _] : levels) by_method[key.first].push_back(key.second);
  for (const auto& [method, snrs] : by_method) {
    if (snrs.size() < 2) continue;
    for (double want : kPaperSnrLevels)
      if (std::find(snrs.begin(), snrs.end(), want) == snrs.end())
        warn(method + ": missing SNR level " + snr_tag(want));
  }
}

std::vector<SweepRow> score(const Levels& levels, double threshold) {
  std::vector<SweepRow> rows;
  for (const auto& [key, d] : levels) rows.push_back(score_level(key.first, key.second, d.cases, d.preds, threshold));
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.method != b.method ? a.method < b.method : a.snr_db < b.snr_db;
  });
  return rows;
}

void add_baseline(Levels& levels, const std::string& dir, const std::string& split, const ExtinctionMatrix& e,
                  const fs::path* pred_out) {
  const Manifest m = read_manifest(dir);
  const double snr = dataset_snr(m, dir);
  const auto entries = entries_for(m, split);
  if (entries.empty()) throw ConfigError(dir + ": no samples in split '" + split + "'");
  auto& level = levels[{"linear_unmixing", snr}];
  const Predictor predict = linear_unmixing_predictor(e);
  for (const auto* entry : entries) {
    const EvalCase ec = eval_case(read_sample(dir, *entry));
    Prediction p = predict(ec);
    if (pred_out) {
      write_image(*pred_out / (entry->sample_id + ".so2_pred.bin"), to_float(p.so2));
      write_mask(*pred_out / (entry->sample_id + ".so2_valid.bin"), *p.valid);
      write_image(*pred_out / (entry->sample_id + ".so2_raw.bin"), to_float(*p.so2_raw));
    }
    level.cases.push_back(ec);
    level.preds.push_back(std::move(p));
  }
}

void write_reports(const fs::path& out, const std::string& stem, const std::vector<SweepRow>& rows) {
  fs::create_directories(out);
  const std::string csv = sweep_csv(rows);
  write_text(out / (stem + ".csv"), csv);
  write_text(out / (stem + "_per_vessel.csv"), per_vessel_csv(rows));
  std::cout << csv;
}

int cmd_unmix(const Common& c, const std::vector<std::string>& datasets, const std::string& split) {
  const RunConfig cfg = resolve(c);
  const json snap = snapshot(cfg, "unmix", {{"datasets", datasets}, {"split", split}});
  if (c.print_config) {
    std::cout << snap.dump(2) << '\n';
    return 0;
  }
  const ExtinctionMatrix e =
      ExtinctionMatrix::from_optics(load_optics(cfg), cfg.wavelengths_nm[0], cfg.wavelengths_nm[1]);
  Levels levels;
  const fs::path out = c.out;
  for (const auto& d : datasets) {
    const fs::path pred_dir = datasets.size() == 1 ? out : out / fs::path(d).filename();
    fs::create_directories(pred_dir);
    add_baseline(levels, d, split, e, &pred_dir);
  }
  check_paper_levels(levels);
  write_reports(out, "unmix_report", score(levels, kDefaultSegThreshold));
  write_snapshot(out, "unmix", snap);
  return 0;
}

Prediction load_prediction(const fs::path& dir, const std::string& id, const EvalCase& ec) {
  const fs::path so2 = dir / (id + ".so2_pred.bin");
  if (!fs::exists(so2)) throw ConfigError("missing prediction " + so2.string());
  Prediction p;
  p.so2 = to_double(read_image(so2));
  if (!p.so2.same_shape(ec.gt_so2)) {
    throw ConfigError(so2.string() + ": prediction is " + std::to_string(p.so2.rows()) + "x" +
                      std::to_string(p.so2.cols()) + ", ground truth is " + std::to_string(ec.gt_so2.rows()) +
                      "x" + std::to_string(ec.gt_so2.cols()));
  }
  if (const fs::path v = dir / (id + ".so2_valid.bin"); fs::exists(v)) {
    p.valid = read_mask(v);
    if (!p.valid->same_shape(ec.gt_mask)) throw ConfigError(v.string() + ": shape differs from ground truth");
  }
  if (const fs::path r = dir / (id + ".so2_raw.bin"); fs::exists(r)) {
    p.so2_raw = to_double(read_image(r));
    if (!p.so2_raw->same_shape(ec.gt_so2)) throw ConfigError(r.string() + ": shape differs from ground truth");
  }
  if (const fs::path s = dir / (id + ".seg_pred.bin"); fs::exists(s)) {
    p.seg = to_double(read_image(s));
    if (!p.seg->same_shape(ec.gt_mask)) throw ConfigError(s.string() + ": shape differs from ground truth");
  }
  return p;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& datasets,
                 const std::vector<std::string>& predictions, std::vector<std::string> methods,
                 bool baseline, const std::string& split, double threshold) {
  const RunConfig cfg = resolve(c);
  const json snap = snapshot(cfg, "evaluate",
                             {{"datasets", datasets},
                              {"predictions", predictions},
                              {"methods", methods},
                              {"baseline", baseline},
                              {"split", split},
                              {"seg_threshold", threshold}});
  if (c.print_config) {
    std::cout << snap.dump(2) << '\n';
    return 0;
  }
  if (predictions.size() != datasets.size() && !(predictions.empty() && baseline)) {
    throw ConfigError("give one --predictions directory per --dataset");
  }
  if (methods.empty()) methods.push_back("model");
  if (methods.size() == 1) methods.resize(predictions.size(), methods.front());
  if (methods.size() != predictions.size()) throw ConfigError("give one --method per --predictions, or one for all");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("--seg-threshold must lie in [0, 1]");

  Levels levels;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Manifest m = read_manifest(datasets[i]);
    const double snr = dataset_snr(m, datasets[i]);
    const auto entries = entries_for(m, split);
    if (entries.empty()) throw ConfigError(datasets[i] + ": no samples in split '" + split + "'");
    auto& level = levels[{methods[i], snr}];
    for (const auto* entry : entries) {
      const EvalCase ec = eval_case(read_sample(datasets[i], *entry));
      level.preds.push_back(load_prediction(predictions[i], entry->sample_id, ec));
      level.cases.push_back(ec);
    }
  }
  if (baseline) {
    const ExtinctionMatrix e =
        ExtinctionMatrix::from_optics(load_optics(cfg), cfg.wavelengths_nm[0], cfg.wavelengths_nm[1]);
    for (const auto& d : datasets) add_baseline(levels, d, split, e, nullptr);
  }
  check_paper_levels(levels);
  const fs::path out = c.out;
  write_reports(out, "eval", score(levels, threshold));
  write_snapshot(out, "evaluate", snap);
  return 0;
}

// --- plot / learning-curve -------------------------------------------------------

double cell_value(const std::string& s) {
  if (s.empty()) return std::nan("");
  try {
    return std::stod(s);
  } catch (const std::logic_error&) {
    throw ParseError("non-numeric CSV value '" + s + "'");
  }
}

int cmd_plot(const std::string& csv_path, const std::string& out, std::string y_column, const std::string& title) {
  if (!fs::exists(csv_path)) throw ConfigError("CSV " + csv_path + " not found");
  const CsvTable t = parse_csv(read_text_file(csv_path));
  if (t.rows.empty()) throw ConfigError(csv_path + " has no data rows");
  std::vector<Series> series;
  PlotSpec spec;
  if (t.has_column("method") && t.has_column("snr_db")) {
    if (y_column.empty()) y_column = "median_abs_error";
    const auto mi = t.column("method"), xi = t.column("snr_db"), yi = t.column(y_column);
    for (const auto& row : t.rows) {
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.name == row[mi]; });
      if (it == series.end()) {
        series.push_back({row[mi], {}, {}});
        it = series.end() - 1;
      }
      it->x.push_back(cell_value(row[xi]));
      it->y.push_back(cell_value(row[yi]));
    }
    spec = {title.empty() ? y_column + " vs SNR" : title, "SNR (dB)", y_column, false};
  } else if (t.has_column("train_size")) {
    const auto xi = t.column("train_size");
    const std::vector<std::string> ys = y_column.empty() ? std::vector<std::string>{"median_error", "fitted_error"}
                                                         : std::vector<std::string>{y_column};
    for (const auto& name : ys) {
      const auto yi = t.column(name);
      Series s{name, {}, {}};
      for (const auto& row : t.rows) {
        s.x.push_back(cell_value(row[xi]));
        s.y.push_back(cell_value(row[yi]));
      }
      series.push_back(std::move(s));
    }
    spec = {title.empty() ? "learning curve" : title, "training samples", "median SO2 error", true};
  } else {
    throw ParseError(csv_path + ": unrecognized CSV (expected an SNR report or a learning curve)");
  }
  const fs::path out_path = out;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_text(out_path, line_plot_svg(series, spec));
  std::cout << "wrote " << out_path.string() << '\n';
  return 0;
}

int cmd_learning_curve(const std::string& points, const std::string& out) {
  if (!fs::exists(points)) throw ConfigError("CSV " + points + " not found");
  const CsvTable t = parse_csv(read_text_file(points));
  const auto xi = t.column("train_size"), yi = t.column("median_error");
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : t.rows) pts.emplace_back(cell_value(row[xi]), cell_value(row[yi]));
  std::sort(pts.begin(), pts.end());
  std::vector<double> n, y;
  for (const auto& [a, b] : pts) {
    n.push_back(a);
    y.push_back(b);
  }
  const LearningCurveFit fit = learning_curve(n, y);
  std::size_t rises = 0;
  for (std::size_t i = 1; i < y.size(); ++i) rises += y[i] > y[i - 1];
  const fs::path out_dir = out;
  fs::create_directories(out_dir);
  const std::string csv = learning_curve_csv(fit) + "# trend nonincreasing=" + (rises == 0 ? "1" : "0") +
                          " rises=" + std::to_string(rises) + "\n";
  write_text(out_dir / "learning_curve.csv", csv);
  std::cout << csv;
  return 0;
}

struct Kind {
  const char* name;
  int code;
};

Kind classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return {"config", 2};
  if (dynamic_cast<const ParseError*>(&e)) return {"parse", 2};
  if (dynamic_cast<const RangeError*>(&e)) return {"range", 2};
  if (dynamic_cast<const GenerationError*>(&e)) return {"generation", 2};
  if (dynamic_cast<const CorruptionError*>(&e)) return {"corruption", 2};
  return {"internal", 1};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photoacoustic oximetry simulation and evaluation toolkit", "paoxi"};
  app.require_subcommand(1);

  Common common;
  std::string phantoms, maps, split = "test", csv, y_column, title, points;
  std::vector<std::string> datasets, predictions, methods;
  bool baseline = false;
  double threshold = kDefaultSegThreshold;

  auto* gen = app.add_subcommand("generate", "generate phantoms for a seed range");
  add_common(gen, common);

  auto* sim = app.add_subcommand("simulate", "simulate absorbed energy for each phantom and wavelength");
  add_common(sim, common);
  sim->add_option("--phantoms", phantoms, "phantom directory")->required();

  auto* build = app.add_subcommand("build-dataset", "run the image pipeline and write a dataset");
  add_common(build, common);
  build->add_option("--phantoms", phantoms, "phantom directory")->required();
  build->add_option("--maps", maps, "energy map directory")->required();

  auto* unmix = app.add_subcommand("unmix", "linear unmixing baseline with error report");
  add_common(unmix, common);
  unmix->add_option("--dataset", datasets, "dataset directory (repeatable)")->required();
  unmix->add_option("--split", split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));

  auto* eval = app.add_subcommand("evaluate", "score predictions against a dataset");
  add_common(eval, common);
  eval->add_option("--dataset", datasets, "dataset directory (repeatable)")->required();
  eval->add_option("--predictions", predictions, "prediction directory, one per dataset");
  eval->add_option("--method", methods, "method name per prediction directory");
  eval->add_flag("--baseline", baseline, "also score linear unmixing");
  eval->add_option("--split", split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval->add_option("--seg-threshold", threshold, "soft segmentation threshold");

  auto* plot = app.add_subcommand("plot", "SVG line plot of a report or learning-curve CSV");
  plot->add_option("--csv", csv, "input CSV")->required();
  plot->add_option("--out", common.out, "output SVG file")->required();
  plot->add_option("--y", y_column, "column to plot");
  plot->add_option("--title", title, "plot title");

  auto* lc = app.add_subcommand("learning-curve", "fit error = a N^-b + c to (train_size, median_error) points");
  lc->add_option("--points", points, "CSV with train_size and median_error columns")->required();
  lc->add_option("--out", common.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    log_line("error", "usage", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_generate(common);
    if (*sim) return cmd_simulate(common, phantoms);
    if (*build) return cmd_build_dataset(common, phantoms, maps);
    if (*unmix) return cmd_unmix(common, datasets, split);
    if (*eval) return cmd_evaluate(common, datasets, predictions, methods, baseline, split, threshold);
    if (*plot) return cmd_plot(csv, common.out, y_column, title);
    if (*lc) return cmd_learning_curve(points, common.out);
  } catch (const std::exception& e) {
    const Kind k = classify(e);
    log_line("error", k.name, e.what());
    return k.code;
  }
  return 2;
}
