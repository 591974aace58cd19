#include "paoxi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "paoxi/checksum.hpp"
#include "paoxi/error.hpp"

namespace paoxi {

using nlohmann::json;

void RunConfig::validate() const {
  phantom.validate();
  transport.validate();
  if (seed_count < 1) throw ConfigError("seed count must be at least 1");
  if (!(wavelengths_nm[0] > 0.0 && wavelengths_nm[1] > wavelengths_nm[0])) {
    throw ConfigError("wavelengths must be positive and increasing");
  }
  if (zero_rows < 0 || zero_rows >= phantom.grid_dim) throw ConfigError("zero_rows must be in [0, grid)");
  if (snr_db.empty()) throw ConfigError("at least one SNR level is required");
  for (double s : snr_db) {
    if (std::isnan(s) || s == -INFINITY) throw ConfigError("SNR levels must be finite or +inf");
  }
  const auto extent = phantom.extent_cm;
  SourceSpec::centered(extent).validate(extent, extent);
}

RunConfig paper_preset() { return RunConfig{}; }

RunConfig desk_preset() {
  RunConfig c;
  c.phantom.grid_dim = 64;
  c.transport.n_packets = 10'000;
  c.zero_rows = 5;
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

json to_json(const RunConfig& c) {
  json snr = json::array();
  for (double s : c.snr_db) snr.push_back(std::isinf(s) ? json("inf") : json(s));
  return json{
      {"phantom",
       {{"grid_dim", c.phantom.grid_dim},
        {"extent_cm", c.phantom.extent_cm},
        {"n_vessels", c.phantom.n_vessels ? json(*c.phantom.n_vessels) : json(nullptr)},
        {"diameter_range_cm", c.phantom.diameter_range_cm},
        {"so2_range", c.phantom.so2_range},
        {"epidermis_voxels", c.phantom.epidermis_voxels},
        {"dermis_voxels", c.phantom.dermis_voxels}}},
      {"seeds", {{"first", c.first_seed}, {"count", c.seed_count}}},
      {"transport",
       {{"n_packets", c.transport.n_packets},
        {"seed", c.transport.rng_seed},
        {"roulette_threshold", c.transport.roulette_threshold},
        {"roulette_survival", c.transport.roulette_survival},
        {"max_steps", c.transport.max_steps},
        {"specular_reflection", c.transport.specular_reflection},
        {"workers", c.transport.workers}}},
      {"wavelengths_nm", c.wavelengths_nm},
      {"pipeline",
       {{"zero_rows", c.zero_rows},
        {"snr_db", snr},
        {"noise_seed", c.noise_seed},
        {"pooled_vessel_mean", c.pooled_vessel_mean},
        {"normalize_per_image", c.normalize_per_image}}},
      {"split_seed", c.split_seed},
      {"optics_dir", c.optics_dir}};
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown config key '" + where + "." + k + "'");
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double snr_from_json(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return INFINITY;
    throw ConfigError("SNR must be a number or \"inf\"");
  }
  return v.get<double>();
}

}  // namespace

RunConfig apply_json(RunConfig c, const json& j) {
  try {
    // "preset" is read by the CLI; "invocation" is provenance in config snapshots.
    check_keys(j,
               {"phantom", "seeds", "transport", "wavelengths_nm", "pipeline", "split_seed", "optics_dir",
                "preset", "invocation"},
               "config");
    if (j.contains("phantom")) {
      const auto& p = j["phantom"];
      check_keys(p, {"grid_dim", "extent_cm", "n_vessels", "diameter_range_cm", "so2_range",
                     "epidermis_voxels", "dermis_voxels"},
                 "phantom");
      take(p, "grid_dim", c.phantom.grid_dim);
      take(p, "extent_cm", c.phantom.extent_cm);
      if (p.contains("n_vessels")) {
        c.phantom.n_vessels = p["n_vessels"].is_null() ? std::nullopt : std::optional<int>(p["n_vessels"].get<int>());
      }
      take(p, "diameter_range_cm", c.phantom.diameter_range_cm);
      take(p, "so2_range", c.phantom.so2_range);
      take(p, "epidermis_voxels", c.phantom.epidermis_voxels);
      take(p, "dermis_voxels", c.phantom.dermis_voxels);
    }
    if (j.contains("seeds")) {
      check_keys(j["seeds"], {"first", "count"}, "seeds");
      take(j["seeds"], "first", c.first_seed);
      take(j["seeds"], "count", c.seed_count);
    }
    if (j.contains("transport")) {
      const auto& t = j["transport"];
      check_keys(t,
                 {"n_packets", "seed", "roulette_threshold", "roulette_survival", "max_steps", "specular_reflection",
                  "workers"},
                 "transport");
      take(t, "n_packets", c.transport.n_packets);
      take(t, "seed", c.transport.rng_seed);
      take(t, "roulette_threshold", c.transport.roulette_threshold);
      take(t, "roulette_survival", c.transport.roulette_survival);
      take(t, "max_steps", c.transport.max_steps);
      take(t, "specular_reflection", c.transport.specular_reflection);
      take(t, "workers", c.transport.workers);
    }
    take(j, "wavelengths_nm", c.wavelengths_nm);
    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      check_keys(p, {"zero_rows", "snr_db", "noise_seed", "pooled_vessel_mean", "normalize_per_image"}, "pipeline");
      take(p, "zero_rows", c.zero_rows);
      if (p.contains("snr_db")) {
        c.snr_db.clear();
        for (const auto& s : p["snr_db"]) c.snr_db.push_back(snr_from_json(s));
      }
      take(p, "noise_seed", c.noise_seed);
      take(p, "pooled_vessel_mean", c.pooled_vessel_mean);
      take(p, "normalize_per_image", c.normalize_per_image);
    }
    take(j, "split_seed", c.split_seed);
    take(j, "optics_dir", c.optics_dir);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("bad config value: ") + ex.what());
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

std::uint64_t transport_seed_for(const RunConfig& c, std::uint64_t phantom_seed) {
  return derive_seed(c.transport.rng_seed, phantom_seed, 1);
}

std::uint64_t noise_seed_for(const RunConfig& c, std::uint64_t phantom_seed, double snr_db) {
  const auto snr_key =
      static_cast<std::uint64_t>(std::isinf(snr_db) ? 1'000'000 : std::llround(snr_db * 1000.0));
  return derive_seed(c.noise_seed, phantom_seed, snr_key);
}

std::string pipeline_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("seeds");
  j.erase("optics_dir");
  j["transport"].erase("workers");
  return to_hex(crc32(j.dump()));
}

std::string sample_id_for(std::uint64_t phantom_seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(phantom_seed));
  return buf;
}

SampleRecord make_sample(const std::string& id, std::uint64_t phantom_seed, const VoxelGrid& grid,
                         const AbsorbedEnergyMap& map_short, const AbsorbedEnergyMap& map_long, double snr_db, const RunConfig& config,
                         const std::string& optics_checksum) {
  const GroundTruthSlices gt = ground_truth_slices(grid);
  PipelineConfig pc;
  pc.zero_rows = config.zero_rows;
  pc.normalize_per_image = config.normalize_per_image;
  pc.noise.target_snr_db = snr_db;
  pc.noise.pooled_vessel_mean = config.pooled_vessel_mean;
  pc.noise.rng_seed = noise_seed_for(config, phantom_seed, snr_db);
  const PAImagePair pair = process_pair(map_short, map_long, gt.seg_mask, pc);

  SampleRecord r;
  r.sample_id = id;
  r.pa700 = to_float(pair.short_wl.pixels);
  r.pa900 = to_float(pair.long_wl.pixels);
  r.seg_gt = gt.seg_mask;
  r.so2_gt = gt.so2_map;
  r.metadata.phantom_seed = phantom_seed;
  r.metadata.vessels = grid.vessels();
  r.metadata.snr_db = snr_db;
  r.metadata.noise_seed = pc.noise.rng_seed;
  r.metadata.pipeline_hash = pipeline_hash(config);
  r.metadata.optics_checksum = optics_checksum;
  r.metadata.n_packets = config.transport.n_packets;
  r.metadata.transport_seed = transport_seed_for(config, phantom_seed);
  r.metadata.normalized_all_zero = pair.all_zero;
  return r;
}

EvalCase eval_case(const SampleRecord& r) {
  return {to_double(r.pa700), to_double(r.pa900), r.so2_gt, r.seg_gt};
}

Predictor linear_unmixing_predictor(const ExtinctionMatrix& e) {
  return [e](const EvalCase& c) {
    SO2Map m = unmix_image(c.pa_short, c.pa_long, e);
    Prediction p;
    p.so2 = std::move(m.so2);
    p.valid = std::move(m.valid);
    p.so2_raw = std::move(m.raw);
    return p;
  };
}

// --- intermediate files -------------------------------------------------------

json to_json(const PhantomSpec& s) {
  return json{{"grid_dim", s.grid_dim},
              {"extent_cm", s.extent_cm},
              {"n_vessels", s.n_vessels ? json(*s.n_vessels) : json(nullptr)},
              {"diameter_range_cm", s.diameter_range_cm},
              {"so2_range", s.so2_range},
              {"epidermis_voxels", s.epidermis_voxels},
              {"dermis_voxels", s.dermis_voxels},
              {"rng_seed", s.rng_seed}};
}

PhantomSpec phantom_spec_from_json(const json& j) {
  PhantomSpec s;
  s.grid_dim = j.at("grid_dim").get<int>();
  s.extent_cm = j.at("extent_cm").get<double>();
  if (!j.at("n_vessels").is_null()) s.n_vessels = j.at("n_vessels").get<int>();
  s.diameter_range_cm = j.at("diameter_range_cm").get<std::array<double, 2>>();
  s.so2_range = j.at("so2_range").get<std::array<double, 2>>();
  s.epidermis_voxels = j.at("epidermis_voxels").get<int>();
  s.dermis_voxels = j.at("dermis_voxels").get<int>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return s;
}

namespace {

void write_json_file(const std::filesystem::path& path, const json& j) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("missing file " + path.string());
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string wavelength_tag(double wl) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gnm", wl);
  return buf;
}

}  // namespace

void write_phantom(const std::filesystem::path& dir, const std::string& id, const VoxelGrid& grid,
                   const PhantomSpec& spec) {
  std::filesystem::create_directories(dir);
  Volume<std::uint8_t> labels(grid.dims());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(grid.labels()[i]);
  json vessels = json::array();
  for (const auto& c : grid.vessels()) vessels.push_back(to_json(c));
  const json j{{"id", id},
               {"spec", to_json(spec)},
               {"pitch_cm", grid.pitch()},
               {"dims", {grid.dims().nx, grid.dims().ny, grid.dims().nz}},
               {"vessels", vessels},
               {"files",
                {{"labels", to_hex(write_volume(dir / (id + ".labels.bin"), labels))},
                 {"so2", to_hex(write_volume(dir / (id + ".so2.bin"), grid.so2()))},
                 {"vessel_id", to_hex(write_volume(dir / (id + ".vessel_id.bin"), grid.vessel_id()))}}}};
  write_json_file(dir / (id + ".phantom.json"), j);
}

PhantomFile read_phantom(const std::filesystem::path& dir, const std::string& id) {
  const json j = read_json_file(dir / (id + ".phantom.json"));
  try {
    const PhantomSpec spec = phantom_spec_from_json(j.at("spec"));
    const auto dims = j.at("dims").get<std::array<int, 3>>();
    PhantomFile f{id, spec,
                  VoxelGrid(Dims{dims[0], dims[1], dims[2]}, j.at("pitch_cm").get<double>(),
                            spec.breast_top_index())};
    f.grid.set_epidermis_layers(f.spec.epidermis_voxels);
    const auto check = [&](const char* field) {
      const auto path = dir / (id + "." + field + ".bin");
      if (file_crc32_hex(path) != j.at("files").at(field).get<std::string>()) {
        throw CorruptionError(path.string() + ": checksum does not match " + id + ".phantom.json");
      }
      return path;
    };
    const auto labels = read_volume_u8(check("labels"));
    auto so2 = read_volume_f32(check("so2"));
    auto ids = read_volume_u8(check("vessel_id"));
    if (!(labels.dims() == f.grid.dims()) || !(so2.dims() == f.grid.dims()) ||
        !(ids.dims() == f.grid.dims())) {
      throw CorruptionError(id + ": phantom volumes disagree with the recorded dims");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] > static_cast<std::uint8_t>(TissueType::kBlood)) {
        throw CorruptionError(id + ": unknown tissue label");
      }
      f.grid.labels()[i] = static_cast<TissueType>(labels[i]);
    }
    f.grid.so2() = std::move(so2);
    f.grid.vessel_id() = std::move(ids);
    for (const auto& v : j.at("vessels")) f.grid.vessels().push_back(cylinder_from_json(v));
    return f;
  } catch (const json::exception& e) {
    throw ParseError(id + ".phantom.json: " + e.what());
  }
}

std::vector<std::string> list_phantoms(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("phantom directory " + dir.string() + " does not exist");
  std::vector<std::string> ids;
  const std::string suffix = ".phantom.json";
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string energy_map_name(const std::string& id, double wl) {
  return id + ".energy_" + wavelength_tag(wl) + ".bin";
}

std::string ledger_name(const std::string& id, double wl) {
  return id + ".ledger_" + wavelength_tag(wl) + ".json";
}

json to_json(const EnergyLedger& l) {
  return json{{"n_packets", l.n_packets},
              {"launched", l.launched},
              {"deposited", l.deposited},
              {"escaped", l.escaped},
              {"roulette_killed", l.roulette_killed},
              {"roulette_amplified", l.roulette_amplified},
              {"step_capped", l.step_capped},
              {"packets_escaped", l.packets_escaped},
              {"packets_absorbed", l.packets_absorbed},
              {"packets_killed", l.packets_killed},
              {"packets_capped", l.packets_capped},
              {"interactions", l.interactions},
              {"relative_closure_error", l.relative_closure_error()}};
}

EnergyLedger ledger_from_json(const json& j) {
  EnergyLedger l;
  l.n_packets = j.at("n_packets").get<std::uint64_t>();
  l.launched = j.at("launched").get<double>();
  l.deposited = j.at("deposited").get<double>();
  l.escaped = j.at("escaped").get<double>();
  l.roulette_killed = j.at("roulette_killed").get<double>();
  l.roulette_amplified = j.at("roulette_amplified").get<double>();
  l.step_capped = j.at("step_capped").get<double>();
  l.packets_escaped = j.at("packets_escaped").get<std::uint64_t>();
  l.packets_absorbed = j.at("packets_absorbed").get<std::uint64_t>();
  l.packets_killed = j.at("packets_killed").get<std::uint64_t>();
  l.packets_capped = j.at("packets_capped").get<std::uint64_t>();
  l.interactions = j.at("interactions").get<std::uint64_t>();
  return l;
}

void write_energy_map(const std::filesystem::path& dir, const std::string& id, const TransportResult& r,
                      std::uint64_t transport_seed) {
  std::filesystem::create_directories(dir);
  const double wl = r.map.wavelength_nm;
  const auto crc = write_volume(dir / energy_map_name(id, wl), r.map.energy);
  json j = to_json(r.ledger);
  j["id"] = id;
  j["wavelength_nm"] = wl;
  j["pitch_cm"] = r.map.pitch_cm;
  j["transport_seed"] = transport_seed;
  j["energy_crc32"] = to_hex(crc);
  write_json_file(dir / ledger_name(id, wl), j);
}

AbsorbedEnergyMap read_energy_map(const std::filesystem::path& dir, const std::string& id, double wl) {
  const json j = read_json_file(dir / ledger_name(id, wl));
  const auto path = dir / energy_map_name(id, wl);
  if (!std::filesystem::exists(path)) throw ConfigError("missing energy map " + path.string());
  try {
    if (file_crc32_hex(path) != j.at("energy_crc32").get<std::string>()) {
      throw CorruptionError(path.string() + ": checksum does not match its ledger");
    }
    AbsorbedEnergyMap m;
    m.energy = read_volume_f64(path);
    m.pitch_cm = j.at("pitch_cm").get<double>();
    m.wavelength_nm = wl;
    m.n_packets = j.at("n_packets").get<std::uint64_t>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(ledger_name(id, wl) + ": " + e.what());
  }
}

}  // namespace paoxi
