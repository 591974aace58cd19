#pragma once

// Run configuration and the glue that turns phantoms and energy maps into
// dataset samples. Shared by the CLI and the acceptance suite.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "paoxi/dataset_io.hpp"
#include "paoxi/image_pipeline.hpp"
#include "paoxi/metrics.hpp"
#include "paoxi/phantom.hpp"
#include "paoxi/transport.hpp"
#include "paoxi/unmixing.hpp"

namespace paoxi {

struct RunConfig {
  PhantomSpec phantom;
  std::uint64_t first_seed = 0;
  std::uint64_t seed_count = 10;
  TransportConfig transport;
  std::array<double, 2> wavelengths_nm{700.0, 900.0};
  int zero_rows = 10;
  std::vector<double> snr_db{25.0};
  std::uint64_t noise_seed = 0;
  bool pooled_vessel_mean = false;
  bool normalize_per_image = false;
  std::uint64_t split_seed = 0;
  std::string optics_dir;   ///< empty = shipped data

  void validate() const;
};

/// Paper-scale defaults: 128^3 grid, 10^6 packets.
RunConfig paper_preset();
/// Desk scale: 64^3 grid, 10^4 packets, 5 zeroed rows (the same 3 mm).
RunConfig desk_preset();
RunConfig preset(const std::string& name);

nlohmann::json to_json(const RunConfig& c);
/// Overlays the keys present in j onto base. Unknown keys are a ConfigError.
RunConfig apply_json(RunConfig base, const nlohmann::json& j);

/// SplitMix64 finalizer over the inputs.
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

/// Transport seed shared by both wavelengths of a phantom.
std::uint64_t transport_seed_for(const RunConfig& c, std::uint64_t phantom_seed);
std::uint64_t noise_seed_for(const RunConfig& c, std::uint64_t phantom_seed, double snr_db);

/// CRC-32 (hex) of the transport and pipeline settings that shape a sample.
std::string pipeline_hash(const RunConfig& c);

std::string sample_id_for(std::uint64_t phantom_seed);

/// Runs the image pipeline on a phantom's two energy maps.
SampleRecord make_sample(const std::string& id, std::uint64_t phantom_seed, const VoxelGrid& grid,
                         const AbsorbedEnergyMap& map_short, const AbsorbedEnergyMap& map_long, double snr_db, const RunConfig& config,
                         const std::string& optics_checksum);

EvalCase eval_case(const SampleRecord& r);

// --- intermediate files -------------------------------------------------------
//
// A phantom is <id>.phantom.json plus <id>.labels.bin, <id>.so2.bin and
// <id>.vessel_id.bin. An energy map is <id>.energy_<wl>nm.bin (float64) with
// its ledger in <id>.ledger_<wl>nm.json.

nlohmann::json to_json(const PhantomSpec& s);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j);

void write_phantom(const std::filesystem::path& dir, const std::string& id, const VoxelGrid& grid,
                   const PhantomSpec& spec);

struct PhantomFile {
  std::string id;
  PhantomSpec spec;
  VoxelGrid grid;
};

/// Throws ConfigError when the files are missing, CorruptionError when damaged.
PhantomFile read_phantom(const std::filesystem::path& dir, const std::string& id);

/// Sorted ids of every <id>.phantom.json in dir.
std::vector<std::string> list_phantoms(const std::filesystem::path& dir);

std::string energy_map_name(const std::string& id, double wavelength_nm);
std::string ledger_name(const std::string& id, double wavelength_nm);

nlohmann::json to_json(const EnergyLedger& l);
EnergyLedger ledger_from_json(const nlohmann::json& j);

void write_energy_map(const std::filesystem::path& dir, const std::string& id,
                      const TransportResult& result, std::uint64_t transport_seed);
AbsorbedEnergyMap read_energy_map(const std::filesystem::path& dir, const std::string& id,
                                  double wavelength_nm);

/// Per-pixel linear unmixing; no segmentation output.
Predictor linear_unmixing_predictor(const ExtinctionMatrix& e);

}  // namespace paoxi
