#pragma once

// Voxelized Monte Carlo photon-packet transport.
//
// Packet weight is carried as a 32.32 fixed-point integer. Every deposit,
// escape, and roulette adjustment moves an exact integer amount, so the energy
// ledger closes exactly and per-thread tallies merge identically in any order.

#include <cstdint>
#include <vector>

#include "paoxi/grid.hpp"
#include "paoxi/optics.hpp"
#include "paoxi/rng.hpp"

namespace paoxi {

class VoxelGrid;

/// Fixed-point weight quanta per unit packet weight.
inline constexpr std::int64_t kWeightOne = std::int64_t{1} << 32;

inline double weight_to_double(std::int64_t q) { return static_cast<double>(q) / kWeightOne; }

struct PhotonPacket {
  Vec3 position;   ///< cm
  Vec3 direction;  ///< unit vector
  std::int64_t weight_q = 0;
  int ix = 0, iy = 0, iz = 0;  ///< voxel currently occupied

  double weight() const { return weight_to_double(weight_q); }
};

struct SourceSpec {
  double aperture_x_cm = 3.6;   ///< long axis
  double aperture_y_cm = 0.15;  ///< short axis
  double center_x_cm = 1.9;
  double center_y_cm = 1.9;

  /// Aperture centred on the top face of a cube of the given extent.
  static SourceSpec centered(double extent_cm) {
    return {3.6, 0.15, extent_cm / 2.0, extent_cm / 2.0};
  }
  void validate(double extent_x_cm, double extent_y_cm) const;
};

struct TransportConfig {
  std::uint64_t n_packets = 1'000'000;
  std::uint64_t rng_seed = 0;
  double roulette_threshold = 1e-4;  ///< 0 disables roulette
  double roulette_survival = 0.1;
  std::uint64_t max_steps = 1'000'000;
  int workers = 0;  ///< 0 = OpenMP default
  /// Removes the air-tissue Fresnel loss ((n-1)/(n+1))^2 at entry; it is tallied as escaped.
  bool specular_reflection = false;

  void validate() const;
};

/// Per-voxel medium index into a property table.
class OpticalMedium {
 public:
  OpticalMedium(Dims dims, double pitch_cm, std::vector<OpticalProperties> table);

  const Dims& dims() const { return index_.dims(); }
  double pitch() const { return pitch_; }
  Volume<std::uint16_t>& index() { return index_; }
  const Volume<std::uint16_t>& index() const { return index_; }
  const std::vector<OpticalProperties>& table() const { return table_; }
  const OpticalProperties& at(int x, int y, int z) const { return table_[index_(x, y, z)]; }

  /// Homogeneous medium filling the grid.
  static OpticalMedium uniform(Dims dims, double pitch_cm, const OpticalProperties& props);
  /// Builds the medium for a phantom at one wavelength (one table entry per vessel).
  static OpticalMedium from_phantom(const VoxelGrid& grid, const OpticsDb& db, double wavelength_nm,
                                    double c_thb = kDefaultTotalHemoglobin);

  void validate() const;

 private:
  double pitch_;
  std::vector<OpticalProperties> table_;
  Volume<std::uint16_t> index_;
};

enum class PacketFate { kEscaped, kAbsorbed, kRouletteKilled, kStepCapped };

/// Tallies for one or many packets, in fixed-point quanta.
struct EnergyTally {
  std::int64_t launched = 0;
  std::int64_t deposited = 0;
  std::int64_t escaped = 0;
  std::int64_t roulette_killed = 0;
  std::int64_t roulette_amplified = 0;
  std::int64_t step_capped = 0;
  std::uint64_t packets_escaped = 0;
  std::uint64_t packets_absorbed = 0;
  std::uint64_t packets_killed = 0;
  std::uint64_t packets_capped = 0;
  std::uint64_t interactions = 0;

  EnergyTally& operator+=(const EnergyTally& o);
  bool operator==(const EnergyTally&) const = default;
};

struct EnergyLedger {
  std::uint64_t n_packets = 0;
  double launched = 0.0;
  double deposited = 0.0;
  double escaped = 0.0;
  double roulette_killed = 0.0;
  double roulette_amplified = 0.0;
  double step_capped = 0.0;
  std::uint64_t packets_escaped = 0;
  std::uint64_t packets_absorbed = 0;
  std::uint64_t packets_killed = 0;
  std::uint64_t packets_capped = 0;
  std::uint64_t interactions = 0;

  /// Weight removed by roulette net of amplification.
  double net_roulette_delta() const { return roulette_killed - roulette_amplified; }
  /// launched - (deposited + escaped + net roulette + capped), relative to launched.
  double relative_closure_error() const;

  static EnergyLedger from_tally(const EnergyTally& t, std::uint64_t n_packets);
};

struct AbsorbedEnergyMap {
  Volume<double> energy;   ///< deposited packet weight per voxel
  double pitch_cm = 0.0;
  double wavelength_nm = 0.0;
  std::uint64_t n_packets = 0;
};

struct TransportResult {
  AbsorbedEnergyMap map;
  EnergyLedger ledger;
  EnergyTally tally;
};

PhotonPacket launch_photon(const SourceSpec& source, std::uint64_t packet_index,
                           std::uint64_t seed);

/// Per-packet random stream; launch consumes its first draws.
inline CounterStream packet_stream(std::uint64_t seed, std::uint64_t packet_index) {
  return CounterStream(seed, StreamDomain::kPhoton, packet_index);
}

/// HG inverse CDF for cos(theta) given a uniform draw xi.
double sample_hg_cos(double g, double xi);

/// Rotates direction by polar cos_theta and azimuth phi; result renormalized.
Vec3 scatter_direction(const Vec3& direction, double cos_theta, double phi);

Vec3 scatter_hg(const Vec3& direction, double g, CounterStream& rng);

/// Russian roulette on a real weight. Returns 0 for a killed packet.
double roulette(double weight, double threshold, double survival, CounterStream& rng);

/// Receives deposits from propagate(); Sink::deposit(std::size_t voxel, int64 quanta).
template <class Sink>
concept DepositSink = requires(Sink s, std::size_t i, std::int64_t q) { s.deposit(i, q); };

/// Fixed-point deposit buffer.
struct QuantaBuffer {
  std::vector<std::int64_t> quanta;
  explicit QuantaBuffer(std::size_t n) : quanta(n, 0) {}
  void deposit(std::size_t i, std::int64_t q) { quanta[i] += q; }
};

/// Follows one packet to termination, updating tally and sink.
template <DepositSink Sink>
PacketFate propagate(PhotonPacket& packet, const OpticalMedium& medium,
                     const TransportConfig& config, CounterStream& rng, Sink& sink,
                     EnergyTally& tally);

/// Parallel over packets; bit-identical for any worker count.
TransportResult simulate(const OpticalMedium& medium, const SourceSpec& source,
                         const TransportConfig& config);

/// Builds the medium for the phantom and runs simulate().
TransportResult simulate(const VoxelGrid& grid, const OpticsDb& db, double wavelength_nm,
                         const TransportConfig& config);

namespace reference {

/// Single-threaded packet loop with one deposit buffer.
TransportResult simulate_serial(const OpticalMedium& medium, const SourceSpec& source,
                                const TransportConfig& config);

}  // namespace reference

}  // namespace paoxi

#include "paoxi/transport_impl.hpp"
