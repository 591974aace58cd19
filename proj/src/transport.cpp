#include "paoxi/transport.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "paoxi/error.hpp"
#include "paoxi/phantom.hpp"

namespace paoxi {

namespace detail {

void transport_invariant_failure(const char* what, std::uint64_t step) {
  std::ostringstream ss;
  ss << "transport invariant violated: " << what << " at step " << step;
  throw std::logic_error(ss.str());
}

}  // namespace detail

void SourceSpec::validate(double extent_x_cm, double extent_y_cm) const {
  if (!(aperture_x_cm > 0.0 && aperture_y_cm > 0.0)) throw ConfigError("aperture must be non-empty");
  const double eps = 1e-12;
  if (center_x_cm - aperture_x_cm / 2 < -eps || center_x_cm + aperture_x_cm / 2 > extent_x_cm + eps ||
      center_y_cm - aperture_y_cm / 2 < -eps || center_y_cm + aperture_y_cm / 2 > extent_y_cm + eps) {
    throw ConfigError("beam aperture does not fit on the top face");
  }
}

void TransportConfig::validate() const {
  if (n_packets < 1) throw ConfigError("n_packets must be at least 1");
  if (!(roulette_survival > 0.0 && roulette_survival < 1.0)) {
    throw ConfigError("roulette survival must lie in (0, 1)");
  }
  if (!(roulette_threshold >= 0.0 && roulette_threshold < 1.0)) {
    throw ConfigError("roulette threshold must lie in [0, 1)");
  }
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (n_packets > (std::uint64_t{1} << 30)) throw ConfigError("n_packets exceeds the tally range");
}

OpticalMedium::OpticalMedium(Dims dims, double pitch_cm, std::vector<OpticalProperties> table)
    : pitch_(pitch_cm), table_(std::move(table)), index_(dims, 0) {}

OpticalMedium OpticalMedium::uniform(Dims dims, double pitch_cm, const OpticalProperties& props) {
  return OpticalMedium(dims, pitch_cm, {props});
}

OpticalMedium OpticalMedium::from_phantom(const VoxelGrid& grid, const OpticsDb& db,
                                          double wavelength_nm, double c_thb) {
  std::vector<OpticalProperties> table;
  table.push_back(db.tissue_properties(TissueClass::of(TissueType::kEpidermis), wavelength_nm));
  table.push_back(db.tissue_properties(TissueClass::of(TissueType::kDermis), wavelength_nm));
  table.push_back(db.tissue_properties(TissueClass::of(TissueType::kBreast), wavelength_nm));
  // Entry 2 + id holds vessel id; ids without a cylinder fall back to breast.
  int max_id = 0;
  for (const auto& c : grid.vessels()) max_id = std::max(max_id, c.vessel_id);
  table.resize(3 + max_id, table[2]);
  for (const auto& c : grid.vessels()) {
    table[2 + c.vessel_id] = db.tissue_properties(TissueClass::blood(c.so2, c_thb), wavelength_nm);
  }
  OpticalMedium m(grid.dims(), grid.pitch(), std::move(table));
  const auto& labels = grid.labels().storage();
  const auto& ids = grid.vessel_id().storage();
  auto& out = m.index().storage();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = labels[i] == TissueType::kBlood ? static_cast<std::uint16_t>(2 + ids[i])
                                              : static_cast<std::uint16_t>(labels[i]);
  }
  m.validate();
  return m;
}

void OpticalMedium::validate() const {
  if (!(pitch_ > 0.0)) throw ConfigError("voxel pitch must be positive");
  if (table_.empty()) throw ConfigError("empty optical property table");
  for (const auto& p : table_) p.validate();
  for (auto i : index_.storage()) {
    if (i >= table_.size()) throw ConfigError("medium index outside the property table");
  }
}

EnergyTally& EnergyTally::operator+=(const EnergyTally& o) {
  launched += o.launched;
  deposited += o.deposited;
  escaped += o.escaped;
  roulette_killed += o.roulette_killed;
  roulette_amplified += o.roulette_amplified;
  step_capped += o.step_capped;
  packets_escaped += o.packets_escaped;
  packets_absorbed += o.packets_absorbed;
  packets_killed += o.packets_killed;
  packets_capped += o.packets_capped;
  interactions += o.interactions;
  return *this;
}

double EnergyLedger::relative_closure_error() const {
  const double accounted = deposited + escaped + net_roulette_delta() + step_capped;
  return launched > 0.0 ? std::abs(launched - accounted) / launched : 0.0;
}

EnergyLedger EnergyLedger::from_tally(const EnergyTally& t, std::uint64_t n_packets) {
  EnergyLedger l;
  l.n_packets = n_packets;
  l.launched = weight_to_double(t.launched);
  l.deposited = weight_to_double(t.deposited);
  l.escaped = weight_to_double(t.escaped);
  l.roulette_killed = weight_to_double(t.roulette_killed);
  l.roulette_amplified = weight_to_double(t.roulette_amplified);
  l.step_capped = weight_to_double(t.step_capped);
  l.packets_escaped = t.packets_escaped;
  l.packets_absorbed = t.packets_absorbed;
  l.packets_killed = t.packets_killed;
  l.packets_capped = t.packets_capped;
  l.interactions = t.interactions;
  return l;
}

namespace {

PhotonPacket launch_from(const SourceSpec& s, CounterStream& rng) {
  PhotonPacket p;
  const double ux = rng.uniform();
  const double uy = rng.uniform();
  p.position = {s.center_x_cm + (ux - 0.5) * s.aperture_x_cm,
                s.center_y_cm + (uy - 0.5) * s.aperture_y_cm, 0.0};
  p.direction = {0.0, 0.0, 1.0};
  p.weight_q = kWeightOne;
  return p;
}

void place_in_medium(PhotonPacket& p, const OpticalMedium& m) {
  const Dims d = m.dims();
  const double h = m.pitch();
  p.ix = std::clamp(static_cast<int>(std::floor(p.position.x / h)), 0, d.nx - 1);
  p.iy = std::clamp(static_cast<int>(std::floor(p.position.y / h)), 0, d.ny - 1);
  p.iz = 0;
}

template <class Sink>
void run_packet(std::uint64_t i, const OpticalMedium& medium, const SourceSpec& source,
                const TransportConfig& config, Sink& sink, EnergyTally& tally) {
  CounterStream rng = packet_stream(config.rng_seed, i);
  PhotonPacket p = launch_from(source, rng);
  place_in_medium(p, medium);
  tally.launched += p.weight_q;
  if (config.specular_reflection) {
    const double n = medium.at(p.ix, p.iy, 0).n;
    const double r = (n - 1.0) / (n + 1.0);
    const auto q = static_cast<std::int64_t>(std::llround(r * r * static_cast<double>(p.weight_q)));
    tally.escaped += q;
    p.weight_q -= q;
  }
  propagate(p, medium, config, rng, sink, tally);
}

TransportResult finish(const OpticalMedium& medium, const TransportConfig& config,
                       const std::vector<std::int64_t>& quanta, const EnergyTally& tally) {
  TransportResult r;
  r.map.energy = Volume<double>(medium.dims(), 0.0);
  auto& e = r.map.energy.storage();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = weight_to_double(quanta[i]);
  r.map.pitch_cm = medium.pitch();
  r.map.n_packets = config.n_packets;
  r.tally = tally;
  r.ledger = EnergyLedger::from_tally(tally, config.n_packets);
  return r;
}

void check_inputs(const OpticalMedium& medium, const SourceSpec& source,
                  const TransportConfig& config) {
  config.validate();
  medium.validate();
  const Dims d = medium.dims();
  source.validate(d.nx * medium.pitch(), d.ny * medium.pitch());
}

}  // namespace

PhotonPacket launch_photon(const SourceSpec& source, std::uint64_t packet_index,
                           std::uint64_t seed) {
  CounterStream rng = packet_stream(seed, packet_index);
  return launch_from(source, rng);
}

double sample_hg_cos(double g, double xi) {
  if (std::abs(g) < 1e-9) return 2.0 * xi - 1.0;
  const double t = (1.0 - g * g) / (1.0 - g + 2.0 * g * xi);
  const double c = (1.0 + g * g - t * t) / (2.0 * g);
  return std::clamp(c, -1.0, 1.0);
}

Vec3 scatter_direction(const Vec3& d, double cos_theta, double phi) {
  const double st = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  Vec3 out;
  if (std::abs(d.z) > 0.99999) {
    out = {st * cp, st * sp, (d.z > 0.0 ? 1.0 : -1.0) * cos_theta};
  } else {
    const double tmp = std::sqrt(1.0 - d.z * d.z);
    out = {st * (d.x * d.z * cp - d.y * sp) / tmp + d.x * cos_theta,
           st * (d.y * d.z * cp + d.x * sp) / tmp + d.y * cos_theta,
           -st * cp * tmp + d.z * cos_theta};
  }
  return normalized(out);
}

Vec3 scatter_hg(const Vec3& direction, double g, CounterStream& rng) {
  const double ct = sample_hg_cos(g, rng.uniform());
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return scatter_direction(direction, ct, phi);
}

double roulette(double weight, double threshold, double survival, CounterStream& rng) {
  if (weight >= threshold) return weight;
  if (survival >= 1.0) return weight;
  return rng.uniform() < survival ? weight / survival : 0.0;
}

TransportResult simulate(const OpticalMedium& medium, const SourceSpec& source,
                         const TransportConfig& config) {
  check_inputs(medium, source, config);
  const std::size_t nvox = medium.dims().count();
  const int workers = config.workers > 0 ? config.workers : omp_get_max_threads();
  const auto n = static_cast<std::int64_t>(config.n_packets);

  std::vector<std::int64_t> total(nvox, 0);
  EnergyTally tally;
#pragma omp parallel num_threads(workers)
  {
    QuantaBuffer local(nvox);
    EnergyTally t;
#pragma omp for schedule(dynamic, 64) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      run_packet(static_cast<std::uint64_t>(i), medium, source, config, local, t);
    }
    // Integer sums commute, so merge order cannot change the result.
#pragma omp critical(paoxi_transport_merge)
    {
      for (std::size_t v = 0; v < nvox; ++v) total[v] += local.quanta[v];
      tally += t;
    }
  }
  return finish(medium, config, total, tally);
}

TransportResult simulate(const VoxelGrid& grid, const OpticsDb& db, double wavelength_nm,
                         const TransportConfig& config) {
  const OpticalMedium medium = OpticalMedium::from_phantom(grid, db, wavelength_nm);
  const Dims d = grid.dims();
  TransportResult r = simulate(medium, SourceSpec::centered(d.nx * grid.pitch()), config);
  r.map.wavelength_nm = wavelength_nm;
  return r;
}

namespace reference {

TransportResult simulate_serial(const OpticalMedium& medium, const SourceSpec& source,
                                const TransportConfig& config) {
  check_inputs(medium, source, config);
  QuantaBuffer buffer(medium.dims().count());
  EnergyTally tally;
  for (std::uint64_t i = 0; i < config.n_packets; ++i) {
    run_packet(i, medium, source, config, buffer, tally);
  }
  return finish(medium, config, buffer.quanta, tally);
}

}  // namespace reference

}  // namespace paoxi
