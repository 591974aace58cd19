#pragma once

// Inline packet kernel; included from transport.hpp.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace paoxi {

namespace detail {

[[noreturn]] void transport_invariant_failure(const char* what, std::uint64_t step);

inline double boundary_distance(double pos, double dir, int index, double pitch) {
  if (dir > 0.0) return std::max(0.0, ((index + 1) * pitch - pos) / dir);
  if (dir < 0.0) return std::max(0.0, (index * pitch - pos) / dir);
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

template <DepositSink Sink>
PacketFate propagate(PhotonPacket& packet, const OpticalMedium& medium,
                     const TransportConfig& config, CounterStream& rng, Sink& sink,
                     EnergyTally& tally) {
  const Dims dims = medium.dims();
  const double h = medium.pitch();
  const auto& table = medium.table();
  const auto& index = medium.index();
  const auto threshold_q =
      static_cast<std::int64_t>(std::llround(config.roulette_threshold * kWeightOne));
  const double survival = config.roulette_survival;

  Vec3& pos = packet.position;
  Vec3& dir = packet.direction;
  std::int64_t& w = packet.weight_q;
  int& ix = packet.ix;
  int& iy = packet.iy;
  int& iz = packet.iz;

  for (std::uint64_t step = 0;; ++step) {
    if (step >= config.max_steps) {
      tally.step_capped += w;
      ++tally.packets_capped;
      return PacketFate::kStepCapped;
    }

    // Dimensionless optical depth to the next interaction, spent voxel by voxel.
    double tau = -std::log(rng.uniform());
    const OpticalProperties* props = &table[index(ix, iy, iz)];
    for (;;) {
      const double mu_t = props->mu_a + props->mu_s;
      const double tx = detail::boundary_distance(pos.x, dir.x, ix, h);
      const double ty = detail::boundary_distance(pos.y, dir.y, iy, h);
      const double tz = detail::boundary_distance(pos.z, dir.z, iz, h);
      const double db = std::min(tx, std::min(ty, tz));
      if (mu_t * db >= tau) {
        pos = pos + dir * (tau / mu_t);
        break;
      }
      tau -= mu_t * db;
      pos = pos + dir * db;
      if (db == tx) {
        ix += dir.x > 0.0 ? 1 : -1;
        pos.x = (dir.x > 0.0 ? ix : ix + 1) * h;
      } else if (db == ty) {
        iy += dir.y > 0.0 ? 1 : -1;
        pos.y = (dir.y > 0.0 ? iy : iy + 1) * h;
      } else {
        iz += dir.z > 0.0 ? 1 : -1;
        pos.z = (dir.z > 0.0 ? iz : iz + 1) * h;
      }
      if (!dims.contains(ix, iy, iz)) {
        tally.escaped += w;
        ++tally.packets_escaped;
        return PacketFate::kEscaped;
      }
      props = &table[index(ix, iy, iz)];
    }

    // Interaction: drop the absorbed fraction, then scatter the remainder.
    ++tally.interactions;
    const double mu_t = props->mu_a + props->mu_s;
    std::int64_t dq = props->mu_s == 0.0
                          ? w
                          : static_cast<std::int64_t>(
                                std::llround(static_cast<double>(w) * (props->mu_a / mu_t)));
    if (dq > w) dq = w;
    if (dq > 0) {
      sink.deposit(dims.index(ix, iy, iz), dq);
      tally.deposited += dq;
      w -= dq;
    }
    if (w == 0) {
      ++tally.packets_absorbed;
      return PacketFate::kAbsorbed;
    }

    dir = scatter_hg(dir, props->g, rng);

    if (w < threshold_q) {
      if (rng.uniform() < survival) {
        const auto boosted =
            static_cast<std::int64_t>(std::llround(static_cast<double>(w) / survival));
        tally.roulette_amplified += boosted - w;
        w = boosted;
      } else {
        tally.roulette_killed += w;
        ++tally.packets_killed;
        w = 0;
        return PacketFate::kRouletteKilled;
      }
    }

    if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z) ||
        !std::isfinite(dir.x) || !std::isfinite(dir.y) || !std::isfinite(dir.z)) {
      detail::transport_invariant_failure("non-finite packet state", step);
    }
  }
}

}  // namespace paoxi
