#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "paoxi/error.hpp"
#include "paoxi/phantom.hpp"
#include "paoxi/transport.hpp"

using namespace paoxi;

namespace {

std::vector<double> layer_totals(const Volume<double>& e) {
  const auto d = e.dims();
  std::vector<double> out(d.nz, 0.0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) out[z] += e(x, y, z);
  return out;
}

TransportConfig cfg(std::uint64_t n, std::uint64_t seed = 1) {
  TransportConfig c;
  c.n_packets = n;
  c.rng_seed = seed;
  return c;
}

const OpticsDb& db() {
  static const OpticsDb d = OpticsDb::load(PAOXI_OPTICS_DIR);
  return d;
}

}  // namespace

TEST_CASE("launch positions fill the aperture uniformly") {
  const auto src = SourceSpec::centered(3.8);
  const int n = 20000;
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = launch_photon(src, i, 3);
    REQUIRE(p.position.x >= 0.1);
    REQUIRE(p.position.x <= 3.7);
    REQUIRE(std::abs(p.position.y - 1.9) <= 0.075);
    CHECK(p.position.z == 0.0);
    CHECK(p.direction == Vec3{0, 0, 1});
    CHECK(p.weight_q == kWeightOne);
    sx += p.position.x;
    sy += p.position.y;
  }
  CHECK(std::abs(sx / n - 1.9) < 3.0 * 3.6 / std::sqrt(12.0 * n));
  CHECK(std::abs(sy / n - 1.9) < 3.0 * 0.15 / std::sqrt(12.0 * n));
}

TEST_CASE("HG sampling reproduces the mean cosine") {
  for (double g : {-0.5, 0.0, 0.5, 0.9, 0.99}) {
    CounterStream rng(5, StreamDomain::kGeneric, 1);
    const int n = 400000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double c = sample_hg_cos(g, rng.uniform());
      REQUIRE(c >= -1.0);
      REQUIRE(c <= 1.0);
      s += c;
      s2 += c * c;
    }
    // Second moment of HG is (1 + 2 g^2) / 3.
    CHECK(std::abs(s / n - g) < 5e-3);
    CHECK(std::abs(s2 / n - (1 + 2 * g * g) / 3) < 5e-3);
  }
}

TEST_CASE("scattering rotations preserve the polar angle") {
  CounterStream rng(8, StreamDomain::kGeneric, 2);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 d = normalized(Vec3{rng.normal(), rng.normal(), rng.normal()});
    const double ct = 2 * rng.uniform() - 1;
    const Vec3 out = scatter_direction(d, ct, 2 * std::numbers::pi * rng.uniform());
    CHECK(std::abs(norm(out) - 1.0) < 1e-12);
    CHECK(dot(out, d) == doctest::Approx(ct).epsilon(1e-9));
  }
  CHECK(scatter_direction({0, 0, 1}, 1.0, 0.3) == Vec3{0, 0, 1});
  const Vec3 d = normalized(Vec3{0.3, -0.2, 0.9});
  const Vec3 o = scatter_direction(d, 1.0, 1.1);
  CHECK(norm(o - d) < 1e-12);
}

TEST_CASE("roulette is unbiased") {
  CounterStream rng(13, StreamDomain::kGeneric, 3);
  const int n = 400000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += roulette(1e-5, 1e-4, 0.1, rng);
  // Each draw is 1e-4 with p = 0.1; relative std of the mean is 3/sqrt(n).
  CHECK(std::abs(sum / n - 1e-5) < 4 * 1e-5 * 3.0 / std::sqrt(n));
  CHECK(roulette(0.5, 1e-4, 0.1, rng) == 0.5);
}

TEST_CASE("pure absorber follows Beer-Lambert") {
  for (double mu_a : {0.5, 1.0, 5.0}) {
    const auto m = OpticalMedium::uniform(Dims::cube(32), 3.8 / 32, {mu_a, 0.0, 0.0, 1.0});
    const auto r = simulate(m, SourceSpec::centered(3.8), cfg(100000));
    const double k = oracle::fitted_decay_rate(layer_totals(r.map.energy), 3.8 / 32, 1.0);
    CHECK(k == doctest::Approx(mu_a).epsilon(0.03));
    CHECK(r.ledger.relative_closure_error() == 0.0);
  }
}

TEST_CASE("two stacked absorbers each follow their own decay") {
  const double h = 3.8 / 32;
  OpticalMedium m(Dims::cube(32), h, {{0.5, 0, 0, 1}, {2.0, 0, 0, 1}});
  for (int z = 16; z < 32; ++z)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) m.index()(x, y, z) = 1;
  const auto r = simulate(m, SourceSpec::centered(3.8), cfg(200000));
  const auto layers = layer_totals(r.map.energy);
  const std::vector<double> top(layers.begin(), layers.begin() + 16);
  const std::vector<double> bottom(layers.begin() + 16, layers.end());
  CHECK(oracle::fitted_decay_rate(top, h, 1.0) == doctest::Approx(0.5).epsilon(0.03));
  CHECK(oracle::fitted_decay_rate(bottom, h, 1.0) == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("non-absorbing medium deposits nothing") {
  const auto m = OpticalMedium::uniform(Dims::cube(20), 0.2, {0.0, 10.0, 0.8, 1.0});
  const auto r = simulate(m, SourceSpec::centered(4.0), cfg(2000));
  CHECK(r.ledger.deposited == 0.0);
  CHECK(r.ledger.escaped == doctest::Approx(2000.0));
  CHECK(r.tally.packets_escaped == 2000);
}

TEST_CASE("forward-peaked scattering with g = 1 behaves like a pure absorber") {
  const auto m = OpticalMedium::uniform(Dims::cube(32), 3.8 / 32, {1.0, 20.0, 1.0, 1.0});
  const auto r = simulate(m, SourceSpec::centered(3.8), cfg(50000));
  TransportConfig c = cfg(50000);
  c.roulette_threshold = 0;
  const auto r0 = simulate(m, SourceSpec::centered(3.8), c);
  const double k = oracle::fitted_decay_rate(layer_totals(r0.map.energy), 3.8 / 32, 1.0);
  CHECK(k == doctest::Approx(1.0).epsilon(0.03));
  CHECK(r.tally.launched == r0.tally.launched);
}

TEST_CASE("energy ledger closes exactly") {
  const auto g = generate_phantom([] {
    PhantomSpec s;
    s.grid_dim = 32;
    s.rng_seed = 2;
    return s;
  }());
  for (double thr : {0.0, 1e-4}) {
    TransportConfig c = cfg(3000, 4);
    c.roulette_threshold = thr;
    const auto r = simulate(g, db(), 700.0, c);
    const auto& t = r.tally;
    CHECK(t.launched == 3000 * kWeightOne);
    CHECK(t.launched ==
          t.deposited + t.escaped + t.roulette_killed - t.roulette_amplified + t.step_capped);
    CHECK(r.ledger.relative_closure_error() < 1e-12);
    CHECK(t.packets_escaped + t.packets_absorbed + t.packets_killed + t.packets_capped == 3000);
    double sum = 0;
    for (double e : r.map.energy.storage()) sum += e;
    CHECK(sum == doctest::Approx(r.ledger.deposited).epsilon(1e-12));
    if (thr == 0.0) {
      CHECK(t.roulette_killed == 0);
      CHECK(t.roulette_amplified == 0);
    }
  }
}

TEST_CASE("step cap terminates packets and is accounted") {
  const auto m = OpticalMedium::uniform(Dims::cube(20), 0.2, {0.01, 100.0, 0.0, 1.0});
  TransportConfig c = cfg(200);
  c.max_steps = 5;
  const auto r = simulate(m, SourceSpec::centered(4.0), c);
  CHECK(r.tally.packets_capped > 0);
  CHECK(r.tally.launched == r.tally.deposited + r.tally.escaped + r.tally.roulette_killed -
                                r.tally.roulette_amplified + r.tally.step_capped);
}

TEST_CASE("results do not depend on the worker count") {
  PhantomSpec s;
  s.grid_dim = 32;
  s.rng_seed = 7;
  const auto g = generate_phantom(s);
  const auto m = OpticalMedium::from_phantom(g, db(), 700.0);
  const auto src = SourceSpec::centered(3.8);
  TransportConfig c = cfg(4000, 7);
  const auto ref = reference::simulate_serial(m, src, c);
  for (int w : {1, 2, 8}) {
    c.workers = w;
    const auto r = simulate(m, src, c);
    CHECK(r.map.energy == ref.map.energy);
    CHECK(r.tally == ref.tally);
  }
  c.rng_seed = 8;
  CHECK(!(simulate(m, src, c).map.energy == ref.map.energy));
}

TEST_CASE("700 nm light penetrates breast tissue less than 900 nm") {
  PhantomSpec s;
  s.grid_dim = 32;
  s.n_vessels = 1;
  s.rng_seed = 1;
  auto g = make_layered_grid(s);
  double deep[2];
  int k = 0;
  for (double wl : {700.0, 900.0}) {
    const auto r = simulate(g, db(), wl, cfg(20000, 3));
    const auto layers = layer_totals(r.map.energy);
    double below = 0, total = 0;
    for (int z = 0; z < 32; ++z) {
      total += layers[z];
      if (z >= 10) below += layers[z];
    }
    deep[k++] = below / total;
  }
  CHECK(deep[0] < deep[1]);
}

TEST_CASE("phantom media index one entry per vessel") {
  PhantomSpec s;
  s.grid_dim = 32;
  s.rng_seed = 3;
  s.n_vessels = 3;
  const auto g = generate_phantom(s);
  const auto m = OpticalMedium::from_phantom(g, db(), 900.0);
  CHECK(m.table().size() == 6);
  for (const auto& v : g.vessels())
    CHECK(m.table()[2 + v.vessel_id].mu_a == doctest::Approx(db().blood_mu_a(v.so2, 900.0)));
  CHECK(m.at(0, 0, 0) == db().tissue_properties(TissueClass::of(TissueType::kEpidermis), 900.0));
}

TEST_CASE("invalid transport inputs are rejected") {
  const auto m = OpticalMedium::uniform(Dims::cube(8), 0.1, {1, 1, 0.9, 1.4});
  TransportConfig c = cfg(0);
  CHECK_THROWS_AS(simulate(m, SourceSpec::centered(0.8), c), ConfigError);
  c = cfg(10);
  c.roulette_survival = 1.5;
  CHECK_THROWS_AS(simulate(m, SourceSpec::centered(0.8), c), ConfigError);
  // A 3.6 cm aperture does not fit on a 0.8 cm face.
  CHECK_THROWS_AS(simulate(m, SourceSpec::centered(3.8), cfg(10)), ConfigError);
  const auto bad = OpticalMedium::uniform(Dims::cube(8), 0.1, {-1, 1, 0.9, 1.4});
  CHECK_THROWS_AS(simulate(bad, SourceSpec{0.5, 0.1, 0.4, 0.4}, cfg(10)), ConfigError);
}

TEST_CASE("specular reflection removes the Fresnel fraction at entry") {
  const auto m = OpticalMedium::uniform(Dims::cube(16), 0.25, {1.0, 0.0, 0.0, 1.4});
  TransportConfig c = cfg(2000, 3);
  const auto plain = simulate(m, SourceSpec::centered(4.0), c);
  c.specular_reflection = true;
  const auto spec = simulate(m, SourceSpec::centered(4.0), c);
  const double r = std::pow(0.4 / 2.4, 2);
  CHECK(spec.ledger.deposited == doctest::Approx((1 - r) * plain.ledger.deposited).epsilon(1e-8));
  CHECK(spec.ledger.escaped == doctest::Approx(plain.ledger.escaped + r * plain.ledger.deposited).epsilon(1e-8));
  const auto& t = spec.tally;
  CHECK(t.launched == t.deposited + t.escaped + t.roulette_killed - t.roulette_amplified + t.step_capped);
}
