#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "paoxi/error.hpp"
#include "paoxi/image_pipeline.hpp"
#include "paoxi/rng.hpp"

using namespace paoxi;

namespace {

Volume<double> random_volume(Dims d, std::uint64_t seed) {
  Volume<double> v(d);
  CounterStream rng(seed, StreamDomain::kGeneric, 10);
  for (auto& x : v.storage()) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
  return v;
}

PAImagePair flat_pair(int n, double a, double b) {
  return {{Image<double>(n, n, a), 700, ImageStage::kSliced},
          {Image<double>(n, n, b), 900, ImageStage::kSliced}};
}

}  // namespace

TEST_CASE("median filter leaves a constant volume unchanged") {
  Volume<double> v(Dims::cube(9), 2.5);
  CHECK(median_filter_3d(v) == v);
}

TEST_CASE("median filter removes an isolated impulse") {
  Volume<double> v(Dims::cube(9), 0.0);
  v(4, 4, 4) = 100.0;
  v(0, 0, 0) = 100.0;
  const auto out = median_filter_3d(v);
  for (double x : out.storage()) CHECK(x == 0.0);
}

TEST_CASE("median filter agrees with the sort oracle") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dims d{7 + static_cast<int>(s % 4), 5 + static_cast<int>(s % 3), 6};
    const auto v = random_volume(d, s);
    const auto expected = oracle::median27(v);
    CHECK(median_filter_3d(v) == expected);
    CHECK(reference::median_filter_3d_sorted(v) == expected);
  }
}

TEST_CASE("centre slice is taken at ny / 2 with rows as depth") {
  Volume<double> v(Dims{4, 6, 5});
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 4; ++x) v(x, y, z) = 100 * z + 10 * y + x;
  AbsorbedEnergyMap m{v, 0.1, 700.0, 1};
  const auto img = extract_center_slice(m);
  CHECK(img.pixels.rows() == 5);
  CHECK(img.pixels.cols() == 4);
  CHECK(img.pixels(2, 3) == 233);
  CHECK(img.wavelength_nm == 700.0);
}

TEST_CASE("noise sigma gives the requested SNR exactly") {
  for (double snr : {5.0, 10.0, 17.5, 25.0}) {
    const double s = noise_sigma(0.37, snr);
    CHECK(20 * std::log10(0.37 / s) == doctest::Approx(snr).epsilon(1e-12));
  }
  CHECK(noise_sigma(1.0, std::numeric_limits<double>::infinity()) == 0.0);
  CHECK_THROWS_AS(noise_sigma(1.0, std::nan("")), ConfigError);
}

TEST_CASE("realized noise has the requested standard deviation") {
  auto pair = flat_pair(256, 1.0, 0.5);
  Mask mask(256, 256, 0);
  for (int r = 100; r < 120; ++r)
    for (int c = 0; c < 256; ++c) mask(r, c) = 1;
  const auto rz = add_noise(pair, mask, {20.0, 4, false});
  CHECK(rz.sigma_short == doctest::Approx(0.1));
  CHECK(rz.sigma_long == doctest::Approx(0.05));
  double s2 = 0;
  for (double v : pair.short_wl.pixels.storage()) s2 += (v - 1.0) * (v - 1.0);
  CHECK(std::sqrt(s2 / (256 * 256)) == doctest::Approx(0.1).epsilon(0.02));
  CHECK(pair.short_wl.stage == ImageStage::kNoisy);

  auto pooled = flat_pair(16, 1.0, 0.5);
  Mask m2(16, 16, 1);
  const auto rp = add_noise(pooled, m2, {20.0, 4, true});
  CHECK(rp.sigma_short == doctest::Approx(0.075));
  CHECK(rp.sigma_long == rp.sigma_short);
}

TEST_CASE("noise realizations are seeded") {
  Mask m(8, 8, 1);
  auto a = flat_pair(8, 1, 1), b = flat_pair(8, 1, 1), c = flat_pair(8, 1, 1);
  add_noise(a, m, {10, 1, false});
  add_noise(b, m, {10, 1, false});
  add_noise(c, m, {10, 2, false});
  CHECK(a.short_wl.pixels == b.short_wl.pixels);
  CHECK(!(a.short_wl.pixels == c.short_wl.pixels));
  CHECK(!(a.short_wl.pixels == a.long_wl.pixels));
}

TEST_CASE("infinite SNR adds nothing") {
  auto p = flat_pair(8, 0.3, 0.7);
  const auto before = p;
  add_noise(p, Mask(8, 8, 1), {std::numeric_limits<double>::infinity(), 1, false});
  CHECK(p.short_wl.pixels == before.short_wl.pixels);
  CHECK(p.long_wl.pixels == before.long_wl.pixels);
}

TEST_CASE("empty vessel mask is an error") {
  auto p = flat_pair(8, 1, 1);
  CHECK_THROWS_AS(add_noise(p, Mask(8, 8, 0), {10, 1, false}), ConfigError);
}

TEST_CASE("top rows are zeroed") {
  Image<double> img(12, 4, 1.0);
  zero_top_rows(img, 10);
  for (int r = 0; r < 12; ++r) CHECK(img(r, 2) == (r < 10 ? 0.0 : 1.0));
  CHECK_THROWS_AS(zero_top_rows(img, 12), ConfigError);
  CHECK_THROWS_AS(zero_top_rows(img, -1), ConfigError);
}

TEST_CASE("joint normalization preserves the wavelength ratio") {
  CounterStream rng(2, StreamDomain::kGeneric, 4);
  auto p = flat_pair(10, 0, 0);
  for (std::size_t i = 0; i < 100; ++i) {
    p.short_wl.pixels[i] = 3 * rng.uniform();
    p.long_wl.pixels[i] = 5 * rng.uniform();
  }
  const auto before = p;
  const double scale = normalize_pair(p);
  double peak = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    peak = std::max({peak, p.short_wl.pixels[i], p.long_wl.pixels[i]});
    CHECK(p.short_wl.pixels[i] / p.long_wl.pixels[i] ==
          doctest::Approx(before.short_wl.pixels[i] / before.long_wl.pixels[i]).epsilon(1e-12));
  }
  CHECK(peak == 1.0);
  CHECK(scale > 0);
  auto z = flat_pair(4, 0, 0);
  CHECK(normalize_pair(z) == 0.0);
  CHECK(z.all_zero);
}

TEST_CASE("full pipeline produces normalized images with zeroed skin rows") {
  Volume<double> a(Dims::cube(16), 1.0), b(Dims::cube(16), 2.0);
  for (int z = 0; z < 16; ++z) a(3, 8, z) = b(3, 8, z) = 50;  // filtered away
  Mask mask(16, 16, 0);
  mask(12, 5) = 1;
  PipelineConfig cfg;
  cfg.zero_rows = 5;
  cfg.noise.target_snr_db = std::numeric_limits<double>::infinity();
  const auto p = process_pair({a, 0.1, 700, 1}, {b, 0.1, 900, 1}, mask, cfg);
  CHECK(p.short_wl.pixels(12, 3) == doctest::Approx(0.5));
  CHECK(p.long_wl.pixels(12, 3) == doctest::Approx(1.0));
  CHECK(p.long_wl.pixels(4, 3) == 0.0);
  CHECK(p.short_wl.stage == ImageStage::kNormalized);
}

TEST_CASE("per-image normalization scales each wavelength to its own peak") {
  auto p = flat_pair(4, 2.0, 8.0);
  p.short_wl.pixels[3] = 4.0;
  normalize_each(p);
  CHECK(p.short_wl.pixels[3] == 1.0);
  CHECK(p.short_wl.pixels[0] == 0.5);
  CHECK(p.long_wl.pixels[0] == 1.0);
  CHECK(p.short_wl.stage == ImageStage::kNormalized);
  CHECK(!p.all_zero);
  auto z = flat_pair(4, 1.0, 0.0);
  normalize_each(z);
  CHECK(z.all_zero);
  CHECK(z.short_wl.pixels[0] == 1.0);
}
