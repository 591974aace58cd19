#include <cmath>
#include <numbers>

#include "doctest.h"
#include "paoxi/error.hpp"
#include "paoxi/optics.hpp"

using namespace paoxi;

namespace {
const OpticsDb& db() {
  static const OpticsDb d = OpticsDb::load(PAOXI_OPTICS_DIR);
  return d;
}
}  // namespace

TEST_CASE("blood absorption is affine in so2") {
  for (double wl : {700.0, 755.0, 900.0}) {
    const double a0 = db().blood_mu_a(0.0, wl);
    const double a1 = db().blood_mu_a(1.0, wl);
    for (int i = 0; i <= 100; ++i) {
      const double s = i / 100.0;
      CHECK(db().blood_mu_a(s, wl) == doctest::Approx(a0 + s * (a1 - a0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("extinction interpolation reproduces the table at knots") {
  for (auto c : {Chromophore::kHbO2, Chromophore::kHb}) {
    const auto& sp = db().spectrum(c);
    for (std::size_t i = 0; i < sp.wavelengths().size(); ++i)
      CHECK(sp.extinction(sp.wavelengths()[i]) == sp.values()[i]);
    // Midpoint of the first interval is the mean of the knots.
    const double mid = 0.5 * (sp.wavelengths()[0] + sp.wavelengths()[1]);
    CHECK(sp.extinction(mid) == doctest::Approx(0.5 * (sp.values()[0] + sp.values()[1])));
  }
}

TEST_CASE("blood absorption uses ln10 and the total hemoglobin") {
  const double eps = db().spectrum(Chromophore::kHbO2).extinction(800.0);
  CHECK(db().blood_mu_a(1.0, 800.0, 0.002) ==
        doctest::Approx(std::numbers::ln10 * 0.002 * eps).epsilon(1e-14));
}

TEST_CASE("Hb and HbO2 cross once in the near infrared") {
  const auto& ox = db().spectrum(Chromophore::kHbO2);
  const auto& de = db().spectrum(Chromophore::kHb);
  int crossings = 0;
  double where = 0.0;
  for (double wl = 700.0; wl < 900.0; wl += 0.01) {
    const double d0 = de.extinction(wl) - ox.extinction(wl);
    const double d1 = de.extinction(wl + 0.01) - ox.extinction(wl + 0.01);
    if (d0 > 0 && d1 <= 0) {
      ++crossings;
      where = wl;
    }
  }
  CHECK(crossings == 1);
  CHECK(where > 790.0);
  CHECK(where < 810.0);
  CHECK(de.extinction(700.0) > ox.extinction(700.0));
  CHECK(ox.extinction(900.0) > de.extinction(900.0));
}

TEST_CASE("tissue properties follow the stored records") {
  const auto epi = db().tissue_properties(TissueClass::of(TissueType::kEpidermis), 700.0);
  CHECK(epi.mu_a == 4.80);
  CHECK(epi.g == 0.9);
  CHECK(epi.n == 1.37);
  const double musp = 40.0 * std::pow(700.0 / 500.0, -1.0);
  CHECK(epi.mu_s == doctest::Approx(musp / 0.1).epsilon(1e-12));

  const auto b7 = db().tissue_properties(TissueClass::of(TissueType::kBreast), 700.0);
  const auto b9 = db().tissue_properties(TissueClass::of(TissueType::kBreast), 900.0);
  CHECK(b7.mu_s >= b9.mu_s);

  const auto blood = db().tissue_properties(TissueClass::blood(0.6), 900.0);
  CHECK(blood.mu_a == doctest::Approx(db().blood_mu_a(0.6, 900.0)));
  for (auto t : {TissueType::kEpidermis, TissueType::kDermis, TissueType::kBreast})
    for (double wl : {700.0, 900.0}) {
      const auto p = db().tissue_properties(TissueClass::of(t), wl);
      CHECK(p.mu_a >= 0.0);
      CHECK(p.mu_s >= 0.0);
      CHECK(p.n >= 1.0);
    }
}

TEST_CASE("lookups outside the data raise RangeError") {
  CHECK_THROWS_AS(db().blood_mu_a(0.5, 640.0), RangeError);
  CHECK_THROWS_AS(db().blood_mu_a(0.5, 1001.0), RangeError);
  CHECK_THROWS_AS(db().tissue_properties(TissueClass::of(TissueType::kDermis), 750.0), RangeError);
  CHECK_THROWS_AS(db().blood_mu_a(1.5, 700.0), ConfigError);
}

TEST_CASE("property parser rejects malformed input") {
  CHECK_THROWS_AS(parse_tissue_records("[dermis 700 nm]\nmu_a = 1 1/cm\n"), ParseError);
  CHECK_THROWS_AS(parse_tissue_records("format = paoxi-optics 1\n[dermis 700 nm]\nmu_a = 1 1/mm\n"
                                       "musp_500nm = 1 1/cm\nscatter_power = 1\ng = 0.9\nn = 1.4\n"),
                  ParseError);
  const auto recs = parse_tissue_records(
      "format = paoxi-optics 1\n[dermis 700 nm]\nmu_a = 1 1/cm\nmusp_500nm = 2 1/cm\n"
      "scatter_power = 1\ng = 0.9\nn = 1.4\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].mu_a == 1.0);
  CHECK(recs[0].wavelength_nm == 700.0);
}

TEST_CASE("optical property invariants") {
  CHECK_THROWS_AS((OpticalProperties{-1, 1, 0.9, 1.4}.validate()), ConfigError);
  CHECK_THROWS_AS((OpticalProperties{1, 1, 1.2, 1.4}.validate()), ConfigError);
  CHECK_THROWS_AS((OpticalProperties{1, 1, 0.9, 0.9}.validate()), ConfigError);
  CHECK_NOTHROW((OpticalProperties{0, 0, 0, 1}.validate()));
  CHECK(!db().checksum().empty());
}

TEST_CASE("breast light penetrates deeper at 900 nm than at 700 nm") {
  auto mu_eff = [](const OpticalProperties& p) {
    return std::sqrt(3.0 * p.mu_a * (p.mu_a + p.mu_s * (1.0 - p.g)));
  };
  const auto b7 = db().tissue_properties(TissueClass::of(TissueType::kBreast), 700.0);
  const auto b9 = db().tissue_properties(TissueClass::of(TissueType::kBreast), 900.0);
  CHECK(mu_eff(b7) > mu_eff(b9));
}
