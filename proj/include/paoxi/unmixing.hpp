#pragma once

// Two-wavelength linear spectral unmixing of HbO2 and Hb.

#include <array>

#include "paoxi/grid.hpp"
#include "paoxi/image_pipeline.hpp"
#include "paoxi/optics.hpp"

namespace paoxi {

/// Rows are wavelengths (short, long); columns are chromophores (HbO2, Hb).
/// Entries are absorption per unit molar concentration, 1/(cm mol/L).
class ExtinctionMatrix {
 public:
  /// Throws ConfigError when an entry is non-positive or the matrix is singular.
  explicit ExtinctionMatrix(std::array<std::array<double, 2>, 2> e);

  static ExtinctionMatrix from_optics(const OpticsDb& db, double short_nm = 700.0,
                                      double long_nm = 900.0);

  double operator()(int wavelength, int chromophore) const { return e_[wavelength][chromophore]; }
  double determinant() const { return det_; }
  /// 2-norm condition number.
  double condition_number() const;

  /// E * (c_hbo2, c_hb)
  std::array<double, 2> forward(double c_hbo2, double c_hb) const;

 private:
  std::array<std::array<double, 2>, 2> e_;
  double det_;
};

struct ConcentrationPair {
  double c_hbo2 = 0.0;
  double c_hb = 0.0;
};

ConcentrationPair unmix_pixel(double pa_short, double pa_long, const ExtinctionMatrix& e);

struct SO2Estimate {
  double so2 = 0.0;   ///< clamped to [0, 1]
  double raw = 0.0;   ///< unclamped ratio (NaN when undefined)
  bool valid = false;
};

/// Valid iff c_hbo2 + c_hb > tau and the ratio is finite.
SO2Estimate so2_from_concentrations(const ConcentrationPair& c, double tau = 0.0);

struct SO2Map {
  Image<double> so2;   ///< clamped estimate; 0 where invalid
  Image<double> raw;   ///< unclamped
  Mask valid;
  double fraction_invalid = 0.0;
  double condition_number = 0.0;
};

/// Relative validity threshold: tau = kValidityScale * max(pair).
inline constexpr double kValidityScale = 1e-12;

SO2Map unmix_image(const Image<double>& pa_short, const Image<double>& pa_long,
                   const ExtinctionMatrix& e);
inline SO2Map unmix_image(const PAImagePair& pair, const ExtinctionMatrix& e) {
  return unmix_image(pair.short_wl.pixels, pair.long_wl.pixels, e);
}

}  // namespace paoxi
