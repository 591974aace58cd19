#include "paoxi/unmixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "paoxi/error.hpp"

namespace paoxi {

ExtinctionMatrix::ExtinctionMatrix(std::array<std::array<double, 2>, 2> e) : e_(e) {
  for (const auto& row : e_)
    for (double v : row)
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("extinction matrix entries must be positive");
  det_ = e_[0][0] * e_[1][1] - e_[0][1] * e_[1][0];
  const double scale = std::max({std::abs(e_[0][0] * e_[1][1]), std::abs(e_[0][1] * e_[1][0])});
  if (!(std::abs(det_) > 1e-12 * scale)) throw ConfigError("extinction matrix is singular");
}

ExtinctionMatrix ExtinctionMatrix::from_optics(const OpticsDb& db, double short_nm, double long_nm) {
  const auto& ox = db.spectrum(Chromophore::kHbO2);
  const auto& de = db.spectrum(Chromophore::kHb);
  const double k = std::numbers::ln10;
  return ExtinctionMatrix({{{k * ox.extinction(short_nm), k * de.extinction(short_nm)},
                            {k * ox.extinction(long_nm), k * de.extinction(long_nm)}}});
}

double ExtinctionMatrix::condition_number() const {
  // Singular values of a 2x2 from the eigenvalues of E^T E.
  const double a = e_[0][0], b = e_[0][1], c = e_[1][0], d = e_[1][1];
  const double s = a * a + b * b + c * c + d * d;
  const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det_ * det_));
  const double smax = std::sqrt(0.5 * (s + disc));
  const double smin = std::abs(det_) / smax;
  return smax / smin;
}

std::array<double, 2> ExtinctionMatrix::forward(double c_hbo2, double c_hb) const {
  return {e_[0][0] * c_hbo2 + e_[0][1] * c_hb, e_[1][0] * c_hbo2 + e_[1][1] * c_hb};
}

ConcentrationPair unmix_pixel(double pa_short, double pa_long, const ExtinctionMatrix& e) {
  const double inv = 1.0 / e.determinant();
  return {(e(1, 1) * pa_short - e(0, 1) * pa_long) * inv,
          (e(0, 0) * pa_long - e(1, 0) * pa_short) * inv};
}

SO2Estimate so2_from_concentrations(const ConcentrationPair& c, double tau) {
  SO2Estimate out;
  const double total = c.c_hbo2 + c.c_hb;
  out.raw = total != 0.0 ? c.c_hbo2 / total : std::numeric_limits<double>::quiet_NaN();
  out.valid = total > tau && std::isfinite(out.raw);
  out.so2 = out.valid ? std::clamp(out.raw, 0.0, 1.0) : 0.0;
  return out;
}

SO2Map unmix_image(const Image<double>& pa_short, const Image<double>& pa_long,
                   const ExtinctionMatrix& e) {
  if (!pa_short.same_shape(pa_long)) throw ConfigError("image pair shapes differ");
  double peak = 0.0;
  for (double v : pa_short.storage()) peak = std::max(peak, std::abs(v));
  for (double v : pa_long.storage()) peak = std::max(peak, std::abs(v));
  const double tau = kValidityScale * peak;

  SO2Map m{Image<double>(pa_short.rows(), pa_short.cols()),
           Image<double>(pa_short.rows(), pa_short.cols()),
           Mask(pa_short.rows(), pa_short.cols()), 0.0, e.condition_number()};
  std::size_t invalid = 0;
  const auto n = static_cast<std::int64_t>(pa_short.size());
#pragma omp parallel for reduction(+ : invalid) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto est = so2_from_concentrations(unmix_pixel(pa_short[i], pa_long[i], e), tau);
    m.so2[i] = est.so2;
    m.raw[i] = est.raw;
    m.valid[i] = est.valid ? 1 : 0;
    if (!est.valid) ++invalid;
  }
  m.fraction_invalid = n > 0 ? static_cast<double>(invalid) / static_cast<double>(n) : 0.0;
  return m;
}

}  // namespace paoxi
