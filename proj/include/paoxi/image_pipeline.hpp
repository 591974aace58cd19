#pragma once

// From 3-D absorbed energy to normalized two-wavelength image pairs.

#include <cstdint>
#include <optional>
#include <string_view>

#include "paoxi/grid.hpp"
#include "paoxi/transport.hpp"

namespace paoxi {

enum class ImageStage : std::uint8_t { kRaw = 0, kFiltered = 1, kSliced = 2, kNoisy = 3, kNormalized = 4 };

std::string_view to_string(ImageStage s);

struct PAImage {
  Image<double> pixels;  ///< rows = depth, cols = lateral (x)
  double wavelength_nm = 0.0;
  ImageStage stage = ImageStage::kRaw;
};

struct PAImagePair {
  PAImage short_wl;  ///< 700 nm
  PAImage long_wl;   ///< 900 nm
  bool all_zero = false;  ///< set by normalize_pair when nothing could be scaled
};

/// 3x3x3 median with clamp-to-edge neighbourhoods, parallel over depth.
Volume<double> median_filter_3d(const Volume<double>& in);
AbsorbedEnergyMap median_filter_3d(const AbsorbedEnergyMap& map);

namespace reference {
/// Gathers and fully sorts each 27-sample neighbourhood. Single-threaded.
Volume<double> median_filter_3d_sorted(const Volume<double>& in);
}  // namespace reference

/// Plane through the beam's long axis and depth, at y = ny/2.
PAImage extract_center_slice(const AbsorbedEnergyMap& map);
Image<double> extract_slice_y(const Volume<double>& vol, int y);

struct NoiseSpec {
  double target_snr_db = 25.0;   ///< +inf disables noise
  std::uint64_t rng_seed = 0;
  bool pooled_vessel_mean = false;  ///< use the pair-averaged vessel mean for both images
};

/// Mean of image over mask pixels; throws ConfigError when the mask is empty.
double masked_mean(const Image<double>& image, const Mask& mask);

/// sigma = mean(vessel signal) / 10^(snr/20)
double noise_sigma(double vessel_mean, double target_snr_db);

struct NoiseRealization {
  double sigma_short = 0.0;
  double sigma_long = 0.0;
};

/// Adds white Gaussian noise in place; negative values are kept.
NoiseRealization add_noise(PAImagePair& pair, const Mask& vessel_mask, const NoiseSpec& spec);

void zero_top_rows(Image<double>& image, int n_rows);
inline void zero_top_rows(PAImage& image, int n_rows) { zero_top_rows(image.pixels, n_rows); }

/// Divides both images by the joint maximum. Returns the scale used (0 when all-zero).
double normalize_pair(PAImagePair& pair);
/// Divides each image by its own maximum; all_zero is set when either image has no positive pixel.
void normalize_each(PAImagePair& pair);

struct PipelineConfig {
  int zero_rows = 10;
  bool normalize_per_image = false;
  NoiseSpec noise;
};

/// Filter, slice, add noise, zero the top rows, normalize.
PAImagePair process_pair(const AbsorbedEnergyMap& map_short, const AbsorbedEnergyMap& map_long,
                         const Mask& vessel_mask, const PipelineConfig& config);

}  // namespace paoxi
