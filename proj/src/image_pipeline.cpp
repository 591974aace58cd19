#include "paoxi/image_pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "paoxi/error.hpp"
#include "paoxi/phantom.hpp"
#include "paoxi/rng.hpp"

namespace paoxi {

std::string_view to_string(ImageStage s) {
  switch (s) {
    case ImageStage::kRaw: return "raw";
    case ImageStage::kFiltered: return "filtered";
    case ImageStage::kSliced: return "sliced";
    case ImageStage::kNoisy: return "noisy";
    case ImageStage::kNormalized: return "normalized";
  }
  return "unknown";
}

namespace {

void check_filter_dims(const Dims& d) {
  if (d.nx < 3 || d.ny < 3 || d.nz < 3) throw ConfigError("median filter needs at least 3 voxels per axis");
}

}  // namespace

Volume<double> median_filter_3d(const Volume<double>& in) {
  const Dims d = in.dims();
  check_filter_dims(d);
  Volume<double> out(d);
#pragma omp parallel for schedule(static)
  for (int z = 0; z < d.nz; ++z) {
    std::array<double, 27> buf;
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        int k = 0;
        for (int dz = -1; dz <= 1; ++dz) {
          const int zz = std::clamp(z + dz, 0, d.nz - 1);
          for (int dy = -1; dy <= 1; ++dy) {
            const int yy = std::clamp(y + dy, 0, d.ny - 1);
            for (int dx = -1; dx <= 1; ++dx) {
              buf[k++] = in(std::clamp(x + dx, 0, d.nx - 1), yy, zz);
            }
          }
        }
        std::nth_element(buf.begin(), buf.begin() + 13, buf.end());
        out(x, y, z) = buf[13];
      }
    }
  }
  return out;
}

AbsorbedEnergyMap median_filter_3d(const AbsorbedEnergyMap& map) {
  AbsorbedEnergyMap out = map;
  out.energy = median_filter_3d(map.energy);
  return out;
}

namespace reference {

Volume<double> median_filter_3d_sorted(const Volume<double>& in) {
  const Dims d = in.dims();
  check_filter_dims(d);
  Volume<double> out(d);
  std::vector<double> buf;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        buf.clear();
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              buf.push_back(in(std::clamp(x + dx, 0, d.nx - 1), std::clamp(y + dy, 0, d.ny - 1),
                               std::clamp(z + dz, 0, d.nz - 1)));
        std::sort(buf.begin(), buf.end());
        out(x, y, z) = buf[buf.size() / 2];
      }
  return out;
}

}  // namespace reference

Image<double> extract_slice_y(const Volume<double>& vol, int y) {
  const Dims d = vol.dims();
  if (y < 0 || y >= d.ny) throw ConfigError("slice index outside the volume");
  Image<double> img(d.nz, d.nx);
  for (int z = 0; z < d.nz; ++z)
    for (int x = 0; x < d.nx; ++x) img(z, x) = vol(x, y, z);
  return img;
}

PAImage extract_center_slice(const AbsorbedEnergyMap& map) {
  return {extract_slice_y(map.energy, center_slice_index(map.energy.dims())), map.wavelength_nm,
          ImageStage::kSliced};
}

double masked_mean(const Image<double>& image, const Mask& mask) {
  if (!image.same_shape(mask)) throw ConfigError("mask shape does not match image");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask[i]) {
      sum += image[i];
      ++n;
    }
  }
  if (n == 0) throw ConfigError("vessel mask is empty; SNR is undefined");
  return sum / static_cast<double>(n);
}

double noise_sigma(double vessel_mean, double target_snr_db) {
  if (std::isinf(target_snr_db) && target_snr_db > 0) return 0.0;
  if (!std::isfinite(target_snr_db)) throw ConfigError("target SNR must be finite or +inf");
  return vessel_mean / std::pow(10.0, target_snr_db / 20.0);
}

NoiseRealization add_noise(PAImagePair& pair, const Mask& vessel_mask, const NoiseSpec& spec) {
  const double m_short = masked_mean(pair.short_wl.pixels, vessel_mask);
  const double m_long = masked_mean(pair.long_wl.pixels, vessel_mask);
  NoiseRealization r;
  if (spec.pooled_vessel_mean) {
    const double pooled = 0.5 * (m_short + m_long);
    r.sigma_short = r.sigma_long = noise_sigma(pooled, spec.target_snr_db);
  } else {
    r.sigma_short = noise_sigma(m_short, spec.target_snr_db);
    r.sigma_long = noise_sigma(m_long, spec.target_snr_db);
  }
  auto apply = [&](PAImage& img, double sigma, std::uint64_t stream) {
    if (sigma > 0.0) {
      CounterStream rng(spec.rng_seed, StreamDomain::kNoise, stream);
      for (auto& v : img.pixels.storage()) v += sigma * rng.normal();
    }
    img.stage = ImageStage::kNoisy;
  };
  apply(pair.short_wl, r.sigma_short, 0);
  apply(pair.long_wl, r.sigma_long, 1);
  return r;
}

void zero_top_rows(Image<double>& image, int n_rows) {
  if (n_rows < 0 || n_rows >= image.rows()) throw ConfigError("row count must be in [0, height)");
  std::fill_n(image.storage().begin(), static_cast<std::size_t>(n_rows) * image.cols(), 0.0);
}

double normalize_pair(PAImagePair& pair) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : pair.short_wl.pixels.storage()) peak = std::max(peak, v);
  for (double v : pair.long_wl.pixels.storage()) peak = std::max(peak, v);
  if (!(peak > 0.0)) {
    pair.all_zero = true;
    return 0.0;
  }
  for (auto* img : {&pair.short_wl, &pair.long_wl}) {
    for (auto& v : img->pixels.storage()) v /= peak;
    img->stage = ImageStage::kNormalized;
  }
  return peak;
}

void normalize_each(PAImagePair& pair) {
  for (auto* img : {&pair.short_wl, &pair.long_wl}) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : img->pixels.storage()) peak = std::max(peak, v);
    if (!(peak > 0.0)) {
      pair.all_zero = true;
      continue;
    }
    for (auto& v : img->pixels.storage()) v /= peak;
    img->stage = ImageStage::kNormalized;
  }
}

PAImagePair process_pair(const AbsorbedEnergyMap& map_short, const AbsorbedEnergyMap& map_long,
                         const Mask& vessel_mask, const PipelineConfig& config) {
  if (!(map_short.energy.dims() == map_long.energy.dims())) {
    throw ConfigError("absorbed energy maps differ in size");
  }
  PAImagePair pair{extract_center_slice(median_filter_3d(map_short)),
                   extract_center_slice(median_filter_3d(map_long))};
  add_noise(pair, vessel_mask, config.noise);
  zero_top_rows(pair.short_wl, config.zero_rows);
  zero_top_rows(pair.long_wl, config.zero_rows);
  if (config.normalize_per_image) {
    normalize_each(pair);
  } else {
    normalize_pair(pair);
  }
  return pair;
}

}  // namespace paoxi
