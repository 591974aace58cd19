#pragma once

// Tissue optical properties and hemoglobin absorption.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace paoxi {

struct OpticalProperties {
  double mu_a = 0.0;  ///< absorption, 1/cm
  double mu_s = 0.0;  ///< scattering, 1/cm
  double g = 0.0;     ///< anisotropy
  double n = 1.0;     ///< refractive index

  double mu_t() const { return mu_a + mu_s; }
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  bool operator==(const OpticalProperties&) const = default;
};

enum class Chromophore { kHbO2, kHb };

std::string_view to_string(Chromophore c);

/// Molar extinction table, base-10 convention, 1/(cm mol/L).
/// Linear interpolation between knots; no extrapolation.
class ChromophoreSpectrum {
 public:
  ChromophoreSpectrum(Chromophore id, std::vector<double> wavelengths_nm,
                      std::vector<double> extinction);

  static ChromophoreSpectrum load(const std::filesystem::path& path);

  Chromophore id() const { return id_; }
  double min_wavelength() const { return wavelengths_.front(); }
  double max_wavelength() const { return wavelengths_.back(); }
  const std::vector<double>& wavelengths() const { return wavelengths_; }
  const std::vector<double>& values() const { return extinction_; }

  /// Throws RangeError outside [min_wavelength, max_wavelength].
  double extinction(double wavelength_nm) const;

 private:
  Chromophore id_;
  std::vector<double> wavelengths_;
  std::vector<double> extinction_;
};

enum class TissueType : std::uint8_t { kEpidermis = 0, kDermis = 1, kBreast = 2, kBlood = 3 };

std::string_view to_string(TissueType t);
TissueType tissue_type_from_string(std::string_view name);

/// Default total hemoglobin of whole blood: 150 g/L at 64,500 g/mol.
inline constexpr double kDefaultTotalHemoglobin = 150.0 / 64500.0;

struct TissueClass {
  TissueType type = TissueType::kBreast;
  double so2 = 0.0;                             ///< Blood only
  double c_thb = kDefaultTotalHemoglobin;       ///< Blood only, mol/L

  static TissueClass blood(double so2, double c_thb = kDefaultTotalHemoglobin) {
    return {TissueType::kBlood, so2, c_thb};
  }
  static TissueClass of(TissueType t) { return {t, 0.0, kDefaultTotalHemoglobin}; }
};

/// One parsed record of the property file.
struct TissueRecord {
  TissueType type = TissueType::kBreast;
  double wavelength_nm = 0.0;
  double mu_a = 0.0;            ///< 1/cm, unused for blood
  double musp_500nm = 0.0;      ///< 1/cm
  double scatter_power = 0.0;
  double g = 0.0;
  double n = 1.0;

  /// musp_500nm * (wavelength / 500 nm)^(-scatter_power)
  double reduced_scattering() const;
};

std::vector<TissueRecord> parse_tissue_records(std::string_view text);

/// Immutable after construction.
class OpticsDb {
 public:
  OpticsDb(std::vector<TissueRecord> records, ChromophoreSpectrum hbo2, ChromophoreSpectrum hb,
           std::string checksum = {});

  /// Loads tissue_properties.txt, hbo2_extinction.txt, hb_extinction.txt from dir.
  static OpticsDb load(const std::filesystem::path& dir);
  /// The data directory shipped with the sources.
  static OpticsDb load_default();
  static std::filesystem::path default_dir();

  /// ln(10) * c_thb * (so2 * eps_HbO2 + (1 - so2) * eps_Hb), 1/cm.
  double blood_mu_a(double so2, double wavelength_nm, double c_thb = kDefaultTotalHemoglobin) const;

  OpticalProperties tissue_properties(const TissueClass& cls, double wavelength_nm) const;

  const TissueRecord& record(TissueType type, double wavelength_nm) const;
  const ChromophoreSpectrum& spectrum(Chromophore c) const {
    return c == Chromophore::kHbO2 ? hbo2_ : hb_;
  }

  /// CRC-32 over the three source files (hex); empty for in-memory tables.
  const std::string& checksum() const { return checksum_; }

 private:
  std::map<std::pair<TissueType, double>, TissueRecord> records_;
  ChromophoreSpectrum hbo2_;
  ChromophoreSpectrum hb_;
  std::string checksum_;
};

}  // namespace paoxi
