#include "paoxi/optics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <sstream>

#include "paoxi/checksum.hpp"
#include "paoxi/error.hpp"
#include "text_util.hpp"

#ifndef PAOXI_DEFAULT_DATA_DIR
#define PAOXI_DEFAULT_DATA_DIR "data"
#endif

namespace paoxi {

using detail::parse_double;
using detail::split_lines;
using detail::split_ws;
using detail::trim;

void OpticalProperties::validate() const {
  if (!(mu_a >= 0.0) || !std::isfinite(mu_a)) throw ConfigError("mu_a must be finite and >= 0");
  if (!(mu_s >= 0.0) || !std::isfinite(mu_s)) throw ConfigError("mu_s must be finite and >= 0");
  if (!(g >= -1.0 && g <= 1.0)) throw ConfigError("g must lie in [-1, 1]");
  if (!(n >= 1.0)) throw ConfigError("refractive index must be >= 1");
}

std::string_view to_string(Chromophore c) { return c == Chromophore::kHbO2 ? "HbO2" : "Hb"; }

ChromophoreSpectrum::ChromophoreSpectrum(Chromophore id, std::vector<double> wavelengths_nm,
                                         std::vector<double> extinction)
    : id_(id), wavelengths_(std::move(wavelengths_nm)), extinction_(std::move(extinction)) {
  if (wavelengths_.size() != extinction_.size() || wavelengths_.size() < 2) {
    throw ConfigError("spectrum needs at least two (wavelength, extinction) rows");
  }
  for (std::size_t i = 0; i < wavelengths_.size(); ++i) {
    if (!(extinction_[i] > 0.0)) throw ConfigError("extinction values must be strictly positive");
    if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1])) {
      throw ConfigError("spectrum wavelengths must be strictly increasing");
    }
  }
}

ChromophoreSpectrum ChromophoreSpectrum::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::optional<Chromophore> id;
  std::vector<double> wl, eps;
  for (auto raw : split_lines(text)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      if (body.starts_with("chromophore:")) {
        auto name = trim(body.substr(12));
        if (name == "HbO2") id = Chromophore::kHbO2;
        else if (name == "Hb") id = Chromophore::kHb;
        else throw ParseError(path.string() + ": unknown chromophore '" + std::string(name) + "'");
      }
      continue;
    }
    const auto cols = split_ws(line);
    if (cols.size() != 2) throw ParseError(path.string() + ": expected two columns: " + std::string(line));
    wl.push_back(parse_double(cols[0], "wavelength"));
    eps.push_back(parse_double(cols[1], "extinction"));
  }
  if (!id) throw ParseError(path.string() + ": missing '# chromophore:' header");
  return ChromophoreSpectrum(*id, std::move(wl), std::move(eps));
}

double ChromophoreSpectrum::extinction(double wavelength_nm) const {
  if (!(wavelength_nm >= min_wavelength() && wavelength_nm <= max_wavelength())) {
    std::ostringstream ss;
    ss << "wavelength " << wavelength_nm << " nm outside tabulated range [" << min_wavelength()
       << ", " << max_wavelength() << "] for " << to_string(id_);
    throw RangeError(ss.str());
  }
  const auto it = std::lower_bound(wavelengths_.begin(), wavelengths_.end(), wavelength_nm);
  const auto hi = static_cast<std::size_t>(it - wavelengths_.begin());
  if (wavelengths_[hi] == wavelength_nm) return extinction_[hi];
  const std::size_t lo = hi - 1;
  const double t = (wavelength_nm - wavelengths_[lo]) / (wavelengths_[hi] - wavelengths_[lo]);
  return extinction_[lo] + t * (extinction_[hi] - extinction_[lo]);
}

std::string_view to_string(TissueType t) {
  switch (t) {
    case TissueType::kEpidermis: return "epidermis";
    case TissueType::kDermis: return "dermis";
    case TissueType::kBreast: return "breast";
    case TissueType::kBlood: return "blood";
  }
  return "unknown";
}

TissueType tissue_type_from_string(std::string_view name) {
  if (name == "epidermis") return TissueType::kEpidermis;
  if (name == "dermis") return TissueType::kDermis;
  if (name == "breast") return TissueType::kBreast;
  if (name == "blood") return TissueType::kBlood;
  throw ParseError("unknown tissue class '" + std::string(name) + "'");
}

double TissueRecord::reduced_scattering() const {
  return musp_500nm * std::pow(wavelength_nm / 500.0, -scatter_power);
}

namespace {

// "value unit" with the unit checked against what the key demands.
double parse_with_unit(std::string_view value, std::string_view unit, std::string_view key) {
  const auto cols = split_ws(value);
  if (unit.empty()) {
    if (cols.size() != 1) throw ParseError(std::string(key) + " is dimensionless; got '" + std::string(value) + "'");
  } else if (cols.size() != 2 || cols[1] != unit) {
    throw ParseError(std::string(key) + " needs unit " + std::string(unit) + "; got '" +
                     std::string(value) + "'");
  }
  return parse_double(cols[0], key);
}

}  // namespace

std::vector<TissueRecord> parse_tissue_records(std::string_view text) {
  std::vector<TissueRecord> out;
  TissueRecord* cur = nullptr;
  unsigned seen = 0;
  bool have_format = false;
  auto finish = [&] {
    if (!cur) return;
    const unsigned need = cur->type == TissueType::kBlood ? 0b11110u : 0b11111u;
    if ((seen & need) != need) {
      throw ParseError("record [" + std::string(to_string(cur->type)) + "] is missing fields");
    }
  };
  int line_no = 0;
  for (auto raw : split_lines(text)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("line " + std::to_string(line_no) + ": bad header");
      finish();
      const auto parts = split_ws(line.substr(1, line.size() - 2));
      if (parts.size() != 3 || parts[2] != "nm") {
        throw ParseError("line " + std::to_string(line_no) + ": expected [class <wavelength> nm]");
      }
      TissueRecord rec;
      rec.type = tissue_type_from_string(parts[0]);
      rec.wavelength_nm = parse_double(parts[1], "wavelength");
      out.push_back(rec);
      cur = &out.back();
      seen = 0;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "format") {
      if (value != "paoxi-optics 1") throw ParseError("unsupported optics format '" + std::string(value) + "'");
      have_format = true;
      continue;
    }
    if (!cur) throw ParseError("line " + std::to_string(line_no) + ": field outside a record");
    if (key == "mu_a") { cur->mu_a = parse_with_unit(value, "1/cm", key); seen |= 1u; }
    else if (key == "musp_500nm") { cur->musp_500nm = parse_with_unit(value, "1/cm", key); seen |= 2u; }
    else if (key == "scatter_power") { cur->scatter_power = parse_with_unit(value, "", key); seen |= 4u; }
    else if (key == "g") { cur->g = parse_with_unit(value, "", key); seen |= 8u; }
    else if (key == "n") { cur->n = parse_with_unit(value, "", key); seen |= 16u; }
    else throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
  }
  finish();
  if (!have_format) throw ParseError("optics file lacks 'format = paoxi-optics 1'");
  return out;
}

OpticsDb::OpticsDb(std::vector<TissueRecord> records, ChromophoreSpectrum hbo2,
                   ChromophoreSpectrum hb, std::string checksum)
    : hbo2_(std::move(hbo2)), hb_(std::move(hb)), checksum_(std::move(checksum)) {
  if (hbo2_.id() != Chromophore::kHbO2 || hb_.id() != Chromophore::kHb) {
    throw ConfigError("spectra passed in the wrong order");
  }
  for (const auto& r : records) {
    if (!(r.g >= -1.0 && r.g < 1.0)) throw ConfigError("record g must lie in [-1, 1)");
    if (!(r.n >= 1.0) || !(r.mu_a >= 0.0) || !(r.musp_500nm >= 0.0)) {
      throw ConfigError("record for " + std::string(to_string(r.type)) + " violates property bounds");
    }
    if (!records_.emplace(std::pair{r.type, r.wavelength_nm}, r).second) {
      throw ConfigError("duplicate record for " + std::string(to_string(r.type)));
    }
  }
}

std::filesystem::path OpticsDb::default_dir() {
  if (const char* env = std::getenv("PAOXI_DATA_DIR")) return std::filesystem::path(env) / "optics";
  return std::filesystem::path(PAOXI_DEFAULT_DATA_DIR) / "optics";
}

OpticsDb OpticsDb::load(const std::filesystem::path& dir) {
  const auto props = dir / "tissue_properties.txt";
  const auto f_hbo2 = dir / "hbo2_extinction.txt";
  const auto f_hb = dir / "hb_extinction.txt";
  std::uint32_t crc = 0;
  for (const auto& f : {props, f_hbo2, f_hb}) crc = paoxi::crc32(read_text_file(f), crc);
  return OpticsDb(parse_tissue_records(read_text_file(props)), ChromophoreSpectrum::load(f_hbo2),
                  ChromophoreSpectrum::load(f_hb), to_hex(crc));
}

OpticsDb OpticsDb::load_default() { return load(default_dir()); }

double OpticsDb::blood_mu_a(double so2, double wavelength_nm, double c_thb) const {
  if (!(so2 >= 0.0 && so2 <= 1.0)) throw ConfigError("so2 must lie in [0, 1]");
  if (!(c_thb > 0.0)) throw ConfigError("total hemoglobin must be positive");
  const double e_ox = hbo2_.extinction(wavelength_nm);
  const double e_de = hb_.extinction(wavelength_nm);
  return std::numbers::ln10 * c_thb * (so2 * e_ox + (1.0 - so2) * e_de);
}

const TissueRecord& OpticsDb::record(TissueType type, double wavelength_nm) const {
  const auto it = records_.find({type, wavelength_nm});
  if (it == records_.end()) {
    std::ostringstream ss;
    ss << "no optical properties for " << to_string(type) << " at " << wavelength_nm << " nm";
    throw RangeError(ss.str());
  }
  return it->second;
}

OpticalProperties OpticsDb::tissue_properties(const TissueClass& cls, double wavelength_nm) const {
  const TissueRecord& rec = record(cls.type, wavelength_nm);
  OpticalProperties p;
  p.mu_a = cls.type == TissueType::kBlood ? blood_mu_a(cls.so2, wavelength_nm, cls.c_thb) : rec.mu_a;
  p.mu_s = rec.reduced_scattering() / (1.0 - rec.g);
  p.g = rec.g;
  p.n = rec.n;
  p.validate();
  return p;
}

}  // namespace paoxi
