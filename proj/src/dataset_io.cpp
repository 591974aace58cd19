#include "paoxi/dataset_io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "paoxi/checksum.hpp"
#include "paoxi/error.hpp"
#include "paoxi/rng.hpp"

namespace paoxi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'A', 'O', 'X'};

template <class T>
void put_le(std::vector<std::byte>& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
}

template <class T>
T get_le(std::span<const std::byte> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[offset + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

// Element-wise conversion between host values and little-endian bytes.
template <class T>
std::vector<std::byte> to_le_bytes(std::span<const T> values) {
  std::vector<std::byte> out(values.size() * sizeof(T));
  std::memcpy(out.data(), values.data(), out.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::reverse(out.begin() + i * sizeof(T), out.begin() + (i + 1) * sizeof(T));
    }
  }
  return out;
}

template <class T>
std::vector<T> from_le_bytes(std::span<const std::byte> bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::vector<std::byte> tmp(bytes.begin(), bytes.end());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::reverse(tmp.begin() + i * sizeof(T), tmp.begin() + (i + 1) * sizeof(T));
    }
  }
  std::memcpy(out.data(), tmp.data(), out.size() * sizeof(T));
  return out;
}

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> buf(size);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!in) throw CorruptionError("short read on " + path.string());
  return buf;
}

void write_bytes_atomic(const fs::path& path, std::span<const std::byte> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void expect(const ArrayFile& f, DType dtype, const fs::path& path) {
  if (f.header.dtype != dtype) {
    throw CorruptionError(path.string() + ": unexpected dtype code " +
                          std::to_string(static_cast<int>(f.header.dtype)));
  }
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kFloat32: return 4;
    case DType::kUInt8: return 1;
    case DType::kFloat64: return 8;
  }
  throw CorruptionError("unknown dtype code");
}

std::vector<std::byte> encode_array(DType dtype, std::array<std::uint32_t, 3> dims,
                                    std::span<const std::byte> payload, std::uint8_t stage) {
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (payload.size() != count * dtype_size(dtype)) throw ConfigError("payload size does not match dims");
  std::vector<std::byte> out;
  out.reserve(kArrayHeaderBytes + payload.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint16_t>(out, kArrayFormatVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(dtype));
  for (auto d : dims) put_le<std::uint32_t>(out, d);
  out.push_back(static_cast<std::byte>(stage));
  for (int i = 0; i < 3; ++i) out.push_back(std::byte{0});
  put_le<std::uint32_t>(out, crc32(payload));
  put_le<std::uint32_t>(out, crc32(std::span<const std::byte>(out.data(), 28)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

ArrayFile decode_array(std::span<const std::byte> bytes, const std::string& name) {
  if (bytes.size() < kArrayHeaderBytes) throw CorruptionError(name + ": truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CorruptionError(name + ": bad magic");
  if (get_le<std::uint32_t>(bytes, 28) != crc32(bytes.first(28))) {
    throw CorruptionError(name + ": header checksum mismatch");
  }
  if (get_le<std::uint16_t>(bytes, 4) != kArrayFormatVersion) {
    throw CorruptionError(name + ": unsupported format version");
  }
  ArrayFile f;
  f.header.dtype = static_cast<DType>(get_le<std::uint16_t>(bytes, 6));
  for (int i = 0; i < 3; ++i) f.header.dims[i] = get_le<std::uint32_t>(bytes, 8 + 4 * i);
  f.header.stage = std::to_integer<std::uint8_t>(bytes[20]);
  f.header.payload_crc = get_le<std::uint32_t>(bytes, 24);
  const std::size_t expected = f.header.element_count() * dtype_size(f.header.dtype);
  const auto payload = bytes.subspan(kArrayHeaderBytes);
  if (payload.size() != expected) {
    throw CorruptionError(name + ": payload is " + std::to_string(payload.size()) +
                          " bytes, header promises " + std::to_string(expected));
  }
  if (crc32(payload) != f.header.payload_crc) throw CorruptionError(name + ": payload checksum mismatch");
  f.payload.assign(payload.begin(), payload.end());
  f.file_crc = crc32(bytes);
  return f;
}

std::uint32_t write_array_file(const fs::path& path, DType dtype, std::array<std::uint32_t, 3> dims,
                               std::span<const std::byte> payload, std::uint8_t stage) {
  const auto bytes = encode_array(dtype, dims, payload, stage);
  write_bytes_atomic(path, bytes);
  return crc32(bytes);
}

ArrayFile read_array_file(const fs::path& path) {
  return decode_array(read_bytes(path), path.string());
}

std::uint32_t write_image(const fs::path& path, const Image<float>& img, std::uint8_t stage) {
  const auto bytes = to_le_bytes<float>(img.data());
  return write_array_file(path, DType::kFloat32,
                          {static_cast<std::uint32_t>(img.cols()), static_cast<std::uint32_t>(img.rows()), 1},
                          bytes, stage);
}

std::uint32_t write_mask(const fs::path& path, const Mask& mask) {
  const auto bytes = to_le_bytes<std::uint8_t>(mask.data());
  return write_array_file(path, DType::kUInt8,
                          {static_cast<std::uint32_t>(mask.cols()), static_cast<std::uint32_t>(mask.rows()), 1},
                          bytes, kNoStage);
}

namespace {

template <class T>
std::uint32_t write_volume_impl(const fs::path& path, const Volume<T>& vol, DType dtype) {
  const auto d = vol.dims();
  const auto bytes = to_le_bytes<T>(vol.data());
  return write_array_file(path, dtype,
                          {static_cast<std::uint32_t>(d.nx), static_cast<std::uint32_t>(d.ny),
                           static_cast<std::uint32_t>(d.nz)},
                          bytes, kNoStage);
}

template <class T>
Volume<T> read_volume_impl(const fs::path& path, DType dtype) {
  const ArrayFile f = read_array_file(path);
  expect(f, dtype, path);
  const auto& dm = f.header.dims;
  Volume<T> v(Dims{static_cast<int>(dm[0]), static_cast<int>(dm[1]), static_cast<int>(dm[2])});
  v.storage() = from_le_bytes<T>(f.payload);
  return v;
}

}  // namespace

std::uint32_t write_volume(const fs::path& path, const Volume<float>& vol) {
  return write_volume_impl(path, vol, DType::kFloat32);
}
std::uint32_t write_volume(const fs::path& path, const Volume<double>& vol) {
  return write_volume_impl(path, vol, DType::kFloat64);
}
std::uint32_t write_volume(const fs::path& path, const Volume<std::uint8_t>& vol) {
  return write_volume_impl(path, vol, DType::kUInt8);
}

Volume<float> read_volume_f32(const fs::path& path) { return read_volume_impl<float>(path, DType::kFloat32); }
Volume<double> read_volume_f64(const fs::path& path) { return read_volume_impl<double>(path, DType::kFloat64); }
Volume<std::uint8_t> read_volume_u8(const fs::path& path) {
  return read_volume_impl<std::uint8_t>(path, DType::kUInt8);
}

Image<float> read_image(const fs::path& path, std::uint8_t* stage) {
  const ArrayFile f = read_array_file(path);
  expect(f, DType::kFloat32, path);
  if (f.header.dims[2] != 1) throw CorruptionError(path.string() + ": expected a 2-D array");
  Image<float> img(static_cast<int>(f.header.dims[1]), static_cast<int>(f.header.dims[0]));
  img.storage() = from_le_bytes<float>(f.payload);
  if (stage) *stage = f.header.stage;
  return img;
}

Mask read_mask(const fs::path& path) {
  const ArrayFile f = read_array_file(path);
  expect(f, DType::kUInt8, path);
  if (f.header.dims[2] != 1) throw CorruptionError(path.string() + ": expected a 2-D array");
  Mask m(static_cast<int>(f.header.dims[1]), static_cast<int>(f.header.dims[0]));
  m.storage() = from_le_bytes<std::uint8_t>(f.payload);
  return m;
}

Image<float> to_float(const Image<double>& img) {
  Image<float> out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<float>(img[i]);
  return out;
}

Image<double> to_double(const Image<float>& img) {
  Image<double> out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i];
  return out;
}

// --- samples ----------------------------------------------------------------

void SampleRecord::validate() const {
  if (sample_id.empty() || sample_id.find_first_of("/\\. ") != std::string::npos) {
    throw ConfigError("sample id '" + sample_id + "' must be non-empty without '/', '.', or spaces");
  }
  if (!pa700.same_shape(pa900) || !pa700.same_shape(seg_gt) || !pa700.same_shape(so2_gt)) {
    throw ConfigError("sample " + sample_id + ": arrays differ in shape");
  }
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

SampleEntry write_sample(const fs::path& dir, const SampleRecord& r) {
  r.validate();
  SampleEntry e;
  e.sample_id = r.sample_id;
  e.metadata = r.metadata;
  const auto stage = static_cast<std::uint8_t>(ImageStage::kNormalized);
  auto name = [&](int i) { return r.sample_id + "." + kSampleFields[i] + ".bin"; };
  const std::uint32_t crcs[4] = {write_image(dir / name(0), r.pa700, stage),
                                 write_image(dir / name(1), r.pa900, stage),
                                 write_mask(dir / name(2), r.seg_gt),
                                 write_image(dir / name(3), r.so2_gt)};
  for (int i = 0; i < 4; ++i) e.files[i] = {name(i), to_hex(crcs[i])};
  return e;
}

namespace {

std::vector<std::byte> read_checked(const fs::path& dir, const SampleFile& f) {
  const auto bytes = read_bytes(dir / f.name);
  if (to_hex(crc32(bytes)) != f.crc32) {
    throw CorruptionError(f.name + ": checksum does not match the manifest");
  }
  return bytes;
}

}  // namespace

SampleRecord read_sample(const fs::path& dir, const SampleEntry& e) {
  SampleRecord r;
  r.sample_id = e.sample_id;
  r.metadata = e.metadata;
  for (int i = 0; i < 4; ++i) {
    const auto bytes = read_checked(dir, e.files[i]);
    const ArrayFile f = decode_array(bytes, e.files[i].name);
    const int rows = static_cast<int>(f.header.dims[1]);
    const int cols = static_cast<int>(f.header.dims[0]);
    if (f.header.dims[2] != 1) throw CorruptionError(e.files[i].name + ": expected a 2-D array");
    if (i == 2) {
      if (f.header.dtype != DType::kUInt8) throw CorruptionError(e.files[i].name + ": expected uint8");
      r.seg_gt = Mask(rows, cols);
      r.seg_gt.storage() = from_le_bytes<std::uint8_t>(f.payload);
    } else {
      if (f.header.dtype != DType::kFloat32) throw CorruptionError(e.files[i].name + ": expected float32");
      Image<float> img(rows, cols);
      img.storage() = from_le_bytes<float>(f.payload);
      (i == 0 ? r.pa700 : i == 1 ? r.pa900 : r.so2_gt) = std::move(img);
    }
  }
  r.validate();
  return r;
}

// --- splits -----------------------------------------------------------------

SplitAssignment assign_splits(const std::vector<std::string>& ids, std::uint64_t seed) {
  if (ids.size() < 10) throw ConfigError("need at least 10 samples to split 80/10/10");
  std::vector<std::string> order = ids;
  std::sort(order.begin(), order.end());
  if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
    throw ConfigError("duplicate sample ids");
  }
  CounterStream rng(seed, StreamDomain::kSplit, 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  }
  const std::size_t n_val = order.size() / 10;
  const std::size_t n_test = order.size() / 10;
  SplitAssignment s;
  s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  return s;
}

// --- manifest -----------------------------------------------------------------

json to_json(const Cylinder& c) {
  return json{{"vessel_id", c.vessel_id},
              {"point_on_axis_cm", {c.point_on_axis.x, c.point_on_axis.y, c.point_on_axis.z}},
              {"direction", {c.direction.x, c.direction.y, c.direction.z}},
              {"radius_cm", c.radius_cm},
              {"so2", c.so2}};
}

Cylinder cylinder_from_json(const json& j) {
  Cylinder c;
  c.vessel_id = j.at("vessel_id").get<int>();
  const auto& p = j.at("point_on_axis_cm");
  const auto& d = j.at("direction");
  c.point_on_axis = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
  c.direction = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
  c.radius_cm = j.at("radius_cm").get<double>();
  c.so2 = j.at("so2").get<double>();
  return c;
}

json to_json(const SampleMetadata& m) {
  json vessels = json::array();
  for (const auto& c : m.vessels) vessels.push_back(to_json(c));
  json j{{"phantom_seed", m.phantom_seed},   {"vessels", vessels},
         {"snr_db", m.snr_db},               {"noise_seed", m.noise_seed},
         {"pipeline_hash", m.pipeline_hash}, {"optics_checksum", m.optics_checksum},
         {"n_packets", m.n_packets},         {"transport_seed", m.transport_seed},
         {"normalized_all_zero", m.normalized_all_zero}};
  // JSON has no infinity; noise-free samples store null.
  if (std::isinf(m.snr_db)) j["snr_db"] = nullptr;
  return j;
}

SampleMetadata metadata_from_json(const json& j) {
  SampleMetadata m;
  m.phantom_seed = j.at("phantom_seed").get<std::uint64_t>();
  for (const auto& v : j.at("vessels")) m.vessels.push_back(cylinder_from_json(v));
  m.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                      : j.at("snr_db").get<double>();
  m.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  m.pipeline_hash = j.at("pipeline_hash").get<std::string>();
  m.optics_checksum = j.at("optics_checksum").get<std::string>();
  m.n_packets = j.value("n_packets", std::uint64_t{0});
  m.transport_seed = j.value("transport_seed", std::uint64_t{0});
  m.normalized_all_zero = j.value("normalized_all_zero", false);
  return m;
}

json to_json(const Manifest& m) {
  json samples = json::array();
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& e : m.samples) {
    json files = json::object();
    for (int i = 0; i < 4; ++i) {
      files[kSampleFields[i]] = {{"name", e.files[i].name}, {"crc32", e.files[i].crc32}};
    }
    json meta = to_json(e.metadata);
    samples.push_back({{"id", e.sample_id},
                       {"split", std::string(to_string(e.split))},
                       {"files", files},
                       {"metadata", meta}});
    ++counts[static_cast<int>(e.split)];
  }
  return json{{"format", "paoxi-dataset"},
              {"version", m.version},
              {"config", m.config},
              {"optics_checksum", m.optics_checksum},
              {"split_seed", m.split_seed},
              {"split_counts", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}},
              {"samples", samples}};
}

Manifest manifest_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "paoxi-dataset") throw ParseError("not a paoxi dataset manifest");
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != Manifest::kVersion) throw ParseError("unsupported manifest version");
    m.config = j.at("config");
    m.optics_checksum = j.at("optics_checksum").get<std::string>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    std::set<std::string> seen;
    for (const auto& s : j.at("samples")) {
      SampleEntry e;
      e.sample_id = s.at("id").get<std::string>();
      if (!seen.insert(e.sample_id).second) throw ParseError("sample " + e.sample_id + " listed twice");
      e.split = split_from_string(s.at("split").get<std::string>());
      for (int i = 0; i < 4; ++i) {
        const auto& f = s.at("files").at(kSampleFields[i]);
        e.files[i] = {f.at("name").get<std::string>(), f.at("crc32").get<std::string>()};
        if (e.files[i].name.find('/') != std::string::npos) throw ParseError("file names must be local");
      }
      e.metadata = metadata_from_json(s.at("metadata"));
      m.samples.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& ex) {
    throw ParseError(std::string("malformed manifest: ") + ex.what());
  }
}

std::vector<const SampleEntry*> Manifest::in_split(Split s) const {
  std::vector<const SampleEntry*> out;
  for (const auto& e : samples)
    if (e.split == s) out.push_back(&e);
  return out;
}

const SampleEntry& Manifest::find(const std::string& id) const {
  for (const auto& e : samples)
    if (e.sample_id == id) return e;
  throw ConfigError("sample " + id + " not in manifest");
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  const std::string text = to_json(m).dump(2) + "\n";
  write_bytes_atomic(dir / "manifest.json",
                     std::as_bytes(std::span(text.data(), text.size())));
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw ConfigError("no manifest.json in " + dir.string());
  json j;
  try {
    j = json::parse(read_text_file(p));
  } catch (const json::exception& ex) {
    throw ParseError(p.string() + ": " + ex.what());
  }
  return manifest_from_json(j);
}

void verify_dataset(const fs::path& dir, const Manifest& m) {
  for (const auto& e : m.samples)
    for (const auto& f : e.files) read_checked(dir, f);
}

DatasetLock::DatasetLock(const fs::path& dir) : path_(dir / ".paoxi.lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw ConfigError("dataset " + dir.string() + " is locked by another writer (" +
                      std::strerror(errno) + ")");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DatasetLock::~DatasetLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace paoxi
