#pragma once

// On-disk dataset container shared with the training code.
//
// A dataset is a directory holding manifest.json plus one binary array file
// per field, named <sample_id>.<field>.bin. Array files start with a 32-byte
// little-endian header:
//
//   0  char[4]  magic "PAOX"
//   4  u16      format version (1)
//   6  u16      dtype code (1 = float32, 2 = uint8, 3 = float64)
//   8  u32[3]   dims, fastest first (cols, rows, depth; unused dims are 1)
//   20 u8       stage tag (ImageStage, 255 = not an image)
//   21 u8[3]    zero
//   24 u32      CRC-32 of the payload
//   28 u32      CRC-32 of header bytes 0..27
//
// The payload follows immediately, row-major, rows = depth.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "paoxi/grid.hpp"
#include "paoxi/image_pipeline.hpp"
#include "paoxi/phantom.hpp"

namespace paoxi {

inline constexpr std::uint16_t kArrayFormatVersion = 1;
inline constexpr std::size_t kArrayHeaderBytes = 32;
inline constexpr std::uint8_t kNoStage = 255;

enum class DType : std::uint16_t { kFloat32 = 1, kUInt8 = 2, kFloat64 = 3 };

struct ArrayHeader {
  DType dtype = DType::kFloat32;
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  std::uint8_t stage = kNoStage;
  std::uint32_t payload_crc = 0;

  std::size_t element_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
};

std::size_t dtype_size(DType t);

/// Encodes header + payload into bytes.
std::vector<std::byte> encode_array(DType dtype, std::array<std::uint32_t, 3> dims,
                                    std::span<const std::byte> payload_le, std::uint8_t stage);

/// Writes the file atomically (temp + rename). Returns CRC-32 of the file bytes.
std::uint32_t write_array_file(const std::filesystem::path& path, DType dtype,
                               std::array<std::uint32_t, 3> dims,
                               std::span<const std::byte> payload_le, std::uint8_t stage);

struct ArrayFile {
  ArrayHeader header;
  std::vector<std::byte> payload;   ///< little-endian
  std::uint32_t file_crc = 0;
};

/// Throws CorruptionError on bad magic, header CRC, size, or payload CRC.
ArrayFile read_array_file(const std::filesystem::path& path);
ArrayFile decode_array(std::span<const std::byte> bytes, const std::string& name);

// Typed helpers.
std::uint32_t write_image(const std::filesystem::path& path, const Image<float>& img,
                          std::uint8_t stage = kNoStage);
std::uint32_t write_mask(const std::filesystem::path& path, const Mask& mask);
std::uint32_t write_volume(const std::filesystem::path& path, const Volume<float>& vol);
std::uint32_t write_volume(const std::filesystem::path& path, const Volume<double>& vol);
std::uint32_t write_volume(const std::filesystem::path& path, const Volume<std::uint8_t>& vol);

Image<float> read_image(const std::filesystem::path& path, std::uint8_t* stage = nullptr);
Mask read_mask(const std::filesystem::path& path);
Volume<float> read_volume_f32(const std::filesystem::path& path);
Volume<double> read_volume_f64(const std::filesystem::path& path);
Volume<std::uint8_t> read_volume_u8(const std::filesystem::path& path);

Image<float> to_float(const Image<double>& img);
Image<double> to_double(const Image<float>& img);

// --- samples ----------------------------------------------------------------

struct SampleMetadata {
  std::uint64_t phantom_seed = 0;
  std::vector<Cylinder> vessels;
  double snr_db = 0.0;
  std::uint64_t noise_seed = 0;
  std::string pipeline_hash;
  std::string optics_checksum;
  std::uint64_t n_packets = 0;
  std::uint64_t transport_seed = 0;
  bool normalized_all_zero = false;
};

struct SampleRecord {
  std::string sample_id;
  Image<float> pa700;
  Image<float> pa900;
  Mask seg_gt;
  Image<float> so2_gt;
  SampleMetadata metadata;

  /// Throws ConfigError when arrays disagree in shape or the id is unusable.
  void validate() const;
};

inline const std::array<const char*, 4> kSampleFields{"pa700", "pa900", "seg_gt", "so2_gt"};

struct SampleFile {
  std::string name;
  std::string crc32;
};

enum class Split { kTrain, kVal, kTest };
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct SampleEntry {
  std::string sample_id;
  std::array<SampleFile, 4> files;  ///< ordered as kSampleFields
  SampleMetadata metadata;
  Split split = Split::kTrain;
};

/// Writes the four array files of a record. Returns the manifest entry.
SampleEntry write_sample(const std::filesystem::path& dir, const SampleRecord& record);

/// Reads and verifies a record against the checksums in its entry.
SampleRecord read_sample(const std::filesystem::path& dir, const SampleEntry& entry);

// --- splits and manifest -------------------------------------------------------

struct SplitAssignment {
  std::vector<std::string> train, val, test;
};

/// Deterministic shuffle; val and test get floor(n/10), train the rest.
SplitAssignment assign_splits(const std::vector<std::string>& sample_ids, std::uint64_t seed);

struct Manifest {
  static constexpr int kVersion = 1;
  int version = kVersion;
  nlohmann::json config;          ///< global config (grid, snr, seeds, pipeline)
  std::string optics_checksum;
  std::uint64_t split_seed = 0;
  std::vector<SampleEntry> samples;

  std::vector<const SampleEntry*> in_split(Split s) const;
  const SampleEntry& find(const std::string& id) const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
/// Throws ConfigError when the manifest is missing, ParseError when malformed.
Manifest read_manifest(const std::filesystem::path& dir);

/// Confirms every file listed in the manifest matches its checksum.
void verify_dataset(const std::filesystem::path& dir, const Manifest& m);

/// Exclusive advisory lock on a dataset directory (lock file created with O_EXCL).
class DatasetLock {
 public:
  explicit DatasetLock(const std::filesystem::path& dir);
  ~DatasetLock();
  DatasetLock(const DatasetLock&) = delete;
  DatasetLock& operator=(const DatasetLock&) = delete;

 private:
  std::filesystem::path path_;
};

nlohmann::json to_json(const Cylinder& c);
Cylinder cylinder_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SampleMetadata& m);
SampleMetadata metadata_from_json(const nlohmann::json& j);

}  // namespace paoxi
