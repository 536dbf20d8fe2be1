#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "pvp/collect.hpp"

namespace pvp {

constexpr std::uint32_t kDatasetSchema = 1;

struct ManifestEntry {
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  std::uint64_t seed = 0;
  std::uint32_t length = 0;  // actions
  Source source = Source::pvp;
  bool noise_aug = false;
  bool ccg = false;
  bool tr = false;
  bool success = false;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::uint32_t schema = kDatasetSchema;
  std::string scenario;
  std::uint64_t scene_hash = 0;
  std::vector<ManifestEntry> episodes;
  bool operator==(const DatasetManifest&) const = default;

  /// Throws IntegrityError unless offsets strictly increase.
  void validate() const;
  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

/// Serialized record: header, f32 frames, f64 action vectors, gripper bytes, CRC32.
std::vector<std::uint8_t> encode_episode(const Episode& e);
/// `record` only labels errors.
Episode decode_episode(std::span<const std::uint8_t> bytes, std::size_t record = 0);

/// Appends one record; returns its offset. Throws DomainError for an empty episode, IoError on write failure.
std::uint64_t write_episode(std::ostream& sink, const Episode& e);
/// Throws std::out_of_range for an offset outside the stream, IntegrityError on a bad record.
Episode read_episode(std::istream& source, std::uint64_t offset, std::size_t record = 0);

/// Directory-backed dataset: episodes.bin plus manifest.json.
class DatasetWriter {
 public:
  DatasetWriter(const std::string& dir, const SceneConfig& cfg);
  const ManifestEntry& append(const Episode& e);
  /// Writes the manifest; returns its path.
  std::string finish();
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  std::string dir_;
  std::ofstream* out_ = nullptr;
  std::unique_ptr<std::ofstream> file_;
  DatasetManifest manifest_;
  std::uint64_t offset_ = 0;
};

DatasetManifest read_manifest(const std::string& dir);
Episode read_dataset_episode(const std::string& dir, const DatasetManifest& m, std::size_t index);
std::vector<Episode> read_dataset(const std::string& dir);

struct LengthStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

LengthStats length_stats(const std::vector<double>& lengths);

struct DatasetStats {
  LengthStats all;
  std::map<std::string, LengthStats> by_flag;  // keyed "source=pvp", "noise_aug=1", "success=1", ...
};

/// Episode length summary taken from the manifest.
DatasetStats dataset_stats(const DatasetManifest& m);
std::string stats_json(const DatasetStats& s);

}  // namespace pvp
