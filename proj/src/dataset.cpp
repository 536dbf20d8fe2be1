#include "pvp/dataset.hpp"

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "pvp/binary_io.hpp"
#include "pvp/errors.hpp"

namespace pvp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'P', 'V', 'P', 'E'};
constexpr std::uint32_t kRecordVersion = 1;
// magic, version, payload size, T, F, H, W, C, P, source, flags, failure, scenario, seed, regrasps, target, 2 poses
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4 + 4 + 2 * 4 + 4 + 8 + 4 + 4 + 2 * 7 * 8;

std::uint32_t crc(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(crc32(0L, b.data(), static_cast<uInt>(b.size())));
}

std::uint8_t flags_of(const EpisodeMeta& m) {
  return static_cast<std::uint8_t>((m.noise_aug ? 1 : 0) | (m.ccg ? 2 : 0) | (m.tr ? 4 : 0) | (m.success ? 8 : 0));
}

}  // namespace

std::vector<std::uint8_t> encode_episode(const Episode& e) {
  if (e.actions.empty()) throw DomainError("refusing to store an episode without tuples");
  if (!e.frames.empty() && e.frames.size() != e.actions.size() + 1) {
    throw DomainError("episode frame count must be actions + 1");
  }
  const std::uint32_t T = static_cast<std::uint32_t>(e.actions.size());
  const std::uint32_t F = static_cast<std::uint32_t>(e.frames.size());
  const std::uint64_t payload = static_cast<std::uint64_t>(F) * ObservationFrame::kSize * 4 + T * (6 * 8 + 1);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + payload + 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  bin::put<std::uint32_t>(out, kRecordVersion);
  bin::put<std::uint64_t>(out, payload);
  bin::put<std::uint32_t>(out, T);
  bin::put<std::uint32_t>(out, F);
  bin::put<std::uint16_t>(out, ObservationFrame::kHeight);
  bin::put<std::uint16_t>(out, ObservationFrame::kWidth);
  bin::put<std::uint16_t>(out, ObservationFrame::kChannels);
  bin::put<std::uint16_t>(out, ObservationFrame::kProprio);
  bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.meta.source));
  bin::put<std::uint8_t>(out, flags_of(e.meta));
  bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.meta.failure));
  bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.meta.scenario));
  bin::put<std::uint64_t>(out, e.meta.seed);
  bin::put<std::int32_t>(out, e.meta.regrasp_count);
  bin::put<std::int32_t>(out, e.meta.target);
  append_bytes(out, e.meta.place_start);
  append_bytes(out, e.meta.grasp_offset);
  for (const auto& f : e.frames) {
    for (float v : f.raster) bin::put<float>(out, v);
  }
  for (const auto& f : e.frames) {
    for (float v : f.proprio) bin::put<float>(out, v);
  }
  for (const auto& a : e.actions) {
    for (int d = 0; d < 6; ++d) bin::put<double>(out, a.delta[d]);
  }
  for (const auto& a : e.actions) bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(a.gripper));
  bin::put<std::uint32_t>(out, crc(out));
  return out;
}

Episode decode_episode(std::span<const std::uint8_t> bytes, std::size_t record) {
  if (bytes.size() < kHeaderBytes + 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw IntegrityError("bad record magic", record);
  }
  const auto body = bytes.first(bytes.size() - 4);
  if (bin::Reader(bytes.subspan(bytes.size() - 4)).get<std::uint32_t>() != crc(body)) {
    throw IntegrityError("record checksum mismatch", record);
  }
  bin::Reader rd(body.subspan(4));
  if (rd.get<std::uint32_t>() != kRecordVersion) throw IntegrityError("unsupported record version", record);
  rd.get<std::uint64_t>();
  Episode e;
  const std::uint32_t T = rd.get<std::uint32_t>();
  const std::uint32_t F = rd.get<std::uint32_t>();
  const int H = rd.get<std::uint16_t>(), W = rd.get<std::uint16_t>(), C = rd.get<std::uint16_t>(),
            P = rd.get<std::uint16_t>();
  if (H != ObservationFrame::kHeight || W != ObservationFrame::kWidth || C != ObservationFrame::kChannels ||
      P != ObservationFrame::kProprio) {
    throw IntegrityError("unexpected frame layout", record);
  }
  e.meta.source = static_cast<Source>(rd.get<std::uint8_t>());
  const std::uint8_t flags = rd.get<std::uint8_t>();
  e.meta.noise_aug = flags & 1;
  e.meta.ccg = flags & 2;
  e.meta.tr = flags & 4;
  e.meta.success = flags & 8;
  e.meta.failure = static_cast<FailureCause>(rd.get<std::uint8_t>());
  e.meta.scenario = static_cast<Scenario>(rd.get<std::uint8_t>());
  e.meta.seed = rd.get<std::uint64_t>();
  e.meta.regrasp_count = rd.get<std::int32_t>();
  e.meta.target = rd.get<std::int32_t>();
  auto read_pose_here = [&rd]() {
    std::array<double, 7> a{};
    for (auto& v : a) v = rd.get<double>();
    return pose_from_array(a);
  };
  e.meta.place_start = read_pose_here();
  e.meta.grasp_offset = read_pose_here();
  const std::uint64_t expect = static_cast<std::uint64_t>(F) * ObservationFrame::kSize * 4 + T * (6 * 8 + 1);
  if (rd.remaining() != expect) throw IntegrityError("record payload size mismatch", record);
  e.frames.resize(F);
  for (auto& f : e.frames) {
    for (auto& v : f.raster) v = rd.get<float>();
  }
  for (auto& f : e.frames) {
    for (auto& v : f.proprio) v = rd.get<float>();
  }
  e.actions.resize(T);
  for (auto& a : e.actions) {
    for (int d = 0; d < 6; ++d) a.delta[d] = rd.get<double>();
  }
  for (auto& a : e.actions) a.gripper = rd.get<std::uint8_t>();
  return e;
}

std::uint64_t write_episode(std::ostream& sink, const Episode& e) {
  const auto bytes = encode_episode(e);
  const auto pos = sink.tellp();
  const std::uint64_t offset = pos < 0 ? 0 : static_cast<std::uint64_t>(pos);
  sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw IoError("episode write failed", offset);
  return offset;
}

Episode read_episode(std::istream& source, std::uint64_t offset, std::size_t record) {
  source.clear();
  source.seekg(0, std::ios::end);
  const auto end = static_cast<std::uint64_t>(source.tellg());
  if (offset + kHeaderBytes + 4 > end) throw std::out_of_range("episode offset beyond end of data");
  source.seekg(static_cast<std::streamoff>(offset));
  std::vector<std::uint8_t> head(16);
  source.read(reinterpret_cast<char*>(head.data()), 16);
  if (!std::equal(kMagic, kMagic + 4, head.begin())) throw IntegrityError("bad record magic", record);
  const std::uint64_t payload = bin::Reader(std::span(head).subspan(8)).get<std::uint64_t>();
  const std::uint64_t total = kHeaderBytes + payload + 4;
  if (offset + total > end) throw IntegrityError("truncated record", record);
  std::vector<std::uint8_t> bytes(total);
  source.seekg(static_cast<std::streamoff>(offset));
  source.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(total));
  if (!source) throw IoError("episode read failed", offset);
  return decode_episode(bytes, record);
}

void DatasetManifest::validate() const {
  for (std::size_t i = 1; i < episodes.size(); ++i) {
    if (episodes[i].offset <= episodes[i - 1].offset) throw IntegrityError("manifest offsets not increasing", i);
  }
}

std::string DatasetManifest::to_json() const {
  json j;
  j["schema_version"] = schema;
  j["scenario"] = scenario;
  j["scene_hash"] = scene_hash;
  j["episode_count"] = episodes.size();
  json arr = json::array();
  for (const auto& e : episodes) {
    arr.push_back({{"offset", e.offset},
                   {"bytes", e.bytes},
                   {"seed", e.seed},
                   {"length", e.length},
                   {"source", to_string(e.source)},
                   {"noise_aug", e.noise_aug},
                   {"ccg", e.ccg},
                   {"tr", e.tr},
                   {"success", e.success}});
  }
  j["episodes"] = arr;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.schema = j.at("schema_version").get<std::uint32_t>();
    if (m.schema != kDatasetSchema) throw IntegrityError("unsupported dataset schema", 0);
    m.scenario = j.at("scenario").get<std::string>();
    m.scene_hash = j.at("scene_hash").get<std::uint64_t>();
    for (const auto& e : j.at("episodes")) {
      ManifestEntry me;
      me.offset = e.at("offset");
      me.bytes = e.at("bytes");
      me.seed = e.at("seed");
      me.length = e.at("length");
      me.source = e.at("source").get<std::string>() == "kinesthetic" ? Source::kinesthetic : Source::pvp;
      me.noise_aug = e.at("noise_aug");
      me.ccg = e.at("ccg");
      me.tr = e.at("tr");
      me.success = e.at("success");
      m.episodes.push_back(me);
    }
    if (j.at("episode_count").get<std::size_t>() != m.episodes.size()) {
      throw IntegrityError("manifest count does not match its records", m.episodes.size());
    }
  } catch (const json::exception& ex) {
    throw IntegrityError(std::string("malformed manifest: ") + ex.what(), 0);
  }
  m.validate();
  return m;
}

DatasetWriter::DatasetWriter(const std::string& dir, const SceneConfig& cfg) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  file_ = std::make_unique<std::ofstream>(fs::path(dir) / "episodes.bin", std::ios::binary | std::ios::trunc);
  if (!*file_) throw IoError("cannot create " + (fs::path(dir) / "episodes.bin").string(), 0);
  out_ = file_.get();
  manifest_.scenario = to_string(cfg.scenario);
  manifest_.scene_hash = scene_hash(cfg);
}

const ManifestEntry& DatasetWriter::append(const Episode& e) {
  const auto bytes = encode_episode(e);
  out_->write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!*out_) throw IoError("episode write failed", offset_);
  ManifestEntry me;
  me.offset = offset_;
  me.bytes = bytes.size();
  me.seed = e.meta.seed;
  me.length = static_cast<std::uint32_t>(e.actions.size());
  me.source = e.meta.source;
  me.noise_aug = e.meta.noise_aug;
  me.ccg = e.meta.ccg;
  me.tr = e.meta.tr;
  me.success = e.meta.success;
  offset_ += bytes.size();
  manifest_.episodes.push_back(me);
  return manifest_.episodes.back();
}

std::string DatasetWriter::finish() {
  out_->flush();
  if (!*out_) throw IoError("flush failed", offset_);
  file_.reset();
  out_ = nullptr;
  const auto path = (fs::path(dir_) / "manifest.json").string();
  std::ofstream m(path, std::ios::trunc);
  m << manifest_.to_json();
  if (!m) throw IoError("cannot write " + path, 0);
  return path;
}

DatasetManifest read_manifest(const std::string& dir) {
  const auto path = fs::path(dir) / "manifest.json";
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string(), 0);
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return DatasetManifest::from_json(text);
}

Episode read_dataset_episode(const std::string& dir, const DatasetManifest& m, std::size_t index) {
  if (index >= m.episodes.size()) throw std::out_of_range("episode index beyond manifest");
  std::ifstream f(fs::path(dir) / "episodes.bin", std::ios::binary);
  if (!f) throw IoError("cannot open episodes.bin in " + dir, 0);
  return read_episode(f, m.episodes[index].offset, index);
}

std::vector<Episode> read_dataset(const std::string& dir) {
  const DatasetManifest m = read_manifest(dir);
  std::ifstream f(fs::path(dir) / "episodes.bin", std::ios::binary);
  if (!f) throw IoError("cannot open episodes.bin in " + dir, 0);
  std::vector<Episode> out;
  out.reserve(m.episodes.size());
  for (std::size_t i = 0; i < m.episodes.size(); ++i) out.push_back(read_episode(f, m.episodes[i].offset, i));
  return out;
}

LengthStats length_stats(const std::vector<double>& v) {
  LengthStats s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  s.min = s.max = v.front();
  for (double x : v) {
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / v.size();
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / v.size());
  return s;
}

DatasetStats dataset_stats(const DatasetManifest& m) {
  DatasetStats s;
  std::vector<double> all;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& e : m.episodes) {
    const double L = e.length;
    all.push_back(L);
    groups[std::string("source=") + to_string(e.source)].push_back(L);
    groups[std::string("noise_aug=") + (e.noise_aug ? "1" : "0")].push_back(L);
    groups[std::string("ccg=") + (e.ccg ? "1" : "0")].push_back(L);
    groups[std::string("tr=") + (e.tr ? "1" : "0")].push_back(L);
    groups[std::string("success=") + (e.success ? "1" : "0")].push_back(L);
  }
  s.all = length_stats(all);
  for (const auto& [k, v] : groups) s.by_flag[k] = length_stats(v);
  return s;
}

std::string stats_json(const DatasetStats& s) {
  auto one = [](const LengthStats& l) {
    return json{{"count", l.count}, {"mean", l.mean}, {"std", l.std}, {"min", l.min}, {"max", l.max}};
  };
  json j;
  j["length"] = one(s.all);
  json by = json::object();
  for (const auto& [k, v] : s.by_flag) by[k] = one(v);
  j["by_flag"] = by;
  return j.dump(2) + "\n";
}

}  // namespace pvp
