#include "rffdm/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "rffdm/config.hpp"
#include "rffdm/errors.hpp"

namespace rffdm::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }

  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  void u8(std::uint8_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::string& str() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const std::string& data, std::size_t limit) : data_(data), limit_(limit) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return limit_ - pos_; }

  void need(std::size_t n, const char* what) const {
    if (limit_ - pos_ < n) throw ParseError(std::string("truncated file while reading ") + what, pos_);
  }

  template <typename U>
  U uint(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::uint8_t u8(const char* what) { return uint<std::uint8_t>(what); }
  std::uint32_t u32(const char* what) { return uint<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return uint<std::uint64_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& data_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

void write_samples(ByteWriter& w, const ComplexSignal& sig) {
  for (const auto& c : sig.samples) {
    w.f32(static_cast<float>(c.real()));
    w.f32(static_cast<float>(c.imag()));
  }
}

ComplexSignal read_samples(ByteReader& r, std::uint32_t len, double rate, const char* what) {
  r.need(static_cast<std::size_t>(len) * 8, what);
  ComplexSignal sig;
  sig.sample_rate_hz = rate;
  sig.samples.resize(len);
  for (auto& c : sig.samples) {
    const std::size_t at = r.offset();
    const float re = r.f32(what);
    const float im = r.f32(what);
    if (!std::isfinite(re) || !std::isfinite(im)) throw ParseError(std::string("non-finite sample in ") + what, at);
    c = Complex{re, im};
  }
  return sig;
}

std::uint32_t crc32_of(const char* p, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- dataset ----

std::string encode_dataset(const std::vector<LabeledObservation>& records, std::optional<DatasetMeta> meta) {
  DatasetMeta m = meta.value_or(DatasetMeta{});
  if (!records.empty()) {
    m.signal_len = static_cast<std::uint32_t>(records.front().signal.size());
    m.sample_rate_hz = records.front().signal.sample_rate_hz;
    if (!meta) {
      int max_label = 0;
      for (const auto& r : records) max_label = std::max(max_label, r.device_id);
      m.num_classes = static_cast<std::uint32_t>(max_label + 1);
    }
  }
  if (m.signal_len == 0) throw ShapeError("dataset: signal_len must be > 0");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.signal.size() != m.signal_len)
      throw ShapeError("dataset: record " + std::to_string(i) + " has length " + std::to_string(r.signal.size()) +
                       ", expected " + std::to_string(m.signal_len));
    if (r.clean_ref && r.clean_ref->size() != m.signal_len)
      throw ShapeError("dataset: clean reference of record " + std::to_string(i) + " has the wrong length");
    if (r.device_id < 0 || static_cast<std::uint32_t>(r.device_id) >= m.num_classes)
      throw ConfigError("dataset: record " + std::to_string(i) + " label " + std::to_string(r.device_id) +
                        " outside [0, " + std::to_string(m.num_classes) + ")");
  }

  ByteWriter w;
  w.bytes(kDatasetMagic, 8);
  w.u32(kDatasetVersion);
  w.u64(records.size());
  w.u32(m.signal_len);
  w.f64(m.sample_rate_hz);
  w.u32(m.num_classes);
  for (const auto& r : records) {
    w.u32(static_cast<std::uint32_t>(r.device_id));
    w.f32(static_cast<float>(r.snr_db));
    write_samples(w, r.signal);
    w.u8(r.clean_ref ? 1 : 0);
    if (r.clean_ref) write_samples(w, *r.clean_ref);
  }
  return std::move(w.str());
}

void write_dataset(const std::vector<LabeledObservation>& records, const std::filesystem::path& path,
                   std::optional<DatasetMeta> meta) {
  write_file(path, encode_dataset(records, meta));
}

Dataset decode_dataset(const std::string& bytes) {
  ByteReader r(bytes, bytes.size());
  Dataset ds;
  const std::string magic = r.take(8, "magic");
  for (std::size_t i = 0; i < 8; ++i)
    if (magic[i] != kDatasetMagic[i]) throw ParseError("bad dataset magic", i);

  std::size_t at = r.offset();
  ds.header.version = r.u32("version");
  if (ds.header.version != kDatasetVersion)
    throw ParseError("unsupported dataset version " + std::to_string(ds.header.version), at);
  at = r.offset();
  ds.header.num_records = r.u64("num_records");
  at = r.offset();
  ds.header.signal_len = r.u32("signal_len");
  if (ds.header.signal_len == 0) throw ParseError("signal_len must be > 0", at);
  at = r.offset();
  ds.header.sample_rate_hz = r.f64("sample_rate_hz");
  if (!(std::isfinite(ds.header.sample_rate_hz) && ds.header.sample_rate_hz > 0))
    throw ParseError("sample_rate_hz must be positive", at);
  at = r.offset();
  ds.header.num_classes = r.u32("num_classes");
  if (ds.header.num_records > 0 && ds.header.num_classes == 0)
    throw ParseError("num_classes must be > 0 when records are present", at);

  // Smallest possible record: label + snr + signal + flag.
  const std::size_t min_record = 4 + 4 + static_cast<std::size_t>(ds.header.signal_len) * 8 + 1;
  if (ds.header.num_records > r.remaining() / min_record + 1)
    throw ParseError("num_records exceeds file size", r.offset());

  ds.records.reserve(static_cast<std::size_t>(ds.header.num_records));
  for (std::uint64_t i = 0; i < ds.header.num_records; ++i) {
    LabeledObservation obs;
    at = r.offset();
    const std::uint32_t label = r.u32("label");
    if (label >= ds.header.num_classes)
      throw ParseError("label " + std::to_string(label) + " outside [0, num_classes)", at);
    obs.device_id = static_cast<int>(label);
    at = r.offset();
    const float snr = r.f32("snr_db");
    if (std::isnan(snr)) throw ParseError("snr_db is NaN", at);
    obs.snr_db = snr;
    obs.signal = read_samples(r, ds.header.signal_len, ds.header.sample_rate_hz, "signal");
    at = r.offset();
    const std::uint8_t flag = r.u8("clean flag");
    if (flag > 1) throw ParseError("clean flag must be 0 or 1", at);
    if (flag == 1) obs.clean_ref = read_samples(r, ds.header.signal_len, ds.header.sample_rate_hz, "clean reference");
    ds.records.push_back(std::move(obs));
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after last record", r.offset());
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

// ---- checkpoints ----

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(kCheckpointMagic, 8);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.kind));
  w.u32(static_cast<std::uint32_t>(ckpt.config_json.size()));
  w.bytes(ckpt.config_json.data(), ckpt.config_json.size());
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, p] : ckpt.params) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) w.f64(p.value.data()[i]);
  }
  w.u32(crc32_of(w.str().data(), w.str().size()));
  return std::move(w.str());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8) throw ParseError("truncated file while reading magic", 0);
  for (std::size_t i = 0; i < 8; ++i)
    if (bytes[i] != kCheckpointMagic[i]) throw ParseError("bad checkpoint magic", i);
  if (bytes.size() < 12) throw ParseError("truncated checkpoint", bytes.size());
  const std::size_t body = bytes.size() - 4;
  {
    ByteReader tail(bytes, bytes.size());
    tail.take(body, "body");
    const std::uint32_t stored = tail.u32("checksum");
    if (stored != crc32_of(bytes.data(), body)) throw ChecksumError("checkpoint checksum mismatch");
  }

  ByteReader r(bytes, body);
  r.take(8, "magic");
  Checkpoint ckpt;
  std::size_t at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), at);
  at = r.offset();
  const std::uint32_t kind = r.u32("kind");
  if (kind != 1 && kind != 2) throw ParseError("unknown checkpoint kind " + std::to_string(kind), at);
  ckpt.kind = static_cast<CheckpointKind>(kind);
  const std::uint32_t config_len = r.u32("config length");
  ckpt.config_json = r.take(config_len, "config");
  const std::uint32_t count = r.u32("array count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32("name length");
    at = r.offset();
    std::string name = r.take(name_len, "name");
    if (name.empty() || ckpt.params.contains(name)) throw ParseError("empty or duplicate array name", at);
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    if (n > r.remaining() / 8) throw ParseError("array " + name + " exceeds file size", r.offset());
    nn::Mat m(rows, cols);
    for (std::size_t k = 0; k < n; ++k) m.data()[k] = r.f64("payload");
    ckpt.params.add(name, std::move(m));
  }
  if (r.remaining() != 0) throw ParseError("unexpected bytes before checksum", r.offset());
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

namespace {

nlohmann::json parse_snapshot(const Checkpoint& ckpt) {
  try {
    return nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
}

const nlohmann::json& member(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("checkpoint config lacks ") + key);
  return j.at(key);
}

const char* kind_name(CheckpointKind k) {
  return k == CheckpointKind::kNoisePredictor ? "noise predictor" : "classifier";
}

}  // namespace

void save_predictor(const models::NoisePredictor& model, const ScheduleSnapshot& schedule,
                    const std::filesystem::path& path) {
  nlohmann::json j = {{"model", config::to_json(model.config())},
                      {"schedule",
                       {{"num_steps", schedule.num_steps},
                        {"beta_min", schedule.beta_min},
                        {"beta_max", schedule.beta_max},
                        {"t_prime", schedule.t_prime}}}};
  save_checkpoint({CheckpointKind::kNoisePredictor, j.dump(), model.params()}, path);
}

PredictorCheckpoint load_predictor(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != CheckpointKind::kNoisePredictor)
    throw ConfigError("expected a noise predictor checkpoint, found a " + std::string(kind_name(ckpt.kind)));
  const auto j = parse_snapshot(ckpt);
  const auto cfg = config::predictor_config_from_json(member(j, "model"), "model");
  const auto& s = member(j, "schedule");
  ScheduleSnapshot snap;
  try {
    snap.num_steps = s.at("num_steps").get<int>();
    snap.beta_min = s.at("beta_min").get<double>();
    snap.beta_max = s.at("beta_max").get<double>();
    snap.t_prime = s.at("t_prime").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint schedule snapshot: ") + e.what());
  }
  return {models::NoisePredictor(cfg, std::move(ckpt.params)), snap};
}

void save_classifier(const models::Classifier& model, const PipelineManifest& pipeline,
                     const std::filesystem::path& path) {
  nlohmann::json j = {{"model", config::to_json(model.config())},
                      {"pipeline",
                       {{"denoise", pipeline.denoise},
                        {"t_prime", pipeline.t_prime},
                        {"snr_source", training::to_string(pipeline.snr_source)}}}};
  save_checkpoint({CheckpointKind::kClassifier, j.dump(), model.params()}, path);
}

ClassifierCheckpoint load_classifier(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != CheckpointKind::kClassifier)
    throw ConfigError("expected a classifier checkpoint, found a " + std::string(kind_name(ckpt.kind)));
  const auto j = parse_snapshot(ckpt);
  const auto cfg = config::classifier_config_from_json(member(j, "model"), "model");
  const auto& p = member(j, "pipeline");
  PipelineManifest manifest;
  try {
    manifest.denoise = p.at("denoise").get<bool>();
    manifest.t_prime = p.at("t_prime").get<int>();
    manifest.snr_source = training::parse_snr_source(p.at("snr_source").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint pipeline snapshot: ") + e.what());
  }
  return {models::Classifier(cfg, std::move(ckpt.params)), manifest};
}

// ---- CSV ----

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_sweep_csv(const eval::SweepResult& result) {
  eval::validate(result);
  std::string out = "snr_db,metric,value_a,value_b,trials,seed\n";
  for (std::size_t i = 0; i < result.snr_points_db.size(); ++i) {
    out += fmt6(result.snr_points_db[i]) + "," + result.metric_name + "," + fmt6(result.values_denoised[i]) + "," +
           fmt6(result.values_noisy_or_baseline[i]) + "," + std::to_string(result.num_trials) + "," +
           std::to_string(result.seed) + "\n";
  }
  return out;
}

void write_sweep_csv(const eval::SweepResult& result, const std::filesystem::path& path) {
  write_file(path, format_sweep_csv(result));
}

eval::SweepResult read_sweep_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != "snr_db,metric,value_a,value_b,trials,seed")
    throw ParseError("sweep CSV header mismatch", 0);
  offset += line.size() + 1;
  eval::SweepResult r;
  bool first = true;
  while (std::getline(in, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != 6) throw ParseError("sweep CSV row must have 6 fields", offset);
    try {
      std::size_t used = 0;
      auto num = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      };
      r.snr_points_db.push_back(num(cells[0]));
      r.values_denoised.push_back(num(cells[2]));
      r.values_noisy_or_baseline.push_back(num(cells[3]));
      const int trials = std::stoi(cells[4]);
      const std::uint64_t seed = std::stoull(cells[5]);
      if (first) {
        r.metric_name = cells[1];
        r.num_trials = trials;
        r.seed = seed;
        first = false;
      } else if (cells[1] != r.metric_name || trials != r.num_trials || seed != r.seed) {
        throw ParseError("sweep CSV rows disagree on metric, trials or seed", offset);
      }
    } catch (const std::logic_error&) {
      throw ParseError("malformed number in sweep CSV", offset);
    }
    offset += line.size() + 1;
  }
  eval::validate(r);
  return r;
}

void write_history_csv(const std::vector<training::EpochRecord>& history, const std::filesystem::path& path) {
  std::string out = "epoch,train_loss,val_loss,learning_rate,train_accuracy,val_accuracy\n";
  char buf[256];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.6g,%.6g,%.6g\n", e.epoch, e.train_loss, e.val_loss,
                  e.learning_rate, e.train_accuracy, e.val_accuracy);
    out += buf;
  }
  write_file(path, out);
}

}  // namespace rffdm::io
