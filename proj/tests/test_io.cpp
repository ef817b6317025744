#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "rffdm/errors.hpp"
#include "rffdm/io.hpp"
#include "rffdm/synth.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace rffdm;

namespace {

std::vector<LabeledObservation> sample_records(int per_device = 2) {
  synth::SynthesisConfig c;
  c.devices = synth::make_device_population(6, 20240601);
  auto records = synth::synthesize_dataset(c, per_device, 3);
  // Dataset samples are stored as f32; start from values f32 can hold exactly.
  for (auto& r : records) {
    for (auto& v : r.signal.samples) v = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
    for (auto& v : r.clean_ref->samples) v = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
    r.snr_db = static_cast<float>(r.snr_db);
  }
  records[1].clean_ref.reset();
  return records;
}

models::NoisePredictorConfig small_predictor() {
  models::NoisePredictorConfig c;
  c.model_dim = 16;
  c.num_blocks = 1;
  c.num_heads = 2;
  c.step_embed_dim = 16;
  c.patch_len = 16;
  c.ffn_dim = 32;
  return c;
}

eval::SweepResult sample_sweep() {
  eval::SweepResult r;
  r.snr_points_db = eval::default_snr_grid();
  r.metric_name = "accuracy";
  for (std::size_t i = 0; i < r.snr_points_db.size(); ++i) {
    r.values_denoised.push_back(0.5 + 0.05 * static_cast<double>(i) + 1.0 / 3.0 * 1e-3);
    r.values_noisy_or_baseline.push_back(0.3 + 0.07 * static_cast<double>(i));
  }
  r.num_trials = 600;
  r.seed = 42;
  return r;
}

}  // namespace

TEST(DatasetFile, RoundTripIsExact) {
  test::TempDir dir("ds");
  const auto records = sample_records();
  io::write_dataset(records, dir / "a.ds");
  const auto back = io::read_dataset(dir / "a.ds");
  EXPECT_EQ(back.header.num_records, records.size());
  EXPECT_EQ(back.header.signal_len, 320u);
  EXPECT_EQ(back.header.num_classes, 6u);
  EXPECT_EQ(back.records, records);
  EXPECT_EQ(io::encode_dataset(back.records), io::encode_dataset(records));
}

TEST(DatasetFile, HeaderLayout) {
  const auto bytes = io::encode_dataset(sample_records(1));
  ASSERT_GE(bytes.size(), io::kDatasetHeaderSize);
  EXPECT_EQ(bytes.substr(0, 8), "RFFDSET1");
  std::uint64_t n = 0;
  for (int k = 7; k >= 0; --k) n = (n << 8) | static_cast<unsigned char>(bytes[12 + k]);
  EXPECT_EQ(n, 6u);
  // One record with clean reference: 4 + 4 + 2560 + 1 + 2560 bytes.
  EXPECT_EQ(bytes.size(), io::kDatasetHeaderSize + 5 * (4 + 4 + 2560 + 1 + 2560) + (4 + 4 + 2560 + 1));
}

TEST(DatasetFile, EmptyDataset) {
  const auto bytes = io::encode_dataset({}, io::DatasetMeta{320, 20e6, 6});
  EXPECT_EQ(bytes.size(), io::kDatasetHeaderSize);
  const auto back = io::decode_dataset(bytes);
  EXPECT_TRUE(back.records.empty());
  EXPECT_EQ(back.header.num_classes, 6u);
}

TEST(DatasetFile, CorruptMagicReportsOffsetZero) {
  auto bytes = io::encode_dataset(sample_records(1));
  bytes[0] = 'X';
  try {
    io::decode_dataset(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(DatasetFile, TruncationAndTrailingBytes) {
  const auto bytes = io::encode_dataset(sample_records(1));
  for (std::size_t cut : {std::size_t{3}, io::kDatasetHeaderSize - 1, io::kDatasetHeaderSize + 10, bytes.size() - 1})
    EXPECT_THROW(io::decode_dataset(bytes.substr(0, cut)), ParseError) << cut;
  EXPECT_THROW(io::decode_dataset(bytes + "x"), ParseError);
}

TEST(DatasetFile, RejectsBadLabelsAndNonFinite) {
  auto records = sample_records(1);
  EXPECT_THROW(io::encode_dataset(records, io::DatasetMeta{320, 20e6, 3}), ConfigError);
  records[0].signal.samples.pop_back();
  EXPECT_THROW(io::encode_dataset(records), ShapeError);

  auto bytes = io::encode_dataset(sample_records(1));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + io::kDatasetHeaderSize + 8, &nan, 4);
  EXPECT_THROW(io::decode_dataset(bytes), ParseError);
}

TEST(DatasetFile, MissingFileIsIoError) {
  EXPECT_THROW(io::read_dataset("/nonexistent/rffdm/x.ds"), IoError);
}

TEST(CheckpointFile, PredictorRoundTripGivesIdenticalInference) {
  test::TempDir dir("ckpt");
  models::NoisePredictor dm(small_predictor(), 4);
  test::randomize(dm.params(), 5, 0.2);
  io::save_predictor(dm, {1000, 1e-5, 1.5e-3, 10}, dir / "dm.ckpt");
  const auto back = io::load_predictor(dir / "dm.ckpt");
  EXPECT_EQ(back.model.config(), dm.config());
  EXPECT_EQ(back.model.params(), dm.params());
  EXPECT_EQ(back.schedule.t_prime, 10);
  EXPECT_EQ(back.schedule.beta_max, 1.5e-3);
  const auto x = test::random_signal(320, 6);
  nn::Graph g1(false), g2(false);
  EXPECT_EQ(g1.value(dm.forward(g1, x, 123)), g2.value(back.model.forward(g2, x, 123)));
}

TEST(CheckpointFile, ClassifierRoundTrip) {
  test::TempDir dir("ckpt");
  models::ClassifierConfig cfg;
  cfg.temporal_depth = 1;
  cfg.class_depth = 1;
  models::Classifier clf(cfg, 2);
  test::randomize(clf.params(), 3, 0.05);
  io::save_classifier(clf, {false, 0, training::SnrSource::kEstimate}, dir / "c.ckpt");
  const auto back = io::load_classifier(dir / "c.ckpt");
  EXPECT_FALSE(back.pipeline.denoise);
  EXPECT_EQ(back.pipeline.snr_source, training::SnrSource::kEstimate);
  const auto x = test::random_signal(320, 7);
  EXPECT_EQ(back.model.logits(x), clf.logits(x));
}

TEST(CheckpointFile, FlippedByteFailsChecksum) {
  models::NoisePredictor dm(small_predictor(), 4);
  io::Checkpoint c{io::CheckpointKind::kNoisePredictor, "{}", dm.params()};
  const auto bytes = io::encode_checkpoint(c);
  for (std::size_t pos : {std::size_t{8}, std::size_t{20}, bytes.size() / 2, bytes.size() - 5}) {
    auto bad = bytes;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x01);
    EXPECT_THROW(io::decode_checkpoint(bad), ChecksumError) << pos;
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::decode_checkpoint(bad_magic), ParseError);
  EXPECT_THROW(io::decode_checkpoint(bytes.substr(0, 3)), ParseError);
}

TEST(CheckpointFile, WrongKindIsConfigError) {
  test::TempDir dir("ckpt");
  const models::NoisePredictor dm(small_predictor(), 4);
  io::save_predictor(dm, {}, dir / "dm.ckpt");
  EXPECT_THROW(io::load_classifier(dir / "dm.ckpt"), ConfigError);
  models::ClassifierConfig cfg;
  cfg.temporal_depth = 1;
  cfg.class_depth = 1;
  io::save_classifier(models::Classifier(cfg, 1), {}, dir / "c.ckpt");
  EXPECT_THROW(io::load_predictor(dir / "c.ckpt"), ConfigError);
}

TEST(SweepCsv, LayoutAndRoundTrip) {
  test::TempDir dir("csv");
  const auto r = sample_sweep();
  io::write_sweep_csv(r, dir / "s.csv");
  const auto text = io::read_file(dir / "s.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.substr(0, text.find('\n')), "snr_db,metric,value_a,value_b,trials,seed");
  const auto back = io::read_sweep_csv(dir / "s.csv");
  ASSERT_EQ(back.snr_points_db, r.snr_points_db);
  EXPECT_EQ(back.metric_name, "accuracy");
  EXPECT_EQ(back.num_trials, 600);
  EXPECT_EQ(back.seed, 42u);
  for (std::size_t i = 0; i < r.snr_points_db.size(); ++i) {
    EXPECT_NEAR(back.values_denoised[i], r.values_denoised[i], 1e-6);
    EXPECT_NEAR(back.values_noisy_or_baseline[i], r.values_noisy_or_baseline[i], 1e-6);
  }
  EXPECT_EQ(io::format_sweep_csv(r), io::format_sweep_csv(sample_sweep()));
}

TEST(SweepCsv, RejectsOutOfRangeValues) {
  auto r = sample_sweep();
  r.values_denoised[0] = 1.5;
  EXPECT_THROW(io::format_sweep_csv(r), ConfigError);
}
