// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "snnfuse/config.hpp"
#include "snnfuse/dataset.hpp"
#include "snnfuse/train.hpp"

namespace snnfuse {
namespace {

TrainConfig small_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.t_len = 16;
  c.hidden = 32;
  c.train_samples = 400;
  c.test_samples = 100;
  c.epochs = 3;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    parse_train_config(KeyValueConfig::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  const auto kv = KeyValueConfig::parse("# header\n  epochs = 7  \nengine=serial # inline\n\nlearning_rate=0.01\n");
  EXPECT_EQ(kv.entries().size(), 3u);
  const auto cfg = parse_train_config(kv);
  EXPECT_EQ(cfg.epochs, 7u);
  EXPECT_EQ(cfg.engine, ExecEngine::serial);
  EXPECT_FLOAT_EQ(cfg.learning_rate, 0.01f);
  EXPECT_EQ(cfg.t_len, 32u);
}

TEST(Config, TauSetsLeak) {
  const auto cfg = parse_train_config(KeyValueConfig::parse("tau=1.25\n"));
  EXPECT_FLOAT_EQ(cfg.lif.k_tau, 0.2f);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(config_error("epochs=3\nbogus\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("epochs=3\n\nwat=1\n").find("line 3"), std::string::npos);
  EXPECT_NE(config_error("epochs=x\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("epochs=3\nepochs=4\n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("engine=gpu\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("batch=\n").find("line 1"), std::string::npos);
  EXPECT_FALSE(config_error("tau=2\nk_tau=0.5\n").empty());
  EXPECT_FALSE(config_error("t_len=0\n").empty());
}

TEST(Config, BooleanAndNumberParsing) {
  const auto kv = KeyValueConfig::parse("a=true\nb=0\nc=2.5\nd=yes\n");
  EXPECT_TRUE(kv.get<bool>("a", false));
  EXPECT_FALSE(kv.get<bool>("b", true));
  EXPECT_DOUBLE_EQ(kv.get<double>("c", 0.0), 2.5);
  EXPECT_EQ(kv.get<int>("missing", 9), 9);
  EXPECT_THROW(kv.get<bool>("d", false), ConfigError);
  EXPECT_THROW(kv.get<int>("c", 0), ConfigError);
}

TEST(Engine, NamesRoundTrip) {
  for (auto e : {ExecEngine::serial, ExecEngine::fused, ExecEngine::pipeline}) {
    EXPECT_EQ(parse_engine(to_string(e)), e);
  }
  EXPECT_THROW(parse_engine("quantum"), std::invalid_argument);
}

TEST(Dataset, BlobsAreBalancedAndInRange) {
  const auto d = make_blobs(BlobSpec{101, 8, 3, 0.2}, 1, 2);
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.size(), 101u);
  std::size_t counts[3] = {0, 0, 0};
  for (auto l : d.labels) ++counts[l];
  EXPECT_EQ(counts[0], 34u);
  EXPECT_EQ(counts[2], 33u);
}

TEST(Dataset, SharedCentresDisjointSamples) {
  const auto a = make_blobs(BlobSpec{50, 4, 2, 0.0}, 7, 1);
  const auto b = make_blobs(BlobSpec{50, 4, 2, 0.0}, 7, 2);
  // Zero spread exposes the centres, which must match.
  EXPECT_EQ(a.intensities, b.intensities);
  const auto c = make_blobs(BlobSpec{50, 4, 2, 0.1}, 7, 1);
  const auto d = make_blobs(BlobSpec{50, 4, 2, 0.1}, 7, 2);
  EXPECT_NE(c.intensities, d.intensities);
}

TEST(Dataset, BinaryRoundTrip) {
  const auto d = make_blobs(BlobSpec{17, 5, 3, 0.1}, 3, 4);
  std::stringstream ss;
  write_dataset(ss, d);
  EXPECT_EQ(ss.str().size(), 24u + 17u * (5u * 4u + 4u));
  const auto back = read_dataset(ss);
  EXPECT_EQ(back.intensities, d.intensities);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.classes, 3u);

  const auto path = std::filesystem::temp_directory_path() / "snnfuse_dataset_test.bin";
  save_dataset(path.string(), d);
  EXPECT_EQ(load_dataset(path.string()).labels, d.labels);
  std::filesystem::remove(path);
}

TEST(Dataset, RejectsCorruptInput) {
  const auto d = make_blobs(BlobSpec{4, 2, 2, 0.1}, 3, 4);
  std::stringstream ss;
  write_dataset(ss, d);
  std::string s = ss.str();
  std::stringstream truncated(s.substr(0, s.size() - 2));
  EXPECT_THROW(read_dataset(truncated), std::runtime_error);
  s[s.size() - 4] = 9;  // label 9 with 2 classes
  std::stringstream bad_label(s);
  EXPECT_THROW(read_dataset(bad_label), std::exception);
  EXPECT_THROW(load_dataset("/nonexistent/snnfuse.bin"), std::runtime_error);
}

TEST(Training, UntrainedIsNearChance) {
  double sum = 0.0;
  const int seeds = 10;
  for (int s = 1; s <= seeds; ++s) {
    auto cfg = small_config(s);
    cfg.epochs = 0;
    const auto r = run_training(cfg);
    EXPECT_TRUE(r.epochs.empty());
    EXPECT_EQ(r.summary.best_acc, r.initial_test_acc);
    sum += r.initial_test_acc;
  }
  EXPECT_NEAR(sum / seeds, 0.5, 0.1);
}

TEST(Training, SerialAndFusedStreamsAreIdentical) {
  auto cfg = small_config(3);
  cfg.engine = ExecEngine::serial;
  const auto a = run_training(cfg);
  cfg.engine = ExecEngine::fused;
  const auto b = run_training(cfg);
  cfg.engine = ExecEngine::pipeline;
  cfg.workers = 3;
  const auto c = run_training(cfg);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EXPECT_TRUE(a.epochs[i].same_values(b.epochs[i])) << i;
    EXPECT_TRUE(a.epochs[i].same_values(c.epochs[i])) << i;
  }
}

TEST(Training, SeedControlsEverything) {
  const auto a = run_training(small_config(5));
  const auto b = run_training(small_config(5));
  const auto c = run_training(small_config(6));
  for (std::size_t i = 0; i < a.epochs.size(); ++i) EXPECT_TRUE(a.epochs[i].same_values(b.epochs[i]));
  EXPECT_FALSE(a.epochs[0].same_values(c.epochs[0]));
}

TEST(Training, LossDecreasesAndBlobsAreLearned) {
  auto cfg = small_config(2);
  cfg.t_len = 16;
  cfg.hidden = 128;
  cfg.epochs = 6;
  std::size_t seen = 0;
  const auto r = run_training(cfg, [&](const EpochMetrics& m) { EXPECT_EQ(m.epoch, ++seen); });
  ASSERT_EQ(r.epochs.size(), 6u);
  // Mean of the last two epochs against the first two.
  const double early = (r.epochs[0].train_loss + r.epochs[1].train_loss) / 2;
  const double late = (r.epochs[4].train_loss + r.epochs[5].train_loss) / 2;
  EXPECT_LT(late, early);
  EXPECT_GE(r.summary.best_acc, 0.95);
  EXPECT_GT(r.summary.train_time_s, 0.0);
}

TEST(Training, ExternalDatasetsMustComeInPairs) {
  auto cfg = small_config(1);
  cfg.train_data = "only-train.bin";
  EXPECT_THROW(run_training(cfg), ConfigError);
}

}  // namespace
}  // namespace snnfuse
