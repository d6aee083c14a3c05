// Trainer tests: schedule trivia, stage freezing, optimization progress,
// checkpoint/resume bit-exactness, source mixing frequencies, and the
// frontend pre-training loop.

// Copyright 2026  Seqdiar Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "seqdiar/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace seqdiar {
namespace {

namespace fs = std::filesystem;

// Small enough that a train step takes tens of milliseconds.
ModelConfig tiny_model_config(double dropout = 0.0) {
  ModelConfig mc;
  mc.frontend.widths = {4, 4, 8, 8};
  mc.frontend.blocks = {1, 1, 1, 1};
  mc.frontend.embed_dim = 16;
  mc.encoder.dim = 16;
  mc.encoder.num_blocks = 1;
  mc.encoder.heads = 2;
  mc.encoder.ffn_dim = 32;
  mc.encoder.conv_kernel = 7;
  mc.encoder.dropout = dropout;
  mc.decoder.dim = 16;
  mc.decoder.num_blocks = 1;
  mc.decoder.heads = 2;
  mc.decoder.ffn_dim = 32;
  mc.decoder.dropout = dropout;
  mc.decoder.embed_dim = 16;
  mc.decoder.num_slots = 3;
  mc.chunk_seconds = 2.0;
  mc.output_resolution = 0.08;  // 25 output frames
  return mc;
}

Seq2SeqTsvad make_model(uint64_t seed, double dropout = 0.0) {
  Rng rng(seed);
  return Seq2SeqTsvad(tiny_model_config(dropout), rng);
}

// Six voices: even when profile augmentation swaps every slot to a decoy it
// needs at most l_dec = 3 absent speakers, and 6 - 2 present leaves 4.
const ToyCorpus& sim_corpus() {
  static const ToyCorpus corpus = [] {
    CorpusParams p;
    p.num_speakers = 6;
    p.utts_per_speaker = 3;
    p.utt_dur_lo = 1.0;
    p.utt_dur_hi = 1.8;
    p.seed = 5;
    return synth_toy_corpus(p);
  }();
  return corpus;
}

const ToyCorpus& heldout_corpus() {
  static const ToyCorpus corpus = [] {
    CorpusParams p;
    p.num_speakers = 6;
    p.utts_per_speaker = 3;
    p.utt_dur_lo = 1.0;
    p.utt_dur_hi = 1.8;
    p.seed = 6;
    p.domain = VoiceDomain::held_out();
    p.speaker_prefix = "real";
    return synth_toy_corpus(p);
  }();
  return corpus;
}

// Orthonormal stand-in profiles; real banks come from the frontend.
EmbeddingBank unit_bank(const ToyCorpus& corpus) {
  EmbeddingBank bank;
  int i = 0;
  for (const auto& id : corpus.speakers) {
    std::vector<double> v(16, 0.0);
    v[static_cast<size_t>(i++ % 16)] = 1.0;
    bank[id] = v;
  }
  return bank;
}

ExampleConfig tiny_example() {
  ExampleConfig ec;
  ec.duration = 2.0;
  ec.resolution = 0.08;
  ec.l_dec = 3;
  ec.min_speakers = 1;
  ec.max_speakers = 2;
  return ec;
}

TrainConfig tiny_train(char stage) {
  TrainConfig cfg = default_train_config(stage);
  cfg.lr = 1e-3;
  cfg.warmup_steps = 2;
  cfg.batch_size = 1;
  cfg.example = tiny_example();
  return cfg;
}

TrainSources all_sources(const EmbeddingBank& sim_bank, const EmbeddingBank& real_bank) {
  TrainSources src;
  src.sim = &sim_corpus();
  src.sim_bank = &sim_bank;
  src.real = &heldout_corpus();
  src.real_bank = &real_bank;
  return src;
}

std::string fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("seqdiar_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

bool params_bit_equal(const Seq2SeqTsvad& a, const Seq2SeqTsvad& b) {
  auto pa = a.params(), pb = b.params();
  if (pa.items.size() != pb.items.size()) return false;
  for (size_t i = 0; i < pa.items.size(); ++i) {
    if (pa.items[i].first != pb.items[i].first) return false;
    const auto& da = pa.items[i].second->data;
    const auto& db = pb.items[i].second->data;
    if (da.size() != db.size()) return false;
    if (std::memcmp(da.data(), db.data(), da.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

bool subtree_bit_equal(const Seq2SeqTsvad& m, const std::vector<std::vector<double>>& snapshot,
                       const std::string& prefix) {
  auto pm = m.params();
  size_t k = 0;
  for (const auto& [name, t] : pm.items) {
    if (name.rfind(prefix, 0) != 0) continue;
    if (std::memcmp(t->data.data(), snapshot[k].data(), t->data.size() * sizeof(double)) != 0)
      return false;
    ++k;
  }
  return true;
}

std::vector<std::vector<double>> snapshot_subtree(const Seq2SeqTsvad& m, const std::string& prefix) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.params().items)
    if (name.rfind(prefix, 0) == 0) out.push_back(t->data);
  return out;
}

TEST(LrSchedule, WarmupEndpoints) {
  TrainConfig cfg;
  cfg.lr = 2e-4;
  cfg.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(5, cfg), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(10, cfg), 2e-4);
  EXPECT_DOUBLE_EQ(lr_at(500, cfg), 2e-4);
}

TEST(DrawsReal, StageGatesAndRatio) {
  TrainConfig a = tiny_train('A');
  TrainConfig b = tiny_train('B');
  TrainConfig c = tiny_train('C');
  a.seed = b.seed = c.seed = 123;
  for (int64_t i = 0; i < 200; ++i) {
    EXPECT_FALSE(draws_real(a, "train.A", i));
    EXPECT_TRUE(draws_real(c, "train.C", i));
  }
  int64_t real = 0;
  const int64_t n = 10000;
  for (int64_t i = 0; i < n; ++i) real += draws_real(b, "train.B", i) ? 1 : 0;
  const double frac = static_cast<double>(real) / static_cast<double>(n);
  EXPECT_NEAR(frac, 0.2, 0.02);
  // The gate is a pure function of (seed, purpose, index).
  EXPECT_EQ(draws_real(b, "train.B", 77), draws_real(b, "train.B", 77));
  EXPECT_NE(derive_seed(b.seed, "train.B.source", 1), derive_seed(b.seed, "train.B.source", 2));
}

TEST(TrainStep, OverfitsASingleBatch) {
  auto model = make_model(42);
  model.frontend.set_trainable(false);  // stage-A regime, also faster
  auto pm = model.params();
  Adam opt(pm.tensors(), 1e-3);

  ExampleConfig ec = tiny_example();
  ec.min_speakers = 1;
  ec.max_speakers = 1;
  ec.l_dec = 2;
  ec.augment_profiles_enabled = false;
  const auto bank = unit_bank(sim_corpus());
  Rng ex_rng(404);
  std::vector<TrainingExample> batch{make_training_example(sim_corpus(), bank, ec, ex_rng)};

  Rng dropout_rng(1);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    const double lr = warmup_lr(3e-3, step, 10);
    last = train_step(model, opt, batch, lr, 5.0, dropout_rng);
    if (step == 0) first = last;
  }
  EXPECT_LT(last, 0.05);
  EXPECT_LT(last, first * 0.5);
  EXPECT_EQ(opt.step_count(), 200);
}

TEST(TrainStep, ThrowsOnNonFiniteLoss) {
  auto model = make_model(9);
  auto pm = model.params();
  pm.items.front().second->data[0] = std::numeric_limits<double>::quiet_NaN();
  Adam opt(pm.tensors(), 1e-3);
  const auto bank = unit_bank(sim_corpus());
  Rng ex_rng(8);
  std::vector<TrainingExample> batch{
      make_training_example(sim_corpus(), bank, tiny_example(), ex_rng)};
  Rng dropout_rng(1);
  EXPECT_THROW(train_step(model, opt, batch, 1e-3, 5.0, dropout_rng), NumericError);
}

TEST(RunStage, StageAFreezesFrontendStageBDoesNot) {
  const auto sim_bank = unit_bank(sim_corpus());
  const auto real_bank = unit_bank(heldout_corpus());
  const auto src = all_sources(sim_bank, real_bank);

  auto model_a = make_model(11);
  const auto frontend_before = snapshot_subtree(model_a, "model.frontend.");
  const auto head_before = snapshot_subtree(model_a, "model.head.");
  TrainConfig cfg = tiny_train('A');
  cfg.max_steps = 2;
  const auto res = run_stage(model_a, src, cfg, fresh_dir("freezeA"));
  EXPECT_EQ(res.steps_completed, 2);
  EXPECT_TRUE(subtree_bit_equal(model_a, frontend_before, "model.frontend."));
  EXPECT_FALSE(subtree_bit_equal(model_a, head_before, "model.head."));
  EXPECT_TRUE(fs::exists(res.checkpoint_path));
  EXPECT_TRUE(fs::exists(res.loss_csv_path));

  auto model_b = make_model(11);
  const auto frontend_b = snapshot_subtree(model_b, "model.frontend.");
  TrainConfig cfg_b = tiny_train('B');
  cfg_b.max_steps = 2;
  run_stage(model_b, src, cfg_b, fresh_dir("freezeB"));
  EXPECT_FALSE(subtree_bit_equal(model_b, frontend_b, "model.frontend."));
}

TEST(RunStage, LossCsvHasOneRowPerStep) {
  const auto sim_bank = unit_bank(sim_corpus());
  const auto src = all_sources(sim_bank, sim_bank);
  auto model = make_model(21);
  TrainConfig cfg = tiny_train('A');
  cfg.max_steps = 3;
  const auto res = run_stage(model, src, cfg, fresh_dir("csv"));
  ASSERT_EQ(res.rows.size(), 3u);

  std::ifstream in(res.loss_csv_path);
  ASSERT_TRUE(in.good());
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "step,stage,lr,loss");
  int n = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string step_s, stage_s, lr_s, loss_s;
    ASSERT_TRUE(std::getline(ss, step_s, ','));
    ASSERT_TRUE(std::getline(ss, stage_s, ','));
    ASSERT_TRUE(std::getline(ss, lr_s, ','));
    ASSERT_TRUE(std::getline(ss, loss_s, ','));
    EXPECT_EQ(std::stoll(step_s), res.rows[static_cast<size_t>(n)].step);
    EXPECT_EQ(stage_s, "A");
    // %.17g survives a text round trip exactly.
    EXPECT_EQ(std::stod(lr_s), res.rows[static_cast<size_t>(n)].lr);
    EXPECT_EQ(std::stod(loss_s), res.rows[static_cast<size_t>(n)].loss);
    ++n;
  }
  EXPECT_EQ(n, 3);
}

TEST(RunStage, ResumeFromMidStageCheckpointIsBitIdentical) {
  const auto sim_bank = unit_bank(sim_corpus());
  const auto real_bank = unit_bank(heldout_corpus());
  const auto src = all_sources(sim_bank, real_bank);

  TrainConfig cfg = tiny_train('A');
  cfg.seed = 33;
  cfg.max_steps = 6;

  auto uninterrupted = make_model(7, 0.1);
  const auto full = run_stage(uninterrupted, src, cfg, fresh_dir("resume_full"));
  ASSERT_EQ(full.rows.size(), 6u);

  auto restarted = make_model(7, 0.1);
  TrainConfig half = cfg;
  half.max_steps = 3;
  const std::string dir1 = fresh_dir("resume_half");
  const auto part1 = run_stage(restarted, src, half, dir1);
  ASSERT_EQ(part1.steps_completed, 3);
  const auto part2 =
      run_stage(restarted, src, cfg, fresh_dir("resume_tail"), part1.checkpoint_path);
  ASSERT_EQ(part2.rows.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(part2.rows[i].step, full.rows[i + 3].step);
    EXPECT_EQ(part2.rows[i].loss, full.rows[i + 3].loss);
    EXPECT_EQ(part2.rows[i].lr, full.rows[i + 3].lr);
  }
  EXPECT_TRUE(params_bit_equal(uninterrupted, restarted));
}

TEST(RunStage, TwoFreshRunsProduceByteIdenticalCheckpoints) {
  const auto sim_bank = unit_bank(sim_corpus());
  const auto real_bank = unit_bank(heldout_corpus());
  const auto src = all_sources(sim_bank, real_bank);

  TrainConfig cfg = tiny_train('B');
  cfg.seed = 99;
  cfg.real_data_ratio = 0.5;
  cfg.max_steps = 4;

  auto run_once = [&](const std::string& dir) {
    auto model = make_model(31, 0.1);
    return run_stage(model, src, cfg, fresh_dir(dir));
  };
  const auto r1 = run_once("det_a");
  const auto r2 = run_once("det_b");
  ASSERT_EQ(r1.rows.size(), r2.rows.size());
  for (size_t i = 0; i < r1.rows.size(); ++i) EXPECT_EQ(r1.rows[i].loss, r2.rows[i].loss);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string b1 = slurp(r1.checkpoint_path), b2 = slurp(r2.checkpoint_path);
  ASSERT_FALSE(b1.empty());
  EXPECT_TRUE(b1 == b2);
}

TEST(Checkpoint, RoundTripRestoresOptimizerState) {
  const auto bank = unit_bank(sim_corpus());
  TrainConfig cfg = tiny_train('A');
  cfg.seed = 55;

  auto model_a = make_model(3);
  auto pm_a = model_a.params();
  Adam opt_a(pm_a.tensors(), cfg.lr);
  Rng ex_rng(12);
  std::vector<TrainingExample> batch{
      make_training_example(sim_corpus(), bank, tiny_example(), ex_rng)};
  Rng drop_a(2);
  for (int s = 0; s < 3; ++s) train_step(model_a, opt_a, batch, 1e-3, 5.0, drop_a);

  const std::string path = (fs::path(fresh_dir("ckpt_rt")) / "train.ckpt").string();
  save_train_checkpoint(path, model_a, opt_a, cfg, 3);

  auto model_b = make_model(77);  // different init, fully overwritten by the load
  auto pm_b = model_b.params();
  Adam opt_b(pm_b.tensors(), cfg.lr);
  EXPECT_EQ(load_train_checkpoint(path, model_b, opt_b), 3);
  EXPECT_EQ(opt_b.step_count(), 3);
  EXPECT_TRUE(params_bit_equal(model_a, model_b));

  // With restored moments the next update matches exactly; with stale or
  // zeroed moments it would not.
  Rng drop_a2(9), drop_b2(9);
  const double la = train_step(model_a, opt_a, batch, 1e-3, 5.0, drop_a2);
  const double lb = train_step(model_b, opt_b, batch, 1e-3, 5.0, drop_b2);
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(params_bit_equal(model_a, model_b));
}

TEST(Checkpoint, ModelOnlyFileLacksMomentsAndIsRejected) {
  auto model = make_model(4);
  Checkpoint ck;
  ck.meta["step"] = "0";
  ck.meta["adam_t"] = "0";
  auto pm = model.params();
  ck.put_params(pm);
  const std::string path = (fs::path(fresh_dir("ckpt_bad")) / "weights.ckpt").string();
  ck.save(path);

  auto pm2 = model.params();
  Adam opt(pm2.tensors(), 1e-3);
  EXPECT_THROW(load_train_checkpoint(path, model, opt), FormatError);
  // But plain weight loading accepts it.
  EXPECT_NO_THROW(load_model_weights(path, model));
}

TEST(RunStage, EarlyStopsAfterPatienceEvaluations) {
  const auto sim_bank = unit_bank(sim_corpus());
  const auto src = all_sources(sim_bank, sim_bank);
  auto model = make_model(61);
  TrainConfig cfg = tiny_train('A');
  cfg.max_steps = 50;
  cfg.eval_every = 1;
  cfg.eval_examples = 1;
  cfg.patience = 2;
  cfg.min_improvement = 1.0;  // nothing can improve by 100 percent
  const auto res = run_stage(model, src, cfg, fresh_dir("earlystop"));
  EXPECT_TRUE(res.early_stopped);
  EXPECT_EQ(res.steps_completed, 2);
  EXPECT_EQ(res.rows.size(), 2u);
}

TEST(Sources, MissingCorpusIsAConfigError) {
  const auto sim_bank = unit_bank(sim_corpus());
  TrainConfig cfg = tiny_train('B');
  cfg.real_data_ratio = 1.0;  // every draw needs the held-out corpus
  TrainSources src;
  src.sim = &sim_corpus();
  src.sim_bank = &sim_bank;
  EXPECT_THROW(draw_example(src, cfg, "train.B", 0), ConfigError);

  TrainSources none;
  EXPECT_THROW(draw_example(none, tiny_train('A'), "train.A", 0), ConfigError);
}

TEST(Pretrain, ArcFaceLossDecreases) {
  ModelConfig mc = tiny_model_config();
  Rng rng(17);
  ResNetFrontend frontend(mc.frontend, rng);
  ArcFaceHead head(static_cast<int64_t>(sim_corpus().num_speakers()), mc.frontend.embed_dim, rng);

  PretrainConfig pc;
  pc.steps = 40;
  pc.batch_size = 4;
  pc.lr = 2e-3;
  pc.warmup_steps = 5;
  pc.crop_seconds = 1.0;
  pc.seed = 17;
  const auto res = pretrain_frontend(frontend, head, sim_corpus(), pc);
  ASSERT_EQ(res.rows.size(), 40u);
  auto mean = [&](size_t lo, size_t hi) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += res.rows[i].loss;
    return s / static_cast<double>(hi - lo);
  };
  EXPECT_TRUE(std::isfinite(res.final_loss));
  EXPECT_LT(mean(35, 40), mean(0, 5));
}

TEST(OracleBank, UnitNormPerSpeakerAndDeterministic) {
  ModelConfig mc = tiny_model_config();
  Rng rng(23);
  ResNetFrontend frontend(mc.frontend, rng);
  const auto bank = oracle_embedding_bank(sim_corpus(), frontend, 2);
  ASSERT_EQ(bank.size(), sim_corpus().num_speakers());
  for (const auto& id : sim_corpus().speakers) {
    const auto it = bank.find(id);
    ASSERT_NE(it, bank.end());
    ASSERT_EQ(it->second.size(), 16u);
    double n = 0.0;
    for (double v : it->second) n += v * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
  }
  const auto again = oracle_embedding_bank(sim_corpus(), frontend, 2);
  EXPECT_TRUE(bank == again);
}

}  // namespace
}  // namespace seqdiar
