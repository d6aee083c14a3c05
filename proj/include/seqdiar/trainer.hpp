// seqdiar/trainer.hpp
//
// Training loops: ArcFace pre-training of the speaker frontend, the oracle
// embedding bank, and the three-stage diarization schedule
//   stage A: frozen frontend, simulated mixtures only
//   stage B: everything trainable, held-out-domain data mixed in at a ratio
//   stage C: low-lr finetune on held-out-domain data only
//
// Every random choice is drawn from a seed stream derived per purpose and per
// global item index, so runs are reproducible and resumable: restarting from a
// mid-stage checkpoint replays the exact remaining batch sequence.

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

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seqdiar/checkpoint.hpp"
#include "seqdiar/model.hpp"
#include "seqdiar/ops.hpp"
#include "seqdiar/optim.hpp"
#include "seqdiar/simulate.hpp"

namespace seqdiar {

// ---------------------------------------------------------------------------
// Schedule

struct TrainConfig {
  char stage = 'A';  // 'A' frozen frontend, 'B' mixed, 'C' finetune
  double lr = 1e-4;
  int64_t warmup_steps = 25;
  double real_data_ratio = 0.2;  // stage B only
  int64_t max_steps = 100;
  int64_t batch_size = 2;
  uint64_t seed = 1;
  double clip_norm = 5.0;
  int64_t checkpoint_every = 0;  // 0: final checkpoint only
  int64_t eval_every = 0;        // 0: no early stopping
  int64_t eval_examples = 4;
  int64_t patience = 5;          // evaluations without sufficient improvement
  double min_improvement = 0.01; // relative
  ExampleConfig example{};

  void validate() const {
    if (stage != 'A' && stage != 'B' && stage != 'C')
      throw ConfigError("train: stage must be A, B or C");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (real_data_ratio < 0.0 || real_data_ratio > 1.0)
      throw ConfigError("train: real_data_ratio must lie in [0, 1]");
    if (batch_size < 1 || max_steps < 0) throw ConfigError("train: bad step/batch counts");
  }
};

inline TrainConfig default_train_config(char stage) {
  TrainConfig c;
  c.stage = stage;
  c.lr = stage == 'C' ? 1e-5 : 1e-4;
  return c;
}

// Linear warm-up, constant afterwards: 0 at step 0, cfg.lr from warmup on.
inline double lr_at(int64_t step, const TrainConfig& cfg) {
  return warmup_lr(cfg.lr, step, cfg.warmup_steps);
}

// ---------------------------------------------------------------------------
// Data plumbing

struct TrainSources {
  const ToyCorpus* sim = nullptr;
  const EmbeddingBank* sim_bank = nullptr;
  const ToyCorpus* real = nullptr;
  const EmbeddingBank* real_bank = nullptr;
};

// Stage A never and stage C always draws the held-out pool; stage B draws it
// per item with probability real_data_ratio, from a stream keyed only by the
// item's global index.
inline bool draws_real(const TrainConfig& cfg, const std::string& purpose, int64_t item_index) {
  if (cfg.stage == 'A') return false;
  if (cfg.stage == 'C') return true;
  Rng r(derive_seed(cfg.seed, purpose + ".source", static_cast<uint64_t>(item_index)));
  return r.uniform() < cfg.real_data_ratio;
}

inline TrainingExample draw_example(const TrainSources& src, const TrainConfig& cfg,
                                    const std::string& purpose, int64_t item_index) {
  const bool real = draws_real(cfg, purpose, item_index);
  const ToyCorpus* corpus = real ? src.real : src.sim;
  const EmbeddingBank* bank = real ? src.real_bank : src.sim_bank;
  if (corpus == nullptr || bank == nullptr)
    throw ConfigError(std::string("train: stage ") + cfg.stage + " needs the " +
                      (real ? "held-out" : "simulated") + " corpus and bank");
  Rng rng(derive_seed(cfg.seed, purpose + ".example", static_cast<uint64_t>(item_index)));
  return make_training_example(*corpus, *bank, cfg.example, rng);
}

// ---------------------------------------------------------------------------
// Steps

// One optimizer update on a batch.  BCE is averaged over every slot and output
// frame of every example (augmented slots included).  Throws NumericError on a
// non-finite loss instead of continuing with a poisoned model.
inline double train_step(Seq2SeqTsvad& model, Adam& opt,
                         const std::vector<TrainingExample>& batch, double lr, double clip_norm,
                         Rng& dropout_rng) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  GradTape::active().reset();
  RunContext ctx{true, &dropout_rng};
  TensorPtr total;
  for (const auto& ex : batch) {
    auto pred = model.forward(ex.features, ex.profiles, ctx);
    auto loss = bce_loss(pred, ex.labels);
    total = total ? add(total, loss) : loss;
  }
  auto loss = scale(total, 1.0 / static_cast<double>(batch.size()));
  const double value = loss->data[0];
  if (!std::isfinite(value))
    throw NumericError("train_step: non-finite loss " + std::to_string(value));
  opt.zero_grad();
  backward(loss);
  clip_grad_norm(opt.params(), clip_norm);
  opt.set_lr(lr);
  opt.step();
  GradTape::active().reset();
  return value;
}

inline double eval_loss(const Seq2SeqTsvad& model, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw ContractError("eval_loss: no examples");
  NoGradGuard ng;
  RunContext ctx{false, nullptr};
  double total = 0.0;
  for (const auto& ex : examples) {
    auto pred = model.forward(ex.features, ex.profiles, ctx);
    total += bce_loss(pred, ex.labels)->data[0];
  }
  return total / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Checkpoint plumbing

// Model parameters plus Adam moments and counters, so training resumes
// exactly.  Moments are stored flat under "<param>.adam_m" / "<param>.adam_v".
inline void save_train_checkpoint(const std::string& path, const Seq2SeqTsvad& model, Adam& opt,
                                  const TrainConfig& cfg, int64_t completed_steps) {
  Checkpoint ck;
  ck.meta["kind"] = "train";
  ck.meta["stage"] = std::string(1, cfg.stage);
  ck.meta["step"] = std::to_string(completed_steps);
  ck.meta["seed"] = std::to_string(cfg.seed);
  ck.meta["adam_t"] = std::to_string(opt.step_count());
  auto pm = model.params();
  ck.put_params(pm);
  const auto& m1 = opt.moment1();
  const auto& m2 = opt.moment2();
  for (size_t i = 0; i < pm.items.size(); ++i) {
    auto m = Tensor::create({static_cast<int64_t>(m1[i].size())});
    m->data = m1[i];
    ck.put(pm.items[i].first + ".adam_m", m);
    auto v = Tensor::create({static_cast<int64_t>(m2[i].size())});
    v->data = m2[i];
    ck.put(pm.items[i].first + ".adam_v", v);
  }
  ck.save(path);
}

// Returns the number of completed steps recorded in the checkpoint.
inline int64_t load_train_checkpoint(const std::string& path, Seq2SeqTsvad& model, Adam& opt) {
  const Checkpoint ck = Checkpoint::load(path);
  auto pm = model.params();
  ck.load_params(pm);
  auto& m1 = opt.moment1();
  auto& m2 = opt.moment2();
  for (size_t i = 0; i < pm.items.size(); ++i) {
    const auto m = ck.get(pm.items[i].first + ".adam_m");
    const auto v = ck.get(pm.items[i].first + ".adam_v");
    if (!m || !v) throw FormatError("checkpoint: missing Adam moments for " + pm.items[i].first);
    if (m->data.size() != m1[i].size() || v->data.size() != m2[i].size())
      throw FormatError("checkpoint: Adam moment size mismatch for " + pm.items[i].first);
    m1[i] = m->data;
    m2[i] = v->data;
  }
  opt.set_step_count(std::stoll(ck.meta.at("adam_t")));
  return std::stoll(ck.meta.at("step"));
}

// Loads only the model weights from any checkpoint kind (stage init).
inline void load_model_weights(const std::string& path, Seq2SeqTsvad& model) {
  const Checkpoint ck = Checkpoint::load(path);
  auto pm = model.params();
  ck.load_params(pm);
}

// Loads a parameter subtree, remapping "<from_prefix>.x" names to
// "<to_prefix>.x".  Used to seed the model frontend from a pre-training
// checkpoint.
inline void load_params_with_prefix(const std::string& path, ParamMap& pm,
                                    const std::string& from_prefix,
                                    const std::string& to_prefix) {
  const Checkpoint ck = Checkpoint::load(path);
  for (auto& [name, t] : pm.items) {
    if (name.rfind(to_prefix, 0) != 0)
      throw ContractError("load_params_with_prefix: " + name + " lacks prefix " + to_prefix);
    const std::string stored = from_prefix + name.substr(to_prefix.size());
    const TensorPtr src = ck.get(stored);
    if (!src) throw FormatError("checkpoint: missing tensor " + stored);
    if (src->shape != t->shape)
      throw FormatError("checkpoint: shape mismatch for " + stored);
    t->data = src->data;
  }
}

// ---------------------------------------------------------------------------
// Stage loop

struct LossRow {
  int64_t step = 0;
  char stage = 'A';
  double lr = 0.0;
  double loss = 0.0;
};

struct StageResult {
  std::vector<LossRow> rows;  // one per step run in this invocation
  double final_loss = 0.0;
  int64_t steps_completed = 0;
  bool early_stopped = false;
  std::string checkpoint_path;
  std::string loss_csv_path;
};

inline void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("train: cannot write " + path);
  out << "step,stage,lr,loss\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%c,%.17g,%.17g\n", static_cast<long long>(r.step),
                  r.stage, r.lr, r.loss);
    out << buf;
  }
}

// Runs one stage to max_steps or early stop.  `resume_from` continues from a
// mid-stage checkpoint; the step stream is indexed globally, so the resumed
// run sees exactly the batches the uninterrupted run would have.
inline StageResult run_stage(Seq2SeqTsvad& model, const TrainSources& src,
                             const TrainConfig& cfg, const std::string& out_dir,
                             const std::string& resume_from = "") {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string tag = std::string("stage") + cfg.stage;
  const std::string purpose = std::string("train.") + cfg.stage;

  model.frontend.set_trainable(cfg.stage != 'A');
  auto pm = model.params();
  Adam opt(pm.tensors(), cfg.lr);

  int64_t start_step = 0;
  if (!resume_from.empty()) start_step = load_train_checkpoint(resume_from, model, opt);

  // Fixed validation set, drawn once from its own stream.
  std::vector<TrainingExample> val;
  if (cfg.eval_every > 0) {
    TrainConfig vcfg = cfg;
    for (int64_t i = 0; i < cfg.eval_examples; ++i)
      val.push_back(draw_example(src, vcfg, std::string("val.") + cfg.stage, i));
  }
  double best_val = std::numeric_limits<double>::infinity();
  int64_t evals_since_improvement = 0;

  StageResult res;
  res.checkpoint_path = (fs::path(out_dir) / (tag + ".ckpt")).string();
  res.loss_csv_path = (fs::path(out_dir) / (tag + "_loss.csv")).string();

  int64_t step = start_step;
  for (; step < cfg.max_steps; ++step) {
    std::vector<TrainingExample> batch;
    batch.reserve(static_cast<size_t>(cfg.batch_size));
    for (int64_t i = 0; i < cfg.batch_size; ++i)
      batch.push_back(draw_example(src, cfg, purpose, step * cfg.batch_size + i));
    Rng dropout_rng(derive_seed(cfg.seed, purpose + ".dropout", static_cast<uint64_t>(step)));
    const double lr = lr_at(step, cfg);
    double loss;
    try {
      loss = train_step(model, opt, batch, lr, cfg.clip_norm, dropout_rng);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at stage " + cfg.stage + " step " +
                         std::to_string(step));
    }
    res.rows.push_back({step, cfg.stage, lr, loss});
    res.final_loss = loss;

    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
      save_train_checkpoint(
          (fs::path(out_dir) / (tag + "_step" + std::to_string(step + 1) + ".ckpt")).string(),
          model, opt, cfg, step + 1);

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      const double v = eval_loss(model, val);
      if (v < best_val * (1.0 - cfg.min_improvement)) {
        best_val = v;
        evals_since_improvement = 0;
      } else {
        best_val = std::min(best_val, v);
        ++evals_since_improvement;
      }
      if (evals_since_improvement >= cfg.patience) {
        res.early_stopped = true;
        ++step;
        break;
      }
    }
  }
  res.steps_completed = step;
  save_train_checkpoint(res.checkpoint_path, model, opt, cfg, step);
  write_loss_csv(res.loss_csv_path, res.rows);
  return res;
}

// ---------------------------------------------------------------------------
// Frontend pre-training (ArcFace speaker classification)

struct PretrainConfig {
  int64_t steps = 400;
  int64_t batch_size = 4;
  double lr = 1e-3;
  int64_t warmup_steps = 25;
  double clip_norm = 5.0;
  double crop_seconds = 2.0;
  uint64_t seed = 1;
  FbankConfig fbank{};
};

struct PretrainResult {
  std::vector<LossRow> rows;
  double final_loss = 0.0;
};

// Random crop of one utterance; shorter utterances pass through whole.
inline Waveform random_crop(const Waveform& utt, double seconds, Rng& rng) {
  const size_t want = static_cast<size_t>(seconds * utt.sample_rate);
  if (utt.samples.size() <= want) return utt;
  const size_t start = static_cast<size_t>(
      rng.uniform_int(0, static_cast<int64_t>(utt.samples.size() - want)));
  Waveform out;
  out.sample_rate = utt.sample_rate;
  out.samples.assign(utt.samples.begin() + static_cast<long>(start),
                     utt.samples.begin() + static_cast<long>(start + want));
  return out;
}

// Speaker-classification pre-training of the frontend.  The ArcFace head is
// discarded afterwards; only the frontend weights matter downstream.
inline PretrainResult pretrain_frontend(ResNetFrontend& frontend, ArcFaceHead& head,
                                        const ToyCorpus& corpus, const PretrainConfig& cfg) {
  if (corpus.speakers.empty()) throw ConfigError("pretrain: empty corpus");
  ParamMap pm;
  frontend.collect("frontend", pm);
  head.collect("arcface", pm);
  set_trainable(pm, true);
  Adam opt(pm.tensors(), cfg.lr);

  PretrainResult res;
  for (int64_t step = 0; step < cfg.steps; ++step) {
    GradTape::active().reset();
    std::vector<TensorPtr> embs;
    std::vector<int64_t> labels;
    for (int64_t i = 0; i < cfg.batch_size; ++i) {
      Rng rng(derive_seed(cfg.seed, "pretrain.item",
                          static_cast<uint64_t>(step * cfg.batch_size + i)));
      const int64_t spk = rng.uniform_int(0, static_cast<int64_t>(corpus.num_speakers()) - 1);
      const auto& utts = corpus.utterances.at(corpus.speakers[static_cast<size_t>(spk)]);
      const auto& utt = utts[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(utts.size()) - 1))];
      const auto crop = random_crop(utt, cfg.crop_seconds, rng);
      embs.push_back(frontend.embedding(fbank(crop, cfg.fbank)));
      labels.push_back(spk);
    }
    TensorPtr batch_emb = embs[0];
    for (size_t i = 1; i < embs.size(); ++i) batch_emb = concat_rows(batch_emb, embs[i]);
    auto loss = cross_entropy_logits(head.logits(batch_emb, labels), labels);
    const double value = loss->data[0];
    if (!std::isfinite(value))
      throw NumericError("pretrain: non-finite loss at step " + std::to_string(step));
    opt.zero_grad();
    backward(loss);
    clip_grad_norm(opt.params(), cfg.clip_norm);
    opt.set_lr(warmup_lr(cfg.lr, step, cfg.warmup_steps));
    opt.step();
    GradTape::active().reset();
    res.rows.push_back({step, 'P', opt.lr(), value});
    res.final_loss = value;
  }
  return res;
}

// Oracle profile bank: the mean of per-utterance normalized embeddings,
// re-normalized.  Deterministic: the first max_utts utterances per speaker.
inline EmbeddingBank oracle_embedding_bank(const ToyCorpus& corpus, const ResNetFrontend& frontend,
                                           int max_utts = 4, const FbankConfig& fb = {}) {
  NoGradGuard ng;
  EmbeddingBank bank;
  for (const auto& id : corpus.speakers) {
    const auto& utts = corpus.utterances.at(id);
    const int n = std::min<int>(max_utts, static_cast<int>(utts.size()));
    if (n == 0) throw ConfigError("oracle_embedding_bank: speaker " + id + " has no utterances");
    std::vector<double> mean;
    for (int u = 0; u < n; ++u) {
      const auto e = frontend.embedding(fbank(utts[static_cast<size_t>(u)], fb));
      if (mean.empty()) mean.assign(e->data.size(), 0.0);
      for (size_t j = 0; j < e->data.size(); ++j) mean[j] += e->data[j];
    }
    double norm = 0.0;
    for (double& v : mean) {
      v /= n;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0) throw NumericError("oracle_embedding_bank: zero embedding for " + id);
    for (double& v : mean) v /= norm;
    bank[id] = std::move(mean);
  }
  return bank;
}

}  // namespace seqdiar
