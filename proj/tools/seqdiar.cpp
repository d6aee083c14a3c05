// seqdiar.cpp
//
// Single command-line entry point binding the pipeline together:
//
//   corpus-build   synthesize a toy speaker corpus (wavs + manifest)
//   pretrain-spk   speaker-classification pre-training of the frontend
//   train          one diarization training stage (A, B, or C)
//   diarize        run the full pipeline on a wav, emit an RTTM hypothesis
//   score          DER/JER between reference and hypothesis RTTM files
//   membench       peak-memory grid for the two architectures, CSV + chart
//   sweep          DER table over output resolution x decoding length
//
// Every subcommand resolves one RunConfig (defaults, then --config file, then
// --set overrides), writes the resolved config and a flat run manifest
// (command, version, config hash, seed, inputs, outputs) into its output
// directory, and exits 0 on success or nonzero with a diagnostic on stderr.
// Identical config and seed reproduce bit-identical artifacts.

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "seqdiar/config.hpp"
#include "seqdiar/inference.hpp"
#include "seqdiar/membench.hpp"
#include "seqdiar/scoring.hpp"
#include "seqdiar/trainer.hpp"
#include "seqdiar/wav.hpp"

namespace fs = std::filesystem;
using namespace seqdiar;

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << content;
}

// Flat key=value record of one run, written as <out>/run_manifest.txt next to
// the resolved <out>/config.txt.  Keys keep insertion order.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> kv;

  void add(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void add(const std::string& k, double v) { kv.emplace_back(k, format_double(v)); }
  void add(const std::string& k, int64_t v) { kv.emplace_back(k, std::to_string(v)); }

  void write(const std::string& out_dir, const RunConfig& cfg) const {
    fs::create_directories(out_dir);
    std::string text;
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    write_text((fs::path(out_dir) / "run_manifest.txt").string(), text);
    write_text((fs::path(out_dir) / "config.txt").string(), dump_config(cfg));
  }
};

RunManifest start_manifest(const std::string& command, const RunConfig& cfg, uint64_t seed,
                           int jobs) {
  RunManifest m;
  m.add("command", command);
  m.add("version", std::string(kSeqdiarVersion));
  m.add("config_hash", config_hash_hex(cfg));
  m.add("seed", static_cast<int64_t>(seed));
  m.add("jobs", static_cast<int64_t>(jobs));
  return m;
}

Seq2SeqTsvad build_model(const RunConfig& cfg) {
  Rng rng(derive_seed(cfg.train.seed, "model.init", 0));
  return Seq2SeqTsvad(cfg.model, rng);
}

// Seeds the model frontend from a pretrain-spk checkpoint (tensors stored
// under "frontend.*").
void apply_frontend_checkpoint(Seq2SeqTsvad& model, const std::string& path) {
  ParamMap fpm;
  model.frontend.collect("model.frontend", fpm);
  load_params_with_prefix(path, fpm, "frontend", "model.frontend");
}

std::string percent(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f%%", v);
  return buf;
}

VadIntervals timeline_to_vad(const Timeline& tl) {
  VadIntervals out;
  out.reserve(tl.iv.size());
  for (const auto& i : tl.iv) out.push_back({i.a, i.b});
  return out;
}

// Picks the reference annotation for one audio file: exact file-id match, or
// the sole entry of a single-file RTTM.
const Annotation& pick_reference(const std::map<std::string, Annotation>& refs,
                                 const std::string& file_id) {
  const auto it = refs.find(file_id);
  if (it != refs.end()) return it->second;
  if (refs.size() == 1) return refs.begin()->second;
  throw ConfigError("reference RTTM has no file '" + file_id + "' and is not single-file");
}

std::map<std::string, Annotation> parse_rttm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse_rttm(in);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_corpus_build(const RunConfig& cfg, const std::string& out_dir, int jobs) {
  const std::string manifest = build_toy_corpus(out_dir, cfg.corpus);
  auto m = start_manifest("corpus-build", cfg, cfg.corpus.seed, jobs);
  m.add("input.domain", cfg.corpus.domain.name);
  m.add("output.corpus_manifest", manifest);
  m.write(out_dir, cfg);
  std::cout << "corpus: " << cfg.corpus.num_speakers << " speakers x "
            << cfg.corpus.utts_per_speaker << " utterances -> " << manifest << "\n";
  return 0;
}

int cmd_pretrain_spk(const RunConfig& cfg, const std::string& corpus_path,
                     const std::string& out_dir, int jobs) {
  const ToyCorpus corpus = load_toy_corpus(corpus_path);
  Rng rng(derive_seed(cfg.pretrain.seed, "pretrain.init", 0));
  ResNetFrontend frontend(cfg.model.frontend, rng);
  ArcFaceHead head(static_cast<int64_t>(corpus.num_speakers()), cfg.model.frontend.embed_dim, rng);
  const PretrainResult res = pretrain_frontend(frontend, head, corpus, cfg.pretrain);

  fs::create_directories(out_dir);
  const std::string ckpt_path = (fs::path(out_dir) / "frontend.ckpt").string();
  const std::string loss_path = (fs::path(out_dir) / "pretrain_loss.csv").string();
  ParamMap pm;
  frontend.collect("frontend", pm);
  Checkpoint ck;
  ck.meta["kind"] = "pretrain";
  ck.meta["steps"] = std::to_string(cfg.pretrain.steps);
  ck.meta["seed"] = std::to_string(cfg.pretrain.seed);
  ck.meta["version"] = kSeqdiarVersion;
  ck.put_params(pm);
  ck.save(ckpt_path);
  write_loss_csv(loss_path, res.rows);

  auto m = start_manifest("pretrain-spk", cfg, cfg.pretrain.seed, jobs);
  m.add("input.corpus", corpus_path);
  m.add("output.checkpoint", ckpt_path);
  m.add("output.loss_csv", loss_path);
  m.add("final_loss", res.final_loss);
  m.write(out_dir, cfg);
  std::cout << "pretrain: " << cfg.pretrain.steps << " steps, final loss " << res.final_loss
            << " -> " << ckpt_path << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& corpus_path,
              const std::string& real_corpus_path, const std::string& frontend_ckpt,
              const std::string& init_ckpt, const std::string& resume_ckpt,
              const std::string& out_dir, int jobs) {
  const ToyCorpus sim = load_toy_corpus(corpus_path);
  ToyCorpus real;
  if (!real_corpus_path.empty()) real = load_toy_corpus(real_corpus_path);

  Seq2SeqTsvad model = build_model(cfg);
  if (!frontend_ckpt.empty()) apply_frontend_checkpoint(model, frontend_ckpt);
  if (!init_ckpt.empty()) load_model_weights(init_ckpt, model);

  // Profile banks come from the frontend as initialized for this stage, so
  // they are fixed while the examples stream.
  const EmbeddingBank sim_bank = oracle_embedding_bank(sim, model.frontend, 4, cfg.fbank);
  EmbeddingBank real_bank;
  if (!real_corpus_path.empty())
    real_bank = oracle_embedding_bank(real, model.frontend, 4, cfg.fbank);

  TrainSources src;
  src.sim = &sim;
  src.sim_bank = &sim_bank;
  if (!real_corpus_path.empty()) {
    src.real = &real;
    src.real_bank = &real_bank;
  }

  const StageResult res = run_stage(model, src, cfg.train, out_dir, resume_ckpt);

  auto m = start_manifest("train", cfg, cfg.train.seed, jobs);
  m.add("stage", std::string(1, cfg.train.stage));
  m.add("input.corpus", corpus_path);
  if (!real_corpus_path.empty()) m.add("input.real_corpus", real_corpus_path);
  if (!frontend_ckpt.empty()) m.add("input.frontend", frontend_ckpt);
  if (!init_ckpt.empty()) m.add("input.init", init_ckpt);
  if (!resume_ckpt.empty()) m.add("input.resume", resume_ckpt);
  m.add("output.checkpoint", res.checkpoint_path);
  m.add("output.loss_csv", res.loss_csv_path);
  m.add("steps_completed", res.steps_completed);
  m.add("early_stopped", std::string(res.early_stopped ? "true" : "false"));
  m.add("final_loss", res.final_loss);
  m.write(out_dir, cfg);
  std::cout << "train stage " << cfg.train.stage << ": " << res.steps_completed
            << " steps, final loss " << res.final_loss << " -> " << res.checkpoint_path << "\n";
  return 0;
}

int cmd_diarize(const RunConfig& cfg, const std::string& audio_path, const std::string& ckpt_path,
                const std::string& vad_mode, const std::string& ref_path,
                const std::string& out_dir, int jobs) {
  const Waveform wave = read_wav(audio_path);
  Seq2SeqTsvad model = build_model(cfg);
  load_model_weights(ckpt_path, model);

  const std::string file_id = fs::path(audio_path).stem().string();
  std::map<std::string, Annotation> refs;
  VadIntervals oracle;
  const VadIntervals* oracle_ptr = nullptr;
  if (!ref_path.empty()) refs = parse_rttm_file(ref_path);
  if (vad_mode == "oracle") {
    if (ref_path.empty()) throw ConfigError("--vad oracle requires --ref");
    oracle = timeline_to_vad(pick_reference(refs, file_id).support());
    oracle_ptr = &oracle;
  }

  const DiarizationResult res = diarize(wave, model, cfg.infer, oracle_ptr);

  fs::create_directories(out_dir);
  const std::string hyp_path = (fs::path(out_dir) / (file_id + "_hyp.rttm")).string();
  write_text(hyp_path, emit_rttm(file_id, res.annotation));

  auto m = start_manifest("diarize", cfg, cfg.train.seed, jobs);
  m.add("input.audio", audio_path);
  m.add("input.checkpoint", ckpt_path);
  m.add("vad", vad_mode);
  if (!ref_path.empty()) m.add("input.ref", ref_path);
  m.add("output.hyp_rttm", hyp_path);
  m.add("num_speakers", static_cast<int64_t>(res.annotation.speakers().size()));

  std::cout << "diarize " << file_id << ": " << res.annotation.speakers().size() << " speakers, "
            << res.annotation.segments.size() << " segments -> " << hyp_path << "\n";
  if (!ref_path.empty()) {
    std::map<std::string, Annotation> ref_one{{file_id, pick_reference(refs, file_id)}};
    std::map<std::string, Annotation> hyp_one{{file_id, res.annotation}};
    try {
      const ScoreReport rep = score_annotations(ref_one, hyp_one);
      m.add("der_pct", rep.der_pct());
      std::cout << "DER " << percent(rep.der_pct()) << " (miss " << percent(rep.miss_pct())
                << ", falarm " << percent(rep.falarm_pct()) << ", confusion "
                << percent(rep.confusion_pct()) << ")\n";
    } catch (const NumericError& e) {
      std::cout << "DER unavailable: " << e.what() << "\n";
    }
  }
  m.write(out_dir, cfg);
  return 0;
}

int cmd_score(const RunConfig& cfg, const std::string& ref_path, const std::string& hyp_path,
              double collar, const std::string& out_dir, int jobs) {
  const auto refs = parse_rttm_file(ref_path);
  const auto hyps = parse_rttm_file(hyp_path);
  const ScoreReport rep = score_annotations(refs, hyps, collar);

  for (const auto& f : rep.files)
    std::cout << "file " << f.file_id << ": DER " << percent(100.0 * f.der()) << " (miss "
              << format_double(f.miss) << "s, falarm " << format_double(f.falarm)
              << "s, confusion " << format_double(f.confusion) << "s of "
              << format_double(f.ref_speech) << "s)\n";
  std::cout << "overall: DER " << percent(rep.der_pct()) << " (miss " << percent(rep.miss_pct())
            << ", falarm " << percent(rep.falarm_pct()) << ", confusion "
            << percent(rep.confusion_pct()) << ")";
  if (rep.jer_count > 0) std::cout << ", JER " << percent(rep.jer_pct());
  std::cout << "\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::string csv = "file_id,miss,falarm,confusion,ref_speech,der\n";
    for (const auto& f : rep.files)
      csv += f.file_id + "," + format_double(f.miss) + "," + format_double(f.falarm) + "," +
             format_double(f.confusion) + "," + format_double(f.ref_speech) + "," +
             format_double(f.der()) + "\n";
    csv += "OVERALL," + format_double(rep.miss) + "," + format_double(rep.falarm) + "," +
           format_double(rep.confusion) + "," + format_double(rep.ref_speech) + "," +
           format_double(rep.der()) + "\n";
    const std::string csv_path = (fs::path(out_dir) / "score.csv").string();
    write_text(csv_path, csv);
    auto m = start_manifest("score", cfg, 0, jobs);
    m.add("input.ref", ref_path);
    m.add("input.hyp", hyp_path);
    m.add("collar", collar);
    m.add("output.score_csv", csv_path);
    m.add("der_pct", rep.der_pct());
    m.write(out_dir, cfg);
  }
  return 0;
}

int cmd_membench(const RunConfig& cfg, std::vector<int64_t> t_grid, std::vector<int64_t> n_grid,
                 int64_t s_dim, int64_t f_dim, const std::string& out_dir, int jobs) {
  BenchConfig bc;
  bc.s_dim = s_dim;
  bc.f_dim = f_dim;
  if (t_grid.empty()) t_grid = {250, 500, 1000, 2000};
  if (n_grid.empty()) n_grid = {5, 10, 20, 30};

  const std::vector<BenchPoint> points = run_bench_grid(t_grid, n_grid, bc);
  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "bench.csv").string();
  write_bench_csv(points, csv_path);

  std::cout << bench_chart(points);
  auto m = start_manifest("membench", cfg, bc.seed, jobs);
  m.add("grid.t", std::to_string(t_grid.size()));
  m.add("grid.n", std::to_string(n_grid.size()));
  m.add("s_dim", s_dim);
  m.add("f_dim", f_dim);
  m.add("output.csv", csv_path);
  try {
    const FitResult s2s = fit_seq2seq_peaks(points);
    const FitResult enc = fit_encoder_only_peaks(points);
    std::cout << "seq2seq peak elements ~ " << format_double(s2s.coef[0]) << " + "
              << format_double(s2s.coef[1]) << "*T + " << format_double(s2s.coef[2])
              << "*N  (R2 " << format_double(s2s.r2) << ")\n";
    std::cout << "encoder-only peak elements ~ " << format_double(enc.coef[0]) << " + "
              << format_double(enc.coef[1]) << "*T*N  (R2 " << format_double(enc.r2) << ")\n";
    m.add("fit.seq2seq_r2", s2s.r2);
    m.add("fit.encoder_only_r2", enc.r2);
  } catch (const ContractError&) {
    std::cout << "grid too small to fit scaling laws\n";
  }
  m.write(out_dir, cfg);
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::vector<double>& r_values,
              const std::vector<int64_t>& l_values, const std::string& corpus_path,
              const std::string& real_corpus_path, const std::string& frontend_ckpt,
              int64_t mixtures, double collar, const std::string& out_dir, int jobs) {
  if (r_values.empty() || l_values.empty())
    throw ConfigError("sweep: --R and --L must be non-empty");
  const ToyCorpus sim = load_toy_corpus(corpus_path);
  ToyCorpus real;
  if (!real_corpus_path.empty()) real = load_toy_corpus(real_corpus_path);

  std::string csv = "R,L,der_pct,miss_pct,falarm_pct,confusion_pct\n";
  auto m = start_manifest("sweep", cfg, cfg.train.seed, jobs);
  m.add("input.corpus", corpus_path);
  if (!real_corpus_path.empty()) m.add("input.real_corpus", real_corpus_path);
  if (!frontend_ckpt.empty()) m.add("input.frontend", frontend_ckpt);
  m.add("mixtures", mixtures);

  for (const double r : r_values) {
    for (const int64_t l : l_values) {
      RunConfig cell = cfg;
      cell.model.output_resolution = r;
      cell.model.decoder.num_slots = l;
      cell.sync();

      Seq2SeqTsvad model = build_model(cell);
      if (!frontend_ckpt.empty()) apply_frontend_checkpoint(model, frontend_ckpt);
      const EmbeddingBank sim_bank = oracle_embedding_bank(sim, model.frontend, 4, cell.fbank);
      EmbeddingBank real_bank;
      TrainSources src;
      src.sim = &sim;
      src.sim_bank = &sim_bank;
      if (!real_corpus_path.empty()) {
        real_bank = oracle_embedding_bank(real, model.frontend, 4, cell.fbank);
        src.real = &real;
        src.real_bank = &real_bank;
      }
      const std::string cell_dir =
          (fs::path(out_dir) / ("R" + format_double(r) + "_L" + std::to_string(l))).string();
      run_stage(model, src, cell.train, cell_dir);

      // Evaluation mixtures are keyed by seed and index only, so every cell
      // scores the same audio.  Profiles and VAD are oracle: the sweep
      // isolates the effect of the (R, L) pair on the model itself.
      const EmbeddingBank eval_bank = oracle_embedding_bank(sim, model.frontend, 4, cell.fbank);
      const int max_n = std::min(cell.train.example.max_speakers,
                                 static_cast<int>(sim.num_speakers()));
      const int min_n = std::min(cell.train.example.min_speakers, max_n);
      std::map<std::string, Annotation> refs, hyps;
      for (int64_t i = 0; i < mixtures; ++i) {
        Rng rng(derive_seed(cell.train.seed, "sweep.eval", static_cast<uint64_t>(i)));
        const int n = static_cast<int>(rng.uniform_int(min_n, max_n));
        const MixtureSample mix = simulate_mixture(sim, rng, n, cell.model.chunk_seconds);
        std::vector<std::pair<std::string, std::vector<double>>> ordered;
        for (const auto& spk : mix.speakers) ordered.emplace_back(spk, eval_bank.at(spk));
        const ProfileGroups groups =
            pack_groups(ordered, l, cell.model.frontend.embed_dim);
        const VadIntervals vad = timeline_to_vad(mix.annotation.support());
        const DiarizationResult res = diarize(mix.wave, model, cell.infer, &vad, &groups);
        const std::string id = "mix" + std::to_string(i);
        refs[id] = mix.annotation;
        hyps[id] = res.annotation;
      }
      const ScoreReport rep = score_annotations(refs, hyps, collar);
      char row[160];
      std::snprintf(row, sizeof(row), "%s,%lld,%.4f,%.4f,%.4f,%.4f\n", format_double(r).c_str(),
                    static_cast<long long>(l), rep.der_pct(), rep.miss_pct(), rep.falarm_pct(),
                    rep.confusion_pct());
      csv += row;
      std::cout << "R=" << format_double(r) << " L=" << l << ": DER " << percent(rep.der_pct())
                << "\n";
    }
  }

  fs::create_directories(out_dir);
  const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
  write_text(csv_path, csv);
  m.add("output.csv", csv_path);
  m.write(out_dir, cfg);
  std::cout << "sweep table -> " << csv_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqdiar: sequence-to-sequence target-speaker VAD diarization toolkit"};
  app.require_subcommand(0, 1);

  std::string config_file;
  std::vector<std::string> overrides;
  bool dump = false;
  int jobs = 1;
  app.add_option("--config", config_file, "key=value config file applied over defaults");
  app.add_option("--set", overrides, "config override key=value (repeatable, after --config)");
  app.add_flag("--dump-config", dump, "print the resolved configuration and exit");
  app.add_option("--jobs", jobs, "worker cap; the pipeline runs single-threaded for determinism")
      ->check(CLI::PositiveNumber);
  app.set_version_flag("--version", kSeqdiarVersion);

  auto* corpus_build = app.add_subcommand("corpus-build", "synthesize a toy speaker corpus");
  std::string cb_out;
  corpus_build->add_option("--out", cb_out, "output directory")->required();
  corpus_build->fallthrough();

  auto* pretrain = app.add_subcommand("pretrain-spk", "pre-train the speaker frontend");
  std::string pt_corpus, pt_out;
  pretrain->add_option("--corpus", pt_corpus, "corpus manifest")->required();
  pretrain->add_option("--out", pt_out, "output directory")->required();
  pretrain->fallthrough();

  auto* train = app.add_subcommand("train", "run one diarization training stage");
  std::string tr_corpus, tr_real, tr_frontend, tr_init, tr_resume, tr_out;
  train->add_option("--corpus", tr_corpus, "simulated corpus manifest")->required();
  train->add_option("--real-corpus", tr_real, "held-out corpus manifest (stages B and C)");
  train->add_option("--frontend", tr_frontend, "pretrain-spk checkpoint seeding the frontend");
  train->add_option("--init", tr_init, "checkpoint whose model weights start this stage");
  train->add_option("--resume", tr_resume, "mid-stage checkpoint to continue from");
  train->add_option("--out", tr_out, "output directory")->required();
  train->fallthrough();

  auto* diarize_cmd = app.add_subcommand("diarize", "diarize a wav into an RTTM hypothesis");
  std::string dz_audio, dz_ckpt, dz_vad = "energy", dz_ref, dz_out = ".";
  diarize_cmd->add_option("--audio", dz_audio, "input wav")->required();
  diarize_cmd->add_option("--ckpt", dz_ckpt, "model checkpoint")->required();
  diarize_cmd->add_option("--vad", dz_vad, "speech detection: energy or oracle")
      ->check(CLI::IsMember({"energy", "oracle"}));
  diarize_cmd->add_option("--ref", dz_ref, "reference RTTM (oracle VAD source and DER report)");
  diarize_cmd->add_option("--out", dz_out, "output directory (default .)");
  diarize_cmd->fallthrough();

  auto* score = app.add_subcommand("score", "score hypothesis RTTM against reference");
  std::string sc_ref, sc_hyp, sc_out;
  double sc_collar = 0.25;
  score->add_option("--ref", sc_ref, "reference RTTM")->required();
  score->add_option("--hyp", sc_hyp, "hypothesis RTTM")->required();
  score->add_option("--collar", sc_collar, "no-score collar seconds around reference bounds");
  score->add_option("--out", sc_out, "optional output directory for score.csv");
  score->fallthrough();

  auto* membench = app.add_subcommand("membench", "peak-memory grid for both architectures");
  std::vector<int64_t> mb_t, mb_n;
  int64_t mb_s = 256, mb_f = 256;
  std::string mb_out;
  membench->add_option("--T", mb_t, "sequence lengths (comma separated)")->delimiter(',');
  membench->add_option("--N", mb_n, "speaker counts (comma separated)")->delimiter(',');
  membench->add_option("--S", mb_s, "profile width");
  membench->add_option("--F", mb_f, "feature width");
  membench->add_option("--out", mb_out, "output directory")->required();
  membench->fallthrough();

  auto* sweep = app.add_subcommand("sweep", "DER table over resolution x decoding length");
  std::vector<double> sw_r;
  std::vector<int64_t> sw_l;
  std::string sw_corpus, sw_real, sw_frontend, sw_out;
  int64_t sw_mixtures = 5;
  double sw_collar = 0.25;
  sweep->add_option("--R", sw_r, "output resolutions in seconds (comma separated)")
      ->delimiter(',')
      ->required();
  sweep->add_option("--L", sw_l, "decoding lengths (comma separated)")->delimiter(',')->required();
  sweep->add_option("--corpus", sw_corpus, "simulated corpus manifest")->required();
  sweep->add_option("--real-corpus", sw_real, "held-out corpus manifest (stages B and C)");
  sweep->add_option("--frontend", sw_frontend, "pretrain-spk checkpoint seeding the frontend");
  sweep->add_option("--mixtures", sw_mixtures, "evaluation mixtures per cell");
  sweep->add_option("--collar", sw_collar, "scoring collar seconds");
  sweep->add_option("--out", sw_out, "output directory")->required();
  sweep->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg = load_config_file(config_file);
    apply_overrides(cfg, overrides);
    cfg.sync();

    if (dump) {
      std::cout << dump_config(cfg);
      return 0;
    }
    if (app.got_subcommand(corpus_build)) return cmd_corpus_build(cfg, cb_out, jobs);
    if (app.got_subcommand(pretrain)) return cmd_pretrain_spk(cfg, pt_corpus, pt_out, jobs);
    if (app.got_subcommand(train))
      return cmd_train(cfg, tr_corpus, tr_real, tr_frontend, tr_init, tr_resume, tr_out, jobs);
    if (app.got_subcommand(diarize_cmd))
      return cmd_diarize(cfg, dz_audio, dz_ckpt, dz_vad, dz_ref, dz_out, jobs);
    if (app.got_subcommand(score)) return cmd_score(cfg, sc_ref, sc_hyp, sc_collar, sc_out, jobs);
    if (app.got_subcommand(membench))
      return cmd_membench(cfg, mb_t, mb_n, mb_s, mb_f, mb_out, jobs);
    if (app.got_subcommand(sweep))
      return cmd_sweep(cfg, sw_r, sw_l, sw_corpus, sw_real, sw_frontend, sw_mixtures, sw_collar,
                       sw_out, jobs);
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "seqdiar: error: " << e.what() << "\n";
    return 1;
  }
}
