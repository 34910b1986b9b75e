// Command-line front end: dataset generation, training, captioning,
// evaluation, gradient checking, beam sweeps, ranking and embedding
// queries.
//
// Exit codes: 0 success, 2 bad flags, 3 I/O failure, 4 contract violation,
// 5 gradient check failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nic/dataset.hpp"
#include "nic/inference.hpp"
#include "nic/io.hpp"
#include "nic/metrics.hpp"
#include "nic/model.hpp"
#include "nic/training.hpp"
#include "nic/vocab.hpp"

namespace {

constexpr int kExitBadFlags = 2;
constexpr int kExitIo = 3;
constexpr int kExitContract = 4;
constexpr int kExitGradcheckFailed = 5;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_kv(const std::string& key, const std::string& value) {
  std::cout << "  " << key << " = " << value << "\n";
}

nic::Ensemble make_ensemble(const std::vector<nic::Checkpoint>& checkpoints) {
  nic::Ensemble models;
  for (const auto& ckpt : checkpoints) models.push_back(&ckpt.params);
  return models;
}

std::vector<nic::Checkpoint> load_checkpoints(
    const std::vector<std::string>& paths) {
  std::vector<nic::Checkpoint> out;
  for (const auto& p : paths) out.push_back(nic::load_checkpoint(p));
  for (const auto& c : out)
    nic::check(c.vocab.hash() == out.front().vocab.hash(),
               "ensemble checkpoints carry different vocabularies");
  return out;
}

// ---------------- gen-data ----------------

int cmd_gen_data(const std::string& out_dir, const nic::SceneSpec& spec,
                 const std::vector<std::string>& held_out_names) {
  nic::SceneSpec resolved = spec;
  auto axis_index = [](const std::vector<std::string>& axis,
                       const std::string& name) {
    auto it = std::find(axis.begin(), axis.end(), name);
    nic::check(it != axis.end(), "held-out attribute '" + name +
                                     "' is not on any axis value list");
    return static_cast<std::size_t>(std::distance(axis.begin(), it));
  };
  for (const auto& tuple : held_out_names) {
    auto parts = split_csv(tuple);
    nic::check(parts.size() == 4,
               "held-out tuple must be subject,color,action,location: " +
                   tuple);
    resolved.held_out.push_back({axis_index(resolved.subjects, parts[0]),
                                 axis_index(resolved.colors, parts[1]),
                                 axis_index(resolved.actions, parts[2]),
                                 axis_index(resolved.locations, parts[3])});
  }

  std::cout << "gen-data effective config:\n";
  print_kv("seed", std::to_string(resolved.seed));
  print_kv("scenes", std::to_string(resolved.subjects.size() *
                                    resolved.colors.size() *
                                    resolved.actions.size() *
                                    resolved.locations.size()));
  print_kv("captions_per_scene",
           std::to_string(resolved.captions_per_scene));
  print_kv("noise_amplitude", std::to_string(resolved.noise_amplitude));
  print_kv("held_out_tuples", std::to_string(resolved.held_out.size()));

  nic::DatasetSplits splits = nic::generate_dataset(resolved);
  std::filesystem::create_directories(out_dir);
  nic::save_dataset(splits.train, out_dir + "/train.jsonl");
  if (!splits.val.empty()) nic::save_dataset(splits.val, out_dir + "/val.jsonl");
  if (!splits.test.empty())
    nic::save_dataset(splits.test, out_dir + "/test.jsonl");
  std::cout << "wrote " << splits.train.size() << " train / "
            << splits.val.size() << " val / " << splits.test.size()
            << " test scenes to " << out_dir << "\n";
  return 0;
}

// ---------------- train ----------------

int cmd_train(const nic::TrainConfig& cfg, const std::string& data_path,
              const std::string& out_path, const std::string& log_path,
              const std::string& resume_path) {
  std::cout << "train effective config:\n"
            << nic::format_train_config(cfg);
  nic::Dataset ds = nic::load_dataset(data_path);

  std::optional<std::pair<nic::ModelParams, nic::Vocabulary>> initial;
  std::uint64_t start_step = 0;
  if (!resume_path.empty()) {
    nic::Checkpoint ckpt = nic::load_checkpoint(resume_path);
    start_step = ckpt.step;
    initial.emplace(std::move(ckpt.params), std::move(ckpt.vocab));
  }

  nic::TrainResult result = nic::train(cfg, ds, initial);

  if (!log_path.empty()) {
    std::ofstream log(log_path);
    if (!log) throw nic::IoError("cannot open training log: " + log_path);
    for (const auto& rec : result.log) {
      nlohmann::json j;
      j["step"] = rec.step;
      j["mean_loss"] = rec.mean_loss;
      j["mean_token_loss"] = rec.mean_token_loss;
      j["epsilon"] = rec.epsilon;
      j["phase"] = rec.encoder_frozen ? "frozen" : "joint";
      j["wall_seconds"] = rec.wall_seconds;
      j["clipped"] = rec.clipped;
      log << j.dump() << "\n";
    }
  }
  nic::save_checkpoint(result.params, result.vocab,
                       start_step + cfg.total_steps, out_path);
  std::cout << "final mean token loss "
            << (result.log.empty() ? 0.0 : result.log.back().mean_token_loss)
            << "; checkpoint written to " << out_path << "\n";
  return 0;
}

// ---------------- caption ----------------

struct CaptionOutcome {
  std::vector<nic::CaptionRecord> records;
  double novelty = 0.0;
};

CaptionOutcome run_caption(const std::vector<nic::Checkpoint>& checkpoints,
                           const nic::Dataset& ds,
                           const nic::DecodeConfig& cfg, std::uint64_t seed,
                           const nic::Dataset* train_ds) {
  nic::Ensemble models = make_ensemble(checkpoints);
  const nic::Vocabulary& vocab = checkpoints.front().vocab;
  std::vector<std::vector<std::string>> train_caps;
  if (train_ds) train_caps = nic::all_captions(*train_ds);

  nic::Rng rng(seed);
  CaptionOutcome outcome;
  std::size_t novel = 0, total = 0;
  for (const auto& ex : ds) {
    auto hyps = nic::decode(models, ex.features, cfg, rng);
    nic::CaptionRecord rec;
    rec.image_id = ex.id;
    for (const auto& h : hyps) {
      std::vector<std::string> words = vocab.decode(h.tokens);
      std::string text;
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text += ' ';
        text += words[i];
      }
      const bool is_novel =
          train_ds ? nic::novelty_rate({words}, train_caps) > 0.5 : false;
      rec.captions.push_back(text);
      rec.log_probs.push_back(h.log_prob);
      rec.novel.push_back(is_novel);
    }
    if (!rec.captions.empty()) {
      ++total;
      if (rec.novel.front()) ++novel;
    }
    outcome.records.push_back(std::move(rec));
  }
  outcome.novelty =
      total == 0 ? 0.0
                 : static_cast<double>(novel) / static_cast<double>(total);
  return outcome;
}

int cmd_caption(const std::vector<std::string>& checkpoint_paths,
                const std::string& data_path, const std::string& mode,
                std::size_t beam, std::size_t max_length, double temperature,
                std::uint64_t seed, const std::string& train_data,
                const std::string& out_path) {
  nic::DecodeConfig cfg;
  cfg.mode = nic::parse_decode_mode(mode);
  cfg.beam_size = beam;
  cfg.max_length = max_length;
  cfg.temperature = temperature;

  std::cout << "caption effective config:\n";
  print_kv("mode", mode);
  print_kv("beam_size", std::to_string(beam));
  print_kv("max_length", std::to_string(max_length));
  print_kv("temperature", std::to_string(temperature));
  print_kv("seed", std::to_string(seed));
  print_kv("ensemble_size", std::to_string(checkpoint_paths.size()));

  auto checkpoints = load_checkpoints(checkpoint_paths);
  nic::Dataset ds = nic::load_dataset(data_path);
  std::optional<nic::Dataset> train_ds;
  if (!train_data.empty()) train_ds = nic::load_dataset(train_data);

  CaptionOutcome outcome = run_caption(
      checkpoints, ds, cfg, seed, train_ds ? &*train_ds : nullptr);
  nic::save_caption_records(outcome.records, out_path);
  std::cout << "captioned " << outcome.records.size() << " images";
  if (train_ds) std::cout << ", novelty rate " << outcome.novelty;
  std::cout << "; wrote " << out_path << "\n";
  return 0;
}

// ---------------- evaluate ----------------

int cmd_evaluate(const std::string& candidates, const std::string& references,
                 const std::string& out_path) {
  std::cout << "evaluate effective config:\n";
  print_kv("candidates", candidates);
  print_kv("references", references);
  nic::MetricReport report = nic::evaluate_corpus(candidates, references);
  std::cout << nic::format_report_table(report);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw nic::IoError("cannot open report file: " + out_path);
    out << nic::report_to_json(report) << "\n";
  }
  return 0;
}

// ---------------- gradcheck ----------------

int cmd_gradcheck(std::uint64_t seed, std::size_t hidden, std::size_t vocab,
                  std::size_t features, std::size_t captions, double eps,
                  std::size_t coords, double tol) {
  std::cout << "gradcheck effective config:\n";
  print_kv("seed", std::to_string(seed));
  print_kv("hidden", std::to_string(hidden));
  print_kv("vocab", std::to_string(vocab));
  print_kv("features", std::to_string(features));
  print_kv("captions", std::to_string(captions));
  print_kv("eps", std::to_string(eps));
  print_kv("coords_per_matrix", std::to_string(coords));
  print_kv("tolerance", std::to_string(tol));

  nic::check(vocab >= 4, "gradcheck: vocab must be >= 4");
  nic::ModelDims dims{features, hidden, vocab};
  nic::Rng rng(seed);
  nic::ModelParams params = nic::ModelParams::random(dims, rng);

  // random feature vectors and captions over the non-reserved ids
  std::vector<nic::Vec> feats;
  std::vector<std::vector<int>> caps;
  for (std::size_t i = 0; i < captions; ++i) {
    nic::Vec f(features);
    for (double& x : f) x = rng.next_symmetric(1.0);
    feats.push_back(std::move(f));
    std::vector<int> cap{nic::Vocabulary::kStart};
    const std::size_t len = 3 + rng.next_u64() % 4;
    for (std::size_t t = 0; t < len; ++t)
      cap.push_back(static_cast<int>(3 + rng.next_u64() % (vocab - 3)));
    cap.push_back(nic::Vocabulary::kStop);
    caps.push_back(std::move(cap));
  }

  auto loss_fn = [&](const nic::ModelParams& p) {
    double total = 0.0;
    nic::Rng r(0);
    for (std::size_t i = 0; i < caps.size(); ++i)
      total += nic::forward_caption(p, feats[i], caps[i], {}, r).first;
    return total;
  };

  nic::ModelParams analytic(dims);
  {
    nic::Rng r(0);
    for (std::size_t i = 0; i < caps.size(); ++i) {
      auto [loss, cache] =
          nic::forward_caption(params, feats[i], caps[i], {}, r);
      nic::ModelParams g = nic::backward_caption(params, cache);
      auto am = analytic.matrices();
      auto gm = g.matrices();
      for (std::size_t k = 0; k < am.size(); ++k)
        for (std::size_t j = 0; j < am[k].mat->data.size(); ++j)
          am[k].mat->data[j] += gm[k].mat->data[j];
    }
  }

  nic::Rng probe(seed + 1);
  nic::GradCheckReport report = nic::finite_diff_gradcheck(
      loss_fn, params, analytic, eps, coords, probe, tol);

  double worst = 0.0;
  for (const auto& entry : report.entries) {
    std::printf("  %-6s max rel err %.3e  max abs err %.3e\n",
                entry.name.c_str(), entry.max_rel_err, entry.max_abs_err);
    worst = std::max(worst, entry.max_rel_err);
  }
  std::printf("gradcheck %s: worst relative error %.3e (tolerance %.1e)\n",
              report.pass ? "PASS" : "FAIL", worst, tol);
  return report.pass ? 0 : kExitGradcheckFailed;
}

// ---------------- sweep-beam ----------------

int cmd_sweep_beam(const std::vector<std::string>& checkpoint_paths,
                   const std::string& data_path, const std::string& train_data,
                   const std::vector<std::size_t>& beams,
                   std::size_t max_length, const std::string& out_path) {
  std::cout << "sweep-beam effective config:\n";
  print_kv("beams", [&] {
    std::string s;
    for (auto b : beams) s += std::to_string(b) + " ";
    return s;
  }());
  print_kv("ensemble_size", std::to_string(checkpoint_paths.size()));

  auto checkpoints = load_checkpoints(checkpoint_paths);
  nic::Dataset ds = nic::load_dataset(data_path);
  nic::Dataset train_ds = nic::load_dataset(train_data);

  std::ostringstream table;
  table << "# beam sweep: scores per beam size; CIDEr often peaks at a "
           "small beam and smaller beams raise novelty\n";
  table << "beam  CIDEr    BLEU-4   novelty\n";
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t b : beams) {
    nic::DecodeConfig cfg;
    cfg.mode = nic::DecodeMode::kBeam;
    cfg.beam_size = b;
    cfg.max_length = max_length;
    CaptionOutcome outcome = run_caption(checkpoints, ds, cfg, 0, &train_ds);

    std::vector<nic::EvalInstance> instances;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      nic::EvalInstance inst;
      inst.image_id = ds[i].id;
      inst.candidate = nic::tokenize(outcome.records[i].captions.empty()
                                         ? std::string()
                                         : outcome.records[i].captions.front());
      inst.references = ds[i].captions;
      instances.push_back(std::move(inst));
    }
    const double cider_score = nic::cider(instances);
    const double bleu4 = nic::bleu(instances, 4);
    char line[128];
    std::snprintf(line, sizeof(line), "%-5zu %-8.4f %-8.4f %-8.4f\n", b,
                  cider_score, bleu4, outcome.novelty);
    table << line;
    nlohmann::json row;
    row["beam"] = b;
    row["cider"] = cider_score;
    row["bleu_4"] = bleu4;
    row["novelty"] = outcome.novelty;
    rows.push_back(row);
  }
  std::cout << table.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw nic::IoError("cannot open sweep report: " + out_path);
    out << rows.dump(2) << "\n";
  }
  return 0;
}

// ---------------- rank ----------------

int cmd_rank(const std::vector<std::string>& checkpoint_paths,
             const std::string& data_path, const std::string& out_path) {
  auto checkpoints = load_checkpoints(checkpoint_paths);
  nic::Dataset ds = nic::load_dataset(data_path);
  nic::Ensemble models = make_ensemble(checkpoints);
  const nic::Vocabulary& vocab = checkpoints.front().vocab;

  nic::RankReport caps = nic::rank_captions(models, vocab, ds);
  nic::RankReport imgs = nic::rank_images(models, vocab, ds);
  auto show = [](const char* name, const nic::RankReport& r) {
    std::printf("%s: R@1 %.4f  R@5 %.4f  R@10 %.4f  median rank %.1f\n", name,
                r.recall_at_1, r.recall_at_5, r.recall_at_10, r.median_rank);
  };
  show("captions-given-image", caps);
  show("images-given-caption", imgs);
  if (!out_path.empty()) {
    nlohmann::json j;
    for (auto [name, r] : {std::pair{"captions_given_image", &caps},
                           std::pair{"images_given_caption", &imgs}}) {
      j[name] = {{"recall_at_1", r->recall_at_1},
                 {"recall_at_5", r->recall_at_5},
                 {"recall_at_10", r->recall_at_10},
                 {"median_rank", r->median_rank}};
    }
    std::ofstream out(out_path);
    if (!out) throw nic::IoError("cannot open rank report: " + out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

// ---------------- embed-nn ----------------

int cmd_embed_nn(const std::string& checkpoint_path,
                 const std::vector<std::string>& queries, std::size_t n) {
  nic::Checkpoint ckpt = nic::load_checkpoint(checkpoint_path);
  for (const auto& q : queries) {
    auto neighbors = nic::embedding_neighbors(ckpt.params, ckpt.vocab, q, n);
    std::cout << q << ":";
    for (const auto& [tok, sim] : neighbors) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s(%.3f)", tok.c_str(), sim);
      std::cout << buf;
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural image caption generator: LSTM decoder with beam "
               "search and a caption metric suite"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_out = "data";
  nic::SceneSpec spec;
  std::string subjects, colors, actions, locations;
  std::vector<std::string> held_out;
  gen->add_option("--out-dir", gen_out, "output directory");
  gen->add_option("--subjects", subjects, "comma-separated subject axis");
  gen->add_option("--colors", colors, "comma-separated color axis");
  gen->add_option("--actions", actions, "comma-separated action axis");
  gen->add_option("--locations", locations, "comma-separated location axis");
  gen->add_option("--captions-per-scene", spec.captions_per_scene);
  gen->add_option("--noise", spec.noise_amplitude, "feature noise amplitude");
  gen->add_option("--train-fraction", spec.train_fraction);
  gen->add_option("--val-fraction", spec.val_fraction);
  gen->add_option("--test-fraction", spec.test_fraction);
  gen->add_option("--held-out", held_out,
                  "held-out tuple subject,color,action,location (repeatable)");
  gen->add_option("--seed", spec.seed);

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_data, tr_out = "model.ckpt", tr_log, tr_config, tr_resume;
  nic::TrainConfig tcfg;
  std::string tr_schedule;
  double tr_lr = -1.0, tr_dropout = -1.0;
  long long tr_steps = -1, tr_phase1 = -1, tr_embed = -1, tr_min_count = -1;
  long long tr_seed = -1;
  tr->add_option("--data", tr_data, "training dataset file")->required();
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--out", tr_out, "checkpoint output path");
  tr->add_option("--log", tr_log, "training log path (JSON lines)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--steps", tr_steps, "total SGD steps");
  tr->add_option("--phase1-steps", tr_phase1, "steps with frozen encoder");
  tr->add_option("--dropout", tr_dropout, "dropout rate");
  tr->add_option("--min-count", tr_min_count, "vocabulary min token count");
  tr->add_option("--embed-dim", tr_embed, "embedding / LSTM size");
  tr->add_option("--schedule", tr_schedule,
                 "sampling schedule: off|linear|exponential|inverse_sigmoid");
  tr->add_option("--schedule-slope", tcfg.schedule.slope);
  tr->add_option("--schedule-base", tcfg.schedule.base);
  tr->add_option("--schedule-offset", tcfg.schedule.offset);
  tr->add_option("--schedule-cap", tcfg.schedule.cap);
  double tr_grad_clip = 0.0;
  tr->add_option("--grad-clip", tr_grad_clip, "gradient L2 cap, 0 = off");
  tr->add_option("--seed", tr_seed);

  // caption
  auto* cap = app.add_subcommand("caption", "generate captions");
  std::vector<std::string> cap_ckpts;
  std::string cap_data, cap_mode = "beam", cap_train, cap_out = "captions.jsonl";
  std::size_t cap_beam = 3, cap_maxlen = 20;
  double cap_temp = 1.0;
  std::uint64_t cap_seed = 1;
  cap->add_option("--checkpoint", cap_ckpts, "model checkpoint (repeat for an ensemble)")
      ->required();
  cap->add_option("--data", cap_data, "dataset file with features")->required();
  cap->add_option("--mode", cap_mode, "greedy | sample | beam");
  cap->add_option("--beam", cap_beam, "beam size (beam mode)");
  cap->add_option("--max-length", cap_maxlen);
  cap->add_option("--temperature", cap_temp, "sampling temperature");
  cap->add_option("--train-data", cap_train,
                  "training dataset for novelty flags");
  cap->add_option("--out", cap_out, "caption records output");
  cap->add_option("--seed", cap_seed);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score candidates against references");
  std::string ev_cands, ev_refs, ev_out;
  ev->add_option("--candidates", ev_cands, "caption records file")->required();
  ev->add_option("--references", ev_refs, "references file")->required();
  ev->add_option("--out", ev_out, "JSON report output path");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient verification");
  std::uint64_t gc_seed = 1;
  std::size_t gc_hidden = 8, gc_vocab = 20, gc_features = 6, gc_captions = 2;
  std::size_t gc_coords = 8;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  gc->add_option("--seed", gc_seed);
  gc->add_option("--hidden", gc_hidden);
  gc->add_option("--vocab", gc_vocab);
  gc->add_option("--features", gc_features);
  gc->add_option("--captions", gc_captions);
  gc->add_option("--eps", gc_eps);
  gc->add_option("--coords", gc_coords, "probed coordinates per matrix");
  gc->add_option("--tol", gc_tol);

  // sweep-beam
  auto* sw = app.add_subcommand("sweep-beam",
                                "score and novelty across beam sizes");
  std::vector<std::string> sw_ckpts;
  std::string sw_data, sw_train, sw_out;
  std::vector<std::size_t> sw_beams = {1, 2, 3, 5, 10, 20};
  std::size_t sw_maxlen = 20;
  sw->add_option("--checkpoint", sw_ckpts, "model checkpoint (repeatable)")
      ->required();
  sw->add_option("--data", sw_data, "evaluation dataset")->required();
  sw->add_option("--train-data", sw_train, "training dataset for novelty")
      ->required();
  sw->add_option("--beams", sw_beams, "beam sizes to sweep");
  sw->add_option("--max-length", sw_maxlen);
  sw->add_option("--out", sw_out, "JSON report output path");

  // rank
  auto* rk = app.add_subcommand("rank", "recall@k and median rank, both directions");
  std::vector<std::string> rk_ckpts;
  std::string rk_data, rk_out;
  rk->add_option("--checkpoint", rk_ckpts)->required();
  rk->add_option("--data", rk_data)->required();
  rk->add_option("--out", rk_out, "JSON report output path");

  // embed-nn
  auto* nn = app.add_subcommand("embed-nn", "embedding nearest neighbors");
  std::string nn_ckpt;
  std::vector<std::string> nn_queries;
  std::size_t nn_n = 5;
  nn->add_option("--checkpoint", nn_ckpt)->required();
  nn->add_option("--query", nn_queries, "query word (repeatable)")->required();
  nn->add_option("--n", nn_n, "neighbors per query");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadFlags;
  }

  try {
    if (gen->parsed()) {
      if (!subjects.empty()) spec.subjects = split_csv(subjects);
      if (!colors.empty()) spec.colors = split_csv(colors);
      if (!actions.empty()) spec.actions = split_csv(actions);
      if (!locations.empty()) spec.locations = split_csv(locations);
      return cmd_gen_data(gen_out, spec, held_out);
    }
    if (tr->parsed()) {
      if (!tr_config.empty()) {
        // flags passed on the command line overlay the config file
        const auto flag_schedule = tcfg.schedule;
        tcfg = nic::parse_train_config(tr_config);
        if (tr->count("--schedule-slope")) tcfg.schedule.slope = flag_schedule.slope;
        if (tr->count("--schedule-base")) tcfg.schedule.base = flag_schedule.base;
        if (tr->count("--schedule-offset"))
          tcfg.schedule.offset = flag_schedule.offset;
        if (tr->count("--schedule-cap")) tcfg.schedule.cap = flag_schedule.cap;
      }
      if (tr->count("--grad-clip")) tcfg.grad_clip = tr_grad_clip;
      if (tr_lr >= 0.0) tcfg.learning_rate = tr_lr;
      if (tr_steps >= 0) tcfg.total_steps = (std::size_t)tr_steps;
      if (tr_phase1 >= 0) tcfg.phase1_steps = (std::size_t)tr_phase1;
      if (tr_dropout >= 0.0) tcfg.dropout_rate = tr_dropout;
      if (tr_min_count >= 0) tcfg.min_token_count = (std::size_t)tr_min_count;
      if (tr_embed >= 0) tcfg.embed_dim = (std::size_t)tr_embed;
      if (tr_seed >= 0) tcfg.seed = (std::uint64_t)tr_seed;
      if (!tr_schedule.empty())
        tcfg.schedule.kind = nic::parse_schedule_kind(tr_schedule);
      tcfg.validate();
      return cmd_train(tcfg, tr_data, tr_out, tr_log, tr_resume);
    }
    if (cap->parsed())
      return cmd_caption(cap_ckpts, cap_data, cap_mode, cap_beam, cap_maxlen,
                         cap_temp, cap_seed, cap_train, cap_out);
    if (ev->parsed()) return cmd_evaluate(ev_cands, ev_refs, ev_out);
    if (gc->parsed())
      return cmd_gradcheck(gc_seed, gc_hidden, gc_vocab, gc_features,
                           gc_captions, gc_eps, gc_coords, gc_tol);
    if (sw->parsed())
      return cmd_sweep_beam(sw_ckpts, sw_data, sw_train, sw_beams, sw_maxlen,
                            sw_out);
    if (rk->parsed()) return cmd_rank(rk_ckpts, rk_data, rk_out);
    if (nn->parsed()) return cmd_embed_nn(nn_ckpt, nn_queries, nn_n);
  } catch (const nic::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitBadFlags;
}
