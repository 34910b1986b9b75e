// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Criteria 7 and 8 drive the command-line binary
// (path injected as NIC_CLI_PATH at compile time).
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metric_oracles.hpp"
#include "nic/dataset.hpp"
#include "nic/inference.hpp"
#include "nic/metrics.hpp"
#include "nic/model.hpp"
#include "nic/training.hpp"
#include "nic/vocab.hpp"

using namespace nic;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass,
            const std::string& detail) {
  std::cout << "criterion " << number << " (" << name << "): "
            << (pass ? "PASS" : "FAIL") << "  [" << detail << "]\n";
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

ModelParams random_model(const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  return ModelParams::random(dims, rng);
}

Vec random_features(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Vec f(n);
  for (double& x : f) x = rng.next_symmetric(1.0);
  return f;
}

// ---- criterion 1: gradient exactness ----

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5 && pass; ++seed) {
    ModelDims dims{6, 8, 20};
    Rng rng(seed);
    ModelParams params = ModelParams::random(dims, rng);

    std::vector<Vec> feats;
    std::vector<std::vector<int>> caps;
    for (std::size_t i = 0; i < 2; ++i) {
      feats.push_back(random_features(6, seed * 10 + i));
      std::vector<int> cap{Vocabulary::kStart};
      const std::size_t len = 4 + rng.next_u64() % 3;
      for (std::size_t t = 0; t < len; ++t)
        cap.push_back(static_cast<int>(3 + rng.next_u64() % 17));
      cap.push_back(Vocabulary::kStop);
      caps.push_back(std::move(cap));
    }

    auto loss_fn = [&](const ModelParams& p) {
      double total = 0.0;
      Rng r(0);
      for (std::size_t i = 0; i < caps.size(); ++i)
        total += forward_caption(p, feats[i], caps[i], {}, r).first;
      return total;
    };

    ModelParams analytic(dims);
    {
      Rng r(0);
      for (std::size_t i = 0; i < caps.size(); ++i) {
        auto [loss, cache] = forward_caption(params, feats[i], caps[i], {}, r);
        ModelParams g = backward_caption(params, cache);
        auto am = analytic.matrices();
        auto gm = g.matrices();
        for (std::size_t k = 0; k < am.size(); ++k)
          for (std::size_t j = 0; j < am[k].mat->data.size(); ++j)
            am[k].mat->data[j] += gm[k].mat->data[j];
      }
    }

    Rng probe(seed + 100);
    GradCheckReport rep = finite_diff_gradcheck(loss_fn, params, analytic,
                                                1e-5, 10, probe, 1e-4);
    for (const auto& e : rep.entries) worst = std::max(worst, e.max_rel_err);
    pass = pass && rep.pass;
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 30.0;
  std::ostringstream d;
  d << "5 seeds, worst rel err " << worst << ", " << elapsed << " s";
  report(1, "gradient exactness", pass, d.str());
}

// ---- criterion 2: overfit memorization ----

void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  SceneSpec spec;
  spec.subjects = {"dog", "cat"};
  spec.colors = {"red", "blue"};
  spec.actions = {"running", "sleeping"};
  spec.locations = {"park", "house"};
  spec.captions_per_scene = 1;
  spec.train_fraction = 1.0;
  spec.val_fraction = 0.0;
  spec.test_fraction = 0.0;
  spec.seed = 11;
  Dataset ds = generate_dataset(spec).train;

  TrainConfig cfg;
  cfg.embed_dim = 32;
  cfg.learning_rate = 0.05;
  cfg.total_steps = 2000;
  cfg.dropout_rate = 0.0;
  cfg.schedule.kind = ScheduleKind::kOff;
  cfg.seed = 7;
  TrainResult result = train(cfg, ds);

  // teacher-forced mean per-token loss over the whole training set
  double total_loss = 0.0;
  std::size_t total_tokens = 0;
  Rng rng(0);
  for (const auto& ex : ds)
    for (const auto& cap : ex.captions) {
      auto [loss, cache] = forward_caption(
          result.params, ex.features, result.vocab.encode(cap), {}, rng);
      total_loss += loss;
      total_tokens += cache.token_count;
    }
  const double mean_token_loss = total_loss / static_cast<double>(total_tokens);

  std::size_t reproduced = 0, captions = 0;
  Ensemble models{&result.params};
  for (const auto& ex : ds) {
    Hypothesis h = decode_greedy(models, ex.features, 20);
    for (const auto& cap : ex.captions) {
      ++captions;
      if (result.vocab.decode(h.tokens) == cap) ++reproduced;
    }
  }
  const double frac =
      static_cast<double>(reproduced) / static_cast<double>(captions);
  const double ppl = perplexity(result.params, result.vocab, ds);
  const double elapsed = seconds_since(t0);

  const bool pass = mean_token_loss < 0.1 && frac >= 0.9 && ppl < 1.3 &&
                    elapsed < 120.0;
  std::ostringstream d;
  d << "mean token loss " << mean_token_loss << ", verbatim " << reproduced
    << "/" << captions << ", perplexity " << ppl << ", " << elapsed << " s";
  report(2, "overfit memorization", pass, d.str());
}

// ---- criterion 3: decoder correctness ----

struct BruteBest {
  std::vector<int> tokens;
  double log_prob = -std::numeric_limits<double>::infinity();
};

void brute_force_extend(const Ensemble& models, std::vector<int>& prefix,
                        const std::vector<LstmState>& states, const Vec& p,
                        double score, std::size_t max_length, BruteBest& best) {
  {
    const double total = score + std::log(p[Vocabulary::kStop]);
    if (total > best.log_prob) {
      best.log_prob = total;
      best.tokens = prefix;
    }
  }
  if (prefix.size() >= max_length) return;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (static_cast<int>(j) == Vocabulary::kStop) continue;
    prefix.push_back(static_cast<int>(j));
    auto [next, np] = ensemble_step(models, static_cast<int>(j), states);
    brute_force_extend(models, prefix, next, np, score + std::log(p[j]),
                       max_length, best);
    prefix.pop_back();
  }
}

BruteBest brute_force_best(const Ensemble& models, const Vec& features,
                           std::size_t max_length) {
  auto [states, p0] = ensemble_image_step(models, features);
  auto [states1, p] = ensemble_step(models, Vocabulary::kStart, states);
  BruteBest best;
  std::vector<int> prefix;
  brute_force_extend(models, prefix, states1, p, 0.0, max_length, best);
  return best;
}

void criterion_3() {
  bool k1_pass = true;
  for (std::uint64_t seed = 1; seed <= 100 && k1_pass; ++seed) {
    ModelDims dims{3, 5, 7};
    ModelParams m = random_model(dims, seed);
    Vec feats = random_features(3, seed + 1000);
    Ensemble models{&m};
    Hypothesis greedy = decode_greedy(models, feats, 12);
    DecodeConfig cfg;
    cfg.mode = DecodeMode::kBeam;
    cfg.beam_size = 1;
    cfg.max_length = 12;
    auto beam = beam_search(models, feats, cfg);
    k1_pass = !beam.empty() && beam.front().tokens == greedy.tokens &&
              beam.front().log_prob == greedy.log_prob;
  }

  bool wide_pass = true;
  bool sorted_pass = true;
  for (std::uint64_t seed = 1; seed <= 20 && wide_pass; ++seed) {
    ModelDims dims{3, 4, 4};
    ModelParams m = random_model(dims, seed + 500);
    Vec feats = random_features(3, seed + 600);
    Ensemble models{&m};
    DecodeConfig cfg;
    cfg.mode = DecodeMode::kBeam;
    cfg.beam_size = 64;  // 4^3
    cfg.max_length = 3;
    auto nbest = beam_search(models, feats, cfg);
    BruteBest best = brute_force_best(models, feats, 3);
    wide_pass = !nbest.empty() && nbest.front().tokens == best.tokens &&
                std::abs(nbest.front().log_prob - best.log_prob) < 1e-12;
    for (std::size_t i = 1; i < nbest.size(); ++i)
      sorted_pass = sorted_pass && nbest[i - 1].log_prob >= nbest[i].log_prob;
  }

  const bool pass = k1_pass && wide_pass && sorted_pass;
  std::ostringstream d;
  d << "k=1==greedy " << (k1_pass ? "ok" : "bad") << ", wide==exhaustive "
    << (wide_pass ? "ok" : "bad") << ", n-best sorted "
    << (sorted_pass ? "ok" : "bad");
  report(3, "decoder correctness", pass, d.str());
}

// ---- criterion 4: metric oracle equivalence ----

std::vector<EvalInstance> random_corpus(std::uint64_t seed,
                                        std::size_t count) {
  static const std::vector<std::string> words = {
      "a", "the", "dog", "cat", "red", "runs", "park", "sat"};
  Rng rng(seed);
  std::vector<EvalInstance> corpus;
  for (std::size_t i = 0; i < count; ++i) {
    EvalInstance inst;
    inst.image_id = "img" + std::to_string(i);
    const std::size_t clen = 1 + rng.next_u64() % 8;
    for (std::size_t t = 0; t < clen; ++t)
      inst.candidate.push_back(words[rng.next_u64() % words.size()]);
    const std::size_t nrefs = 1 + rng.next_u64() % 3;
    for (std::size_t r = 0; r < nrefs; ++r) {
      std::vector<std::string> ref;
      const std::size_t rlen = 1 + rng.next_u64() % 8;
      for (std::size_t t = 0; t < rlen; ++t)
        ref.push_back(words[rng.next_u64() % words.size()]);
      inst.references.push_back(std::move(ref));
    }
    corpus.push_back(std::move(inst));
  }
  return corpus;
}

void criterion_4() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto corpus = random_corpus(seed, 4);
    for (std::size_t n = 1; n <= 4; ++n)
      worst = std::max(worst, std::abs(bleu(corpus, n) - oracle::bleu(corpus, n)));
    worst = std::max(worst, std::abs(rouge_l(corpus) - oracle::rouge_l(corpus)));
    worst = std::max(worst, std::abs(cider(corpus) - oracle::cider(corpus)));
    worst = std::max(worst,
                     std::abs(meteor_simplified(corpus) - oracle::meteor(corpus)));
  }

  // single-reference self-evaluation
  std::vector<EvalInstance> self;
  for (int i = 0; i < 3; ++i) {
    EvalInstance inst;
    inst.image_id = "s" + std::to_string(i);
    inst.candidate = tokenize("a red dog running in the park " +
                              std::to_string(i));
    inst.references = {inst.candidate};
    self.push_back(inst);
  }
  const double self_bleu4 = bleu(self, 4);
  const double self_rouge = rouge_l(self);
  const double self_cider = cider(self);

  const bool pass = worst <= 1e-9 && std::abs(self_bleu4 - 1.0) <= 1e-9 &&
                    std::abs(self_rouge - 1.0) <= 1e-9 &&
                    std::abs(self_cider - 10.0) <= 1e-9;
  std::ostringstream d;
  d << "50 corpora, worst oracle gap " << worst << "; self BLEU-4 "
    << self_bleu4 << " ROUGE-L " << self_rouge << " CIDEr " << self_cider;
  report(4, "metric oracle equivalence", pass, d.str());
}

// ---- criterion 5: perplexity closed form ----

void criterion_5() {
  SceneSpec spec;
  spec.subjects = {"dog", "cat"};
  spec.colors = {"red"};
  spec.actions = {"running"};
  spec.locations = {"park"};
  spec.captions_per_scene = 2;
  spec.train_fraction = 1.0;
  spec.val_fraction = 0.0;
  spec.test_fraction = 0.0;
  Dataset ds = generate_dataset(spec).train;
  Vocabulary vocab = build_vocabulary(all_captions(ds), 1);

  // all-zero weights give zero logits, a uniform softmax at every step
  ModelDims dims{ds.front().features.size(), 8, vocab.size()};
  ModelParams uniform(dims);
  const double ppl = perplexity(uniform, vocab, ds);
  const double v = static_cast<double>(vocab.size());
  const bool pass = std::abs(ppl - v) <= 1e-9 * v;
  std::ostringstream d;
  d << "perplexity " << ppl << " vs V " << v;
  report(5, "uniform perplexity closed form", pass, d.str());
}

// ---- criterion 6: training-mode contracts ----

void criterion_6() {
  SceneSpec spec;
  spec.subjects = {"dog", "cat"};
  spec.colors = {"red", "blue"};
  spec.actions = {"running"};
  spec.locations = {"park"};
  spec.captions_per_scene = 2;
  spec.train_fraction = 1.0;
  spec.val_fraction = 0.0;
  spec.test_fraction = 0.0;
  Dataset ds = generate_dataset(spec).train;

  TrainConfig cfg;
  cfg.embed_dim = 16;
  cfg.total_steps = 200;
  cfg.dropout_rate = 0.1;
  cfg.schedule.kind = ScheduleKind::kOff;
  cfg.seed = 21;

  TrainResult a = train(cfg, ds);
  TrainResult b = train(cfg, ds);
  bool bitwise = true;
  {
    auto am = a.params.matrices();
    auto bm = b.params.matrices();
    for (std::size_t k = 0; k < am.size(); ++k)
      bitwise = bitwise && am[k].mat->data == bm[k].mat->data;
  }

  // frozen-encoder phase leaves w_enc untouched
  Vocabulary vocab = build_vocabulary(all_captions(ds), 1);
  ModelDims dims{ds.front().features.size(), 16, vocab.size()};
  Rng rng(33);
  ModelParams init = ModelParams::random(dims, rng);
  const std::vector<double> w_enc_before = init.w_enc.data;
  TrainConfig frozen_cfg = cfg;
  frozen_cfg.phase1_steps = frozen_cfg.total_steps;
  TrainResult frozen = train(frozen_cfg, ds, {{init, vocab}});
  const bool enc_frozen = frozen.params.w_enc.data == w_enc_before;

  // identical-member ensembles decode like the single model
  Ensemble one{&a.params};
  Ensemble two{&a.params, &a.params};
  Ensemble three{&a.params, &a.params, &a.params};
  bool ensemble_ok = true;
  DecodeConfig dc;
  dc.mode = DecodeMode::kBeam;
  dc.beam_size = 3;
  dc.max_length = 15;
  for (const auto& ex : ds) {
    auto h1 = beam_search(one, ex.features, dc);
    auto h2 = beam_search(two, ex.features, dc);
    auto h3 = beam_search(three, ex.features, dc);
    ensemble_ok = ensemble_ok && h1.front().tokens == h2.front().tokens &&
                  h1.front().tokens == h3.front().tokens &&
                  std::abs(h1.front().log_prob - h3.front().log_prob) < 1e-12;
    Hypothesis g1 = decode_greedy(one, ex.features, 15);
    Hypothesis g3 = decode_greedy(three, ex.features, 15);
    ensemble_ok = ensemble_ok && g1.tokens == g3.tokens;
  }

  const bool pass = bitwise && enc_frozen && ensemble_ok;
  std::ostringstream d;
  d << "bitwise repro " << (bitwise ? "ok" : "bad") << ", frozen encoder "
    << (enc_frozen ? "ok" : "bad") << ", identical ensemble "
    << (ensemble_ok ? "ok" : "bad");
  report(6, "training-mode contracts", pass, d.str());
}

// ---- criteria 7 and 8: CLI pipeline ----

int run(const std::string& cmd) {
  return std::system((cmd + " > cli_stdout.txt 2> cli_stderr.txt").c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_7() {
  const std::string nic = NIC_CLI_PATH;
  fs::remove_all("acc7");
  fs::create_directories("acc7");
  bool pass = true;
  std::string detail;

  pass = pass && run(nic +
                     " gen-data --out-dir acc7/data --seed 5"
                     " --held-out dog,red,running,park"
                     " --held-out cat,blue,eating,house") == 0;
  pass = pass && run(nic +
                     " train --data acc7/data/train.jsonl --out acc7/model.ckpt"
                     " --steps 4000 --embed-dim 48 --dropout 0.1 --seed 9") == 0;
  pass = pass && run(nic +
                     " sweep-beam --checkpoint acc7/model.ckpt"
                     " --data acc7/data/test.jsonl"
                     " --train-data acc7/data/train.jsonl"
                     " --out acc7/sweep.json") == 0;
  if (pass) {
    std::ifstream in("acc7/sweep.json");
    nlohmann::json rows = nlohmann::json::parse(in);
    const std::vector<int> want = {1, 2, 3, 5, 10, 20};
    pass = rows.is_array() && rows.size() == want.size();
    for (std::size_t i = 0; pass && i < rows.size(); ++i)
      pass = rows[i]["beam"] == want[i] && rows[i].contains("cider") &&
             rows[i].contains("novelty");
    detail += pass ? "sweep report ok" : "sweep report malformed";
  } else {
    detail += "pipeline step failed";
  }

  double median = 0.0, r1 = 0.0;
  if (pass) {
    pass = run(nic +
               " rank --checkpoint acc7/model.ckpt"
               " --data acc7/data/train.jsonl --out acc7/rank.json") == 0;
    if (pass) {
      std::ifstream in("acc7/rank.json");
      nlohmann::json j = nlohmann::json::parse(in);
      median = j["captions_given_image"]["median_rank"].get<double>();
      r1 = j["captions_given_image"]["recall_at_1"].get<double>();
      pass = median == 1.0 && r1 >= 0.9;
    }
    std::ostringstream ss;
    ss << "; rank median " << median << " recall@1 " << r1;
    detail += ss.str();
  }
  report(7, "generalization and novelty experiment", pass, detail);
}

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string nic = NIC_CLI_PATH;
  bool pass = true;
  for (const std::string dir : {"acc8a", "acc8b"}) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    pass = pass &&
           run(nic + " gen-data --out-dir " + dir + "/data --seed 5"
                     " --held-out dog,red,running,park") == 0;
    pass = pass &&
           run(nic + " train --data " + dir + "/data/train.jsonl --out " + dir +
               "/model.ckpt --steps 1500 --embed-dim 32 --seed 4") == 0;
    pass = pass && run(nic + " caption --checkpoint " + dir +
                       "/model.ckpt --data " + dir +
                       "/data/test.jsonl --mode beam --beam 3 --train-data " +
                       dir + "/data/train.jsonl --out " + dir +
                       "/caps.jsonl --seed 2") == 0;
    pass = pass && run(nic + " evaluate --candidates " + dir +
                       "/caps.jsonl --references " + dir +
                       "/data/test.jsonl --out " + dir + "/report.json") == 0;
    if (!pass) break;
  }
  bool identical = pass;
  if (pass) {
    for (const std::string rel :
         {"data/train.jsonl", "data/val.jsonl", "data/test.jsonl",
          "model.ckpt", "caps.jsonl", "report.json"}) {
      identical = identical &&
                  slurp(fs::path("acc8a") / rel) == slurp(fs::path("acc8b") / rel);
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = pass && identical && elapsed < 300.0;
  std::ostringstream d;
  d << (pass ? "pipeline ok" : "pipeline step failed") << ", byte-identical "
    << (identical ? "yes" : "no") << ", " << elapsed << " s";
  report(8, "end-to-end determinism", ok, d.str());
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (g_failures == 0) {
    std::cout << "all 8 acceptance criteria passed\n";
    return 0;
  }
  std::cout << g_failures << " acceptance criteria failed\n";
  return 1;
}
