#pragma once

#include <string>
#include <vector>

#include "nic/dataset.hpp"
#include "nic/model.hpp"
#include "nic/vocab.hpp"

namespace nic {

struct EvalInstance {
  std::string image_id;
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;  // non-empty
};

struct MetricReport {
  double bleu[4] = {0.0, 0.0, 0.0, 0.0};  // BLEU-1 .. BLEU-4
  double cider = 0.0;
  double rouge_l = 0.0;
  double meteor_simplified = 0.0;
  std::size_t instance_count = 0;
};

// Corpus-level BLEU-n: clipped m-gram precisions pooled over instances,
// geometric mean over m = 1..n, times the brevity penalty.
double bleu(const std::vector<EvalInstance>& instances, std::size_t n);

// Smoothed (+1 on numerator and denominator) per-sentence BLEU-n,
// diagnostics only.
double sentence_bleu_smoothed(const EvalInstance& instance, std::size_t n);

// TF-IDF n-gram cosine consensus, n = 1..4 averaged, scaled by 10. The IDF
// document unit is one image's reference set, computed over the corpus
// being scored.
double cider(const std::vector<EvalInstance>& instances);

// LCS F-measure with beta = 1.2, max over references, mean over instances.
double rouge_l(const std::vector<EvalInstance>& instances);

// Exact-match METEOR: harmonic mean weighted 9:1 toward recall times a
// fragmentation penalty 0.5 * (chunks / matches)^3. No stemming or
// synonymy; reports label it "simplified".
double meteor_simplified(const std::vector<EvalInstance>& instances);

// exp(total cross-entropy / predicted tokens) over teacher-forced passes.
double perplexity(const ModelParams& params, const Vocabulary& vocab,
                  const Dataset& dataset);

MetricReport evaluate(const std::vector<EvalInstance>& instances);

// candidates: caption-record file (best caption per image is scored);
// references: line-delimited JSON with "id" and "captions".
MetricReport evaluate_corpus(const std::string& candidates_path,
                             const std::string& references_path);

std::vector<EvalInstance> load_references_as_instances(
    const std::string& references_path);

std::string format_report_table(const MetricReport& report);
std::string report_to_json(const MetricReport& report);

}  // namespace nic
