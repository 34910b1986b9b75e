#pragma once

#include <string>
#include <vector>

#include "nic/dataset.hpp"
#include "nic/model.hpp"
#include "nic/vocab.hpp"

namespace nic {

// A partial decode: emitted tokens (start excluded), total log-probability,
// and one recurrent state per ensemble member.
struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  std::vector<LstmState> states;
  bool completed = false;
};

enum class DecodeMode { kGreedy, kSample, kBeam };

struct DecodeConfig {
  DecodeMode mode = DecodeMode::kBeam;
  std::size_t beam_size = 3;
  std::size_t max_length = 20;
  double temperature = 1.0;  // sample mode only
};

DecodeMode parse_decode_mode(const std::string& name);

// Read-only view over the ensemble members.
using Ensemble = std::vector<const ModelParams*>;

// Advances every member one step on the same word and returns the
// arithmetic mean of their probability vectors. Each member embeds the
// word with its own W_e.
std::pair<std::vector<LstmState>, Vec> ensemble_step(
    const Ensemble& models, int token_id, const std::vector<LstmState>& states);

// Image step from zero states.
std::pair<std::vector<LstmState>, Vec> ensemble_image_step(
    const Ensemble& models, const Vec& features);

Hypothesis decode_greedy(const Ensemble& models, const Vec& features,
                         std::size_t max_length);

Hypothesis decode_sample(const Ensemble& models, const Vec& features,
                         std::size_t max_length, double temperature, Rng& rng);

// Width-k search over full-vocabulary extensions; completed hypotheses
// move to a pool and free a live slot. Raw total log-probability scores,
// no length normalization. Returns up to k hypotheses, best first.
// `step_best`, when given, records the best live-or-completed score after
// each word position.
std::vector<Hypothesis> beam_search(const Ensemble& models,
                                    const Vec& features,
                                    const DecodeConfig& config,
                                    std::vector<double>* step_best = nullptr);

std::vector<Hypothesis> decode(const Ensemble& models, const Vec& features,
                               const DecodeConfig& config, Rng& rng);

// Teacher-forced ensemble log-probability of a full caption
// (start ... stop). Equals -forward_caption loss for a single model.
double caption_log_prob(const Ensemble& models, const Vec& features,
                        const std::vector<int>& tokens);

struct RankReport {
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double median_rank = 0.0;
};

// Rank of `truth_index` within `candidates` by the given scores, ties
// sharing the worst tied rank (1-based).
std::size_t rank_of_truth(const std::vector<double>& scores,
                          std::size_t truth_index);

// Each image queries the pool of all dataset captions; scores are
// caption_log_prob normalized by token count. An image's rank is the best
// rank over its own reference captions.
RankReport rank_captions(const Ensemble& models, const Vocabulary& vocab,
                         const Dataset& dataset);
// Each image's first caption queries the pool of all dataset images; raw
// log-prob scores.
RankReport rank_images(const Ensemble& models, const Vocabulary& vocab,
                       const Dataset& dataset);

// Fraction of generated captions whose token sequence does not occur
// verbatim in the training caption set.
double novelty_rate(const std::vector<std::vector<std::string>>& generated,
                    const std::vector<std::vector<std::string>>& training);

// Tokens nearest the query's embedding column by cosine similarity,
// reserved tokens excluded, ties by id.
std::vector<std::pair<std::string, double>> embedding_neighbors(
    const ModelParams& params, const Vocabulary& vocab,
    const std::string& query, std::size_t n);

// -------- caption records --------

struct CaptionRecord {
  std::string image_id;
  std::vector<std::string> captions;   // plain text, best first
  std::vector<double> log_probs;
  std::vector<bool> novel;
};

// Line-delimited JSON, one record per image.
void save_caption_records(const std::vector<CaptionRecord>& records,
                          const std::string& path);
std::vector<CaptionRecord> load_caption_records(const std::string& path);

}  // namespace nic
