#include "nic/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nic/io.hpp"

namespace nic {

namespace {

void check_ensemble(const Ensemble& models) {
  check(!models.empty(), "ensemble: at least one model required");
  const ModelDims& d0 = models.front()->dims;
  for (const ModelParams* m : models) {
    check(m->dims.feature_dim == d0.feature_dim &&
              m->dims.embed_dim == d0.embed_dim &&
              m->dims.vocab_size == d0.vocab_size,
          "ensemble: members disagree on model dimensions");
  }
}

// Mean of the members' softmax distributions over their current outputs.
Vec mean_distribution(const Ensemble& models,
                      const std::vector<LstmState>& states) {
  const std::size_t v = models.front()->dims.vocab_size;
  Vec mean(v, 0.0);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Vec log_p = output_distribution(*models[k], states[k].m);
    for (std::size_t j = 0; j < v; ++j) mean[j] += std::exp(log_p[j]);
  }
  const double inv = 1.0 / static_cast<double>(models.size());
  for (double& x : mean) x *= inv;
  return mean;
}

// Image step from zero state, then the start word; the returned
// distribution predicts the first caption word, as in training.
std::pair<std::vector<LstmState>, Vec> begin_decode(const Ensemble& models,
                                                    const Vec& features) {
  auto [states, p] = ensemble_image_step(models, features);
  return ensemble_step(models, Vocabulary::kStart, states);
}

std::size_t argmax_lowest_id(const Vec& p) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

}  // namespace

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "greedy") return DecodeMode::kGreedy;
  if (name == "sample") return DecodeMode::kSample;
  if (name == "beam") return DecodeMode::kBeam;
  throw std::invalid_argument("unknown decode mode: " + name);
}

std::pair<std::vector<LstmState>, Vec> ensemble_step(
    const Ensemble& models, int token_id,
    const std::vector<LstmState>& states) {
  check_ensemble(models);
  check(states.size() == models.size(), "ensemble_step: state count mismatch");
  std::vector<LstmState> next;
  next.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Vec x = embed_word(*models[k], static_cast<std::size_t>(token_id));
    next.push_back(lstm_step(*models[k], x, states[k]).first);
  }
  Vec p = mean_distribution(models, next);
  return {std::move(next), std::move(p)};
}

std::pair<std::vector<LstmState>, Vec> ensemble_image_step(
    const Ensemble& models, const Vec& features) {
  check_ensemble(models);
  std::vector<LstmState> next;
  next.reserve(models.size());
  for (const ModelParams* m : models) {
    const Vec x = encode_image(*m, features);
    next.push_back(lstm_step(*m, x, LstmState::zero(m->dims.embed_dim)).first);
  }
  Vec p = mean_distribution(models, next);
  return {std::move(next), std::move(p)};
}

Hypothesis decode_greedy(const Ensemble& models, const Vec& features,
                         std::size_t max_length) {
  auto [states, p] = begin_decode(models, features);
  Hypothesis hyp;
  hyp.states = std::move(states);
  while (true) {
    const std::size_t next = argmax_lowest_id(p);
    hyp.log_prob += std::log(p[next]);
    if (static_cast<int>(next) == Vocabulary::kStop) {
      hyp.completed = true;
      break;
    }
    hyp.tokens.push_back(static_cast<int>(next));
    if (hyp.tokens.size() >= max_length) break;
    std::tie(hyp.states, p) =
        ensemble_step(models, static_cast<int>(next), hyp.states);
  }
  return hyp;
}

Hypothesis decode_sample(const Ensemble& models, const Vec& features,
                         std::size_t max_length, double temperature,
                         Rng& rng) {
  check(temperature > 0.0, "decode_sample: temperature must be > 0");
  auto [states, p] = begin_decode(models, features);
  Hypothesis hyp;
  hyp.states = std::move(states);
  while (true) {
    // p^{1/T} renormalized, computed in the log domain
    Vec q(p.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.size(); ++j) {
      q[j] = std::log(p[j]) / temperature;
      mx = std::max(mx, q[j]);
    }
    double sum = 0.0;
    for (double& x : q) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (double& x : q) x /= sum;
    const std::size_t next = sample_categorical(q, rng);
    hyp.log_prob += std::log(p[next]);
    if (static_cast<int>(next) == Vocabulary::kStop) {
      hyp.completed = true;
      break;
    }
    hyp.tokens.push_back(static_cast<int>(next));
    if (hyp.tokens.size() >= max_length) break;
    std::tie(hyp.states, p) =
        ensemble_step(models, static_cast<int>(next), hyp.states);
  }
  return hyp;
}

std::vector<Hypothesis> beam_search(const Ensemble& models,
                                    const Vec& features,
                                    const DecodeConfig& config,
                                    std::vector<double>* step_best) {
  check(config.beam_size >= 1, "beam_search: beam size must be >= 1");
  check(config.max_length >= 1, "beam_search: max_length must be >= 1");
  const std::size_t k = config.beam_size;

  struct Live {
    Hypothesis hyp;
    Vec next_p;  // distribution over the next word
  };

  std::vector<Live> live;
  {
    auto [states, p] = begin_decode(models, features);
    Live init;
    init.hyp.states = std::move(states);
    init.next_p = std::move(p);
    live.push_back(std::move(init));
  }
  std::vector<Hypothesis> completed;

  auto sort_desc = [](std::vector<Hypothesis>& hs) {
    std::stable_sort(hs.begin(), hs.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                       return a.log_prob > b.log_prob;
                     });
  };

  for (std::size_t pos = 0; pos <= config.max_length && !live.empty(); ++pos) {
    // Stop once no live hypothesis can still beat the k-th completed one.
    if (completed.size() >= k) {
      sort_desc(completed);
      const double bar = completed[k - 1].log_prob;
      double best_live = -std::numeric_limits<double>::infinity();
      for (const Live& l : live) best_live = std::max(best_live, l.hyp.log_prob);
      if (best_live <= bar) break;
    }

    struct Cand {
      double score;
      std::size_t parent;
      std::size_t token;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * models.front()->dims.vocab_size);
    for (std::size_t h = 0; h < live.size(); ++h) {
      const Vec& p = live[h].next_p;
      for (std::size_t j = 0; j < p.size(); ++j)
        cands.push_back({live[h].hyp.log_prob + std::log(p[j]), h, j});
    }
    const std::size_t keep = std::min(k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep),
                      cands.end(), [](const Cand& a, const Cand& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });

    std::vector<Live> next_live;
    for (std::size_t c = 0; c < keep; ++c) {
      const Cand& cand = cands[c];
      if (static_cast<int>(cand.token) == Vocabulary::kStop) {
        Hypothesis done = live[cand.parent].hyp;
        done.log_prob = cand.score;
        done.completed = true;
        completed.push_back(std::move(done));
        continue;
      }
      if (pos + 1 > config.max_length) continue;
      Live ext;
      ext.hyp = live[cand.parent].hyp;
      ext.hyp.tokens.push_back(static_cast<int>(cand.token));
      ext.hyp.log_prob = cand.score;
      if (ext.hyp.tokens.size() < config.max_length) {
        std::tie(ext.hyp.states, ext.next_p) = ensemble_step(
            models, static_cast<int>(cand.token), ext.hyp.states);
        next_live.push_back(std::move(ext));
      } else {
        // length limit reached; park it as an incomplete fallback
        ext.next_p.clear();
        next_live.push_back(std::move(ext));
      }
    }
    // Hypotheses at the length limit cannot be extended further.
    std::vector<Live> still;
    std::vector<Hypothesis> truncated;
    for (Live& l : next_live) {
      if (l.next_p.empty())
        truncated.push_back(std::move(l.hyp));
      else
        still.push_back(std::move(l));
    }
    live = std::move(still);
    if (step_best) {
      double best = -std::numeric_limits<double>::infinity();
      for (const Live& l : live) best = std::max(best, l.hyp.log_prob);
      for (const Hypothesis& h : truncated) best = std::max(best, h.log_prob);
      for (const Hypothesis& h : completed) best = std::max(best, h.log_prob);
      step_best->push_back(best);
    }
    if (live.empty() && completed.empty() && !truncated.empty()) {
      sort_desc(truncated);
      if (truncated.size() > k) truncated.resize(k);
      return truncated;
    }
    if (live.empty()) break;
  }

  if (!completed.empty()) {
    sort_desc(completed);
    if (completed.size() > k) completed.resize(k);
    return completed;
  }
  std::vector<Hypothesis> fallback;
  for (Live& l : live) fallback.push_back(std::move(l.hyp));
  sort_desc(fallback);
  if (fallback.size() > k) fallback.resize(k);
  return fallback;
}

std::vector<Hypothesis> decode(const Ensemble& models, const Vec& features,
                               const DecodeConfig& config, Rng& rng) {
  switch (config.mode) {
    case DecodeMode::kGreedy:
      return {decode_greedy(models, features, config.max_length)};
    case DecodeMode::kSample:
      return {decode_sample(models, features, config.max_length,
                            config.temperature, rng)};
    case DecodeMode::kBeam:
      return beam_search(models, features, config);
  }
  return {};
}

double caption_log_prob(const Ensemble& models, const Vec& features,
                        const std::vector<int>& tokens) {
  check(tokens.size() >= 2 && tokens.front() == Vocabulary::kStart &&
            tokens.back() == Vocabulary::kStop,
        "caption_log_prob: sequence must run from start to stop");
  auto [states, p] = ensemble_image_step(models, features);
  // p here predicts tokens[1]; the start word is conditioned on via the
  // first ensemble_step below.
  std::tie(states, p) = ensemble_step(models, tokens[0], states);
  double total = 0.0;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    total += std::log(p[static_cast<std::size_t>(tokens[t])]);
    if (t + 1 < tokens.size())
      std::tie(states, p) = ensemble_step(models, tokens[t], states);
  }
  return total;
}

std::size_t rank_of_truth(const std::vector<double>& scores,
                          std::size_t truth_index) {
  check(truth_index < scores.size(), "rank_of_truth: index out of range");
  const double s = scores[truth_index];
  std::size_t rank = 0;
  for (double x : scores)
    if (x >= s) ++rank;  // ties share the worst tied rank
  return rank;
}

namespace {

RankReport summarize_ranks(std::vector<std::size_t> ranks) {
  check(!ranks.empty(), "rank report: no queries");
  RankReport report;
  const double n = static_cast<double>(ranks.size());
  for (std::size_t r : ranks) {
    if (r <= 1) report.recall_at_1 += 1.0;
    if (r <= 5) report.recall_at_5 += 1.0;
    if (r <= 10) report.recall_at_10 += 1.0;
  }
  report.recall_at_1 /= n;
  report.recall_at_5 /= n;
  report.recall_at_10 /= n;
  std::sort(ranks.begin(), ranks.end());
  const std::size_t mid = ranks.size() / 2;
  report.median_rank =
      ranks.size() % 2 == 1
          ? static_cast<double>(ranks[mid])
          : 0.5 * static_cast<double>(ranks[mid - 1] + ranks[mid]);
  return report;
}

}  // namespace

RankReport rank_captions(const Ensemble& models, const Vocabulary& vocab,
                         const Dataset& dataset) {
  check_ensemble(models);
  check(!dataset.empty(), "rank_captions: empty dataset");
  struct PoolEntry {
    std::vector<int> tokens;
    std::size_t owner;
  };
  std::vector<PoolEntry> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (const auto& cap : dataset[i].captions)
      pool.push_back({vocab.encode(cap), i});

  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::vector<double> scores(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const double n_pred = static_cast<double>(pool[j].tokens.size() - 1);
      scores[j] = caption_log_prob(models, dataset[i].features,
                                   pool[j].tokens) /
                  n_pred;
    }
    std::size_t best = pool.size();
    for (std::size_t j = 0; j < pool.size(); ++j)
      if (pool[j].owner == i) best = std::min(best, rank_of_truth(scores, j));
    ranks.push_back(best);
  }
  return summarize_ranks(std::move(ranks));
}

RankReport rank_images(const Ensemble& models, const Vocabulary& vocab,
                       const Dataset& dataset) {
  check_ensemble(models);
  check(!dataset.empty(), "rank_images: empty dataset");
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::vector<int> tokens = vocab.encode(dataset[i].captions.front());
    std::vector<double> scores(dataset.size());
    for (std::size_t j = 0; j < dataset.size(); ++j)
      scores[j] = caption_log_prob(models, dataset[j].features, tokens);
    ranks.push_back(rank_of_truth(scores, i));
  }
  return summarize_ranks(std::move(ranks));
}

double novelty_rate(const std::vector<std::vector<std::string>>& generated,
                    const std::vector<std::vector<std::string>>& training) {
  if (generated.empty()) return 0.0;
  std::set<std::vector<std::string>> seen(training.begin(), training.end());
  std::size_t novel = 0;
  for (const auto& cap : generated)
    if (!seen.count(cap)) ++novel;
  return static_cast<double>(novel) / static_cast<double>(generated.size());
}

std::vector<std::pair<std::string, double>> embedding_neighbors(
    const ModelParams& params, const Vocabulary& vocab,
    const std::string& query, std::size_t n) {
  check(n >= 1, "embedding_neighbors: n must be >= 1");
  check(vocab.contains(query), "embedding_neighbors: '" + query +
                                   "' is not in the vocabulary");
  const int qid = vocab.id(query);
  const Vec q = embed_word(params, static_cast<std::size_t>(qid));
  auto norm = [](const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double qn = norm(q);

  std::vector<std::pair<std::string, double>> scored;
  for (std::size_t id = 3; id < vocab.size(); ++id) {
    if (static_cast<int>(id) == qid) continue;
    const Vec e = embed_word(params, id);
    double dot = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) dot += q[j] * e[j];
    const double denom = qn * norm(e);
    const double cos = denom > 0.0 ? dot / denom : 0.0;
    scored.emplace_back(vocab.token(static_cast<int>(id)), cos);
  }
  // ids ascend already; stable sort keeps the id tie-break
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (scored.size() > n) scored.resize(n);
  return scored;
}

void save_caption_records(const std::vector<CaptionRecord>& records,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open caption file for writing: " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["image_id"] = rec.image_id;
    j["captions"] = rec.captions;
    j["log_probs"] = rec.log_probs;
    j["novel"] = std::vector<bool>(rec.novel);
    out << j.dump() << "\n";
  }
}

std::vector<CaptionRecord> load_caption_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open caption file: " + path);
  std::vector<CaptionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      CaptionRecord rec;
      rec.image_id = j.at("image_id").get<std::string>();
      rec.captions = j.at("captions").get<std::vector<std::string>>();
      rec.log_probs = j.at("log_probs").get<std::vector<double>>();
      rec.novel = j.at("novel").get<std::vector<bool>>();
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": bad caption record: " + e.what());
    }
  }
  if (records.empty()) throw IoError("caption file is empty: " + path);
  return records;
}

}  // namespace nic
