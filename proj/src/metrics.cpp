#include "nic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nic/inference.hpp"
#include "nic/io.hpp"

namespace nic {

namespace {

using Tokens = std::vector<std::string>;
using Counts = std::map<std::string, std::size_t>;

std::string gram_key(const Tokens& tokens, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += tokens[start + i];
  }
  return key;
}

Counts ngram_counts(const Tokens& tokens, std::size_t n) {
  Counts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t s = 0; s + n <= tokens.size(); ++s)
    ++counts[gram_key(tokens, s, n)];
  return counts;
}

}  // namespace

double bleu(const std::vector<EvalInstance>& instances, std::size_t n) {
  check(n >= 1 && n <= 4, "bleu: order must be in 1..4");
  check(!instances.empty(), "bleu: no instances");

  std::vector<double> numer(n, 0.0), denom(n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (const auto& inst : instances) {
    check(!inst.references.empty(), "bleu: instance without references");
    cand_len += static_cast<double>(inst.candidate.size());
    // closest reference length, shorter wins ties
    std::size_t closest = inst.references.front().size();
    for (const auto& ref : inst.references) {
      const auto da = ref.size() > inst.candidate.size()
                          ? ref.size() - inst.candidate.size()
                          : inst.candidate.size() - ref.size();
      const auto db = closest > inst.candidate.size()
                          ? closest - inst.candidate.size()
                          : inst.candidate.size() - closest;
      if (da < db || (da == db && ref.size() < closest)) closest = ref.size();
    }
    ref_len += static_cast<double>(closest);

    for (std::size_t m = 1; m <= n; ++m) {
      const Counts cand = ngram_counts(inst.candidate, m);
      Counts max_ref;
      for (const auto& ref : inst.references)
        for (const auto& [gram, cnt] : ngram_counts(ref, m))
          max_ref[gram] = std::max(max_ref[gram], cnt);
      for (const auto& [gram, cnt] : cand) {
        denom[m - 1] += static_cast<double>(cnt);
        auto it = max_ref.find(gram);
        if (it != max_ref.end())
          numer[m - 1] += static_cast<double>(std::min(cnt, it->second));
      }
    }
  }

  double log_prec = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    if (numer[m] == 0.0 || denom[m] == 0.0) return 0.0;
    log_prec += std::log(numer[m] / denom[m]);
  }
  const double bp =
      cand_len >= ref_len || cand_len == 0.0
          ? 1.0
          : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_prec / static_cast<double>(n));
}

double sentence_bleu_smoothed(const EvalInstance& inst, std::size_t n) {
  check(n >= 1 && n <= 4, "sentence_bleu_smoothed: order must be in 1..4");
  if (inst.candidate.empty()) return 0.0;
  double log_prec = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    const Counts cand = ngram_counts(inst.candidate, m);
    Counts max_ref;
    for (const auto& ref : inst.references)
      for (const auto& [gram, cnt] : ngram_counts(ref, m))
        max_ref[gram] = std::max(max_ref[gram], cnt);
    double matched = 0.0, total = 0.0;
    for (const auto& [gram, cnt] : cand) {
      total += static_cast<double>(cnt);
      auto it = max_ref.find(gram);
      if (it != max_ref.end())
        matched += static_cast<double>(std::min(cnt, it->second));
    }
    log_prec += std::log((matched + 1.0) / (total + 1.0));
  }
  std::size_t closest = inst.references.front().size();
  for (const auto& ref : inst.references)
    if (std::llabs(static_cast<long long>(ref.size()) -
                   static_cast<long long>(inst.candidate.size())) <
        std::llabs(static_cast<long long>(closest) -
                   static_cast<long long>(inst.candidate.size())))
      closest = ref.size();
  const double c = static_cast<double>(inst.candidate.size());
  const double r = static_cast<double>(closest);
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_prec / static_cast<double>(n));
}

namespace {

using TfIdf = std::map<std::string, double>;

double cosine(const TfIdf& a, const TfIdf& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [gram, w] : a) {
    na += w * w;
    auto it = b.find(gram);
    if (it != b.end()) dot += w * it->second;
  }
  for (const auto& [gram, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cider(const std::vector<EvalInstance>& instances) {
  check(!instances.empty(), "cider: no instances");
  const double corpus_size = static_cast<double>(instances.size());

  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    // document frequency: number of images whose reference set has the gram
    Counts df;
    for (const auto& inst : instances) {
      std::set<std::string> grams;
      for (const auto& ref : inst.references)
        for (const auto& [gram, cnt] : ngram_counts(ref, n))
          grams.insert(gram);
      for (const auto& gram : grams) ++df[gram];
    }
    auto idf = [&](const std::string& gram) {
      auto it = df.find(gram);
      const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
      return std::log(corpus_size / d);
    };
    auto vectorize = [&](const Tokens& tokens) {
      TfIdf v;
      for (const auto& [gram, cnt] : ngram_counts(tokens, n))
        v[gram] = static_cast<double>(cnt) * idf(gram);
      return v;
    };

    for (const auto& inst : instances) {
      check(!inst.references.empty(), "cider: instance without references");
      const TfIdf cand = vectorize(inst.candidate);
      double sim = 0.0;
      for (const auto& ref : inst.references)
        sim += cosine(cand, vectorize(ref));
      total += sim / static_cast<double>(inst.references.size());
    }
  }
  // mean over n = 1..4 and over instances, scaled by 10
  return 10.0 * total / (4.0 * corpus_size);
}

namespace {

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const std::vector<EvalInstance>& instances) {
  check(!instances.empty(), "rouge_l: no instances");
  constexpr double kBeta = 1.2;
  double total = 0.0;
  for (const auto& inst : instances) {
    check(!inst.references.empty(), "rouge_l: instance without references");
    double best = 0.0;
    for (const auto& ref : inst.references) {
      if (inst.candidate.empty() || ref.empty()) continue;
      const double l = static_cast<double>(lcs_length(inst.candidate, ref));
      const double recall = l / static_cast<double>(ref.size());
      const double prec = l / static_cast<double>(inst.candidate.size());
      if (recall == 0.0 || prec == 0.0) continue;
      const double f = (1.0 + kBeta * kBeta) * recall * prec /
                       (recall + kBeta * kBeta * prec);
      best = std::max(best, f);
    }
    total += best;
  }
  return total / static_cast<double>(instances.size());
}

namespace {

// Maximum exact-token matching size: per token type, min of the two counts.
std::size_t max_matching(const Tokens& cand, const Tokens& ref) {
  Counts cc = ngram_counts(cand, 1), rc = ngram_counts(ref, 1);
  std::size_t m = 0;
  for (const auto& [tok, cnt] : cc) {
    auto it = rc.find(tok);
    if (it != rc.end()) m += std::min(cnt, it->second);
  }
  return m;
}

struct ChunkSearch {
  const Tokens& cand;
  const Tokens& ref;
  std::size_t m;  // required matching size
  std::size_t best = SIZE_MAX;

  void run(std::size_t ci, std::uint64_t used, int prev_ref,
           std::size_t matches, std::size_t chunks) {
    if (chunks >= best) return;
    if (matches + (cand.size() - ci) < m) return;  // cannot reach m
    if (ci == cand.size()) {
      if (matches == m) best = std::min(best, chunks);
      return;
    }
    for (std::size_t r = 0; r < ref.size(); ++r) {
      if (used & (1ULL << r)) continue;
      if (ref[r] != cand[ci]) continue;
      const bool continues = prev_ref >= 0 &&
                             static_cast<std::size_t>(prev_ref) + 1 == r;
      run(ci + 1, used | (1ULL << r), static_cast<int>(r), matches + 1,
          chunks + (continues ? 0 : 1));
    }
    run(ci + 1, used, -1, matches, chunks);  // leave this position unmatched
  }
};

// Minimal chunk count among maximum matchings. Exhaustive up to length 12,
// greedy contiguity-preferring alignment beyond.
std::size_t min_chunks(const Tokens& cand, const Tokens& ref, std::size_t m) {
  if (m == 0) return 0;
  if (cand.size() <= 12 && ref.size() <= 64) {
    ChunkSearch search{cand, ref, m};
    search.run(0, 0, -1, 0, 0);
    return search.best;
  }
  // greedy: match the first min-count occurrences per type, preferring the
  // ref position that extends the current chunk
  Counts quota;
  {
    Counts cc = ngram_counts(cand, 1), rc = ngram_counts(ref, 1);
    for (const auto& [tok, cnt] : cc) {
      auto it = rc.find(tok);
      if (it != rc.end()) quota[tok] = std::min(cnt, it->second);
    }
  }
  std::vector<bool> used(ref.size(), false);
  int prev_ref = -1;
  std::size_t chunks = 0;
  for (std::size_t ci = 0; ci < cand.size(); ++ci) {
    auto it = quota.find(cand[ci]);
    if (it == quota.end() || it->second == 0) {
      prev_ref = -1;
      continue;
    }
    int pick = -1;
    const std::size_t cont = static_cast<std::size_t>(prev_ref + 1);
    if (prev_ref >= 0 && cont < ref.size() && !used[cont] &&
        ref[cont] == cand[ci]) {
      pick = static_cast<int>(cont);
    } else {
      for (std::size_t r = 0; r < ref.size(); ++r)
        if (!used[r] && ref[r] == cand[ci]) {
          pick = static_cast<int>(r);
          break;
        }
    }
    if (pick < 0) {
      prev_ref = -1;
      continue;
    }
    if (!(prev_ref >= 0 && static_cast<std::size_t>(prev_ref) + 1 ==
                               static_cast<std::size_t>(pick)))
      ++chunks;
    used[static_cast<std::size_t>(pick)] = true;
    --it->second;
    prev_ref = pick;
  }
  return chunks;
}

}  // namespace

double meteor_simplified(const std::vector<EvalInstance>& instances) {
  check(!instances.empty(), "meteor_simplified: no instances");
  double total = 0.0;
  for (const auto& inst : instances) {
    check(!inst.references.empty(),
          "meteor_simplified: instance without references");
    double best = 0.0;
    for (const auto& ref : inst.references) {
      if (inst.candidate.empty() || ref.empty()) continue;
      const std::size_t m = max_matching(inst.candidate, ref);
      if (m == 0) continue;
      const std::size_t ch = min_chunks(inst.candidate, ref, m);
      const double prec =
          static_cast<double>(m) / static_cast<double>(inst.candidate.size());
      const double recall =
          static_cast<double>(m) / static_cast<double>(ref.size());
      const double f_mean = 10.0 * prec * recall / (recall + 9.0 * prec);
      const double frag =
          static_cast<double>(ch) / static_cast<double>(m);
      const double penalty = 0.5 * frag * frag * frag;
      best = std::max(best, f_mean * (1.0 - penalty));
    }
    total += best;
  }
  return total / static_cast<double>(instances.size());
}

double perplexity(const ModelParams& params, const Vocabulary& vocab,
                  const Dataset& dataset) {
  check(!dataset.empty(), "perplexity: empty dataset");
  double total_loss = 0.0;
  std::size_t total_tokens = 0;
  Rng rng(0);  // unused: inference mode draws nothing
  ForwardOptions opt;
  for (const auto& ex : dataset) {
    for (const auto& cap : ex.captions) {
      auto [loss, cache] =
          forward_caption(params, ex.features, vocab.encode(cap), opt, rng);
      total_loss += loss;
      total_tokens += cache.token_count;
    }
  }
  check(total_tokens > 0, "perplexity: no predicted tokens");
  return std::exp(total_loss / static_cast<double>(total_tokens));
}

MetricReport evaluate(const std::vector<EvalInstance>& instances) {
  check(!instances.empty(), "evaluate: no instances");
  MetricReport report;
  for (std::size_t n = 1; n <= 4; ++n)
    report.bleu[n - 1] = bleu(instances, n);
  report.cider = cider(instances);
  report.rouge_l = rouge_l(instances);
  report.meteor_simplified = meteor_simplified(instances);
  report.instance_count = instances.size();
  return report;
}

std::vector<EvalInstance> load_references_as_instances(
    const std::string& references_path) {
  std::ifstream in(references_path);
  if (!in) throw IoError("cannot open references file: " + references_path);
  std::vector<EvalInstance> instances;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json rec = nlohmann::json::parse(line);
      EvalInstance inst;
      inst.image_id = rec.at("id").get<std::string>();
      for (const auto& cap : rec.at("captions"))
        inst.references.push_back(tokenize(cap.get<std::string>()));
      if (inst.references.empty())
        throw IoError(references_path + ":" + std::to_string(lineno) +
                      ": record '" + inst.image_id + "' has no captions");
      instances.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(references_path + ":" + std::to_string(lineno) +
                    ": parse error: " + e.what());
    }
  }
  if (instances.empty())
    throw IoError("references file is empty: " + references_path);
  return instances;
}

MetricReport evaluate_corpus(const std::string& candidates_path,
                             const std::string& references_path) {
  const std::vector<CaptionRecord> records =
      load_caption_records(candidates_path);
  std::vector<EvalInstance> instances =
      load_references_as_instances(references_path);

  std::map<std::string, const CaptionRecord*> by_id;
  for (const auto& rec : records) by_id[rec.image_id] = &rec;
  for (auto& inst : instances) {
    auto it = by_id.find(inst.image_id);
    if (it == by_id.end())
      throw IoError("no candidate for image id '" + inst.image_id + "' in " +
                    candidates_path);
    check(!it->second->captions.empty(),
          "evaluate_corpus: empty caption list for '" + inst.image_id + "'");
    inst.candidate = tokenize(it->second->captions.front());
  }
  return evaluate(instances);
}

std::string format_report_table(const MetricReport& report) {
  std::ostringstream out;
  out << "metric              value\n"
      << "------------------  --------\n";
  const char* names[4] = {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4"};
  out.setf(std::ios::fixed);
  out.precision(4);
  for (std::size_t i = 0; i < 4; ++i)
    out << names[i] << "              " << report.bleu[i] << "\n";
  out << "CIDEr               " << report.cider << "\n"
      << "ROUGE-L             " << report.rouge_l << "\n"
      << "METEOR (simplified) " << report.meteor_simplified << "\n"
      << "instances           " << report.instance_count << "\n";
  return out.str();
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["bleu_1"] = report.bleu[0];
  j["bleu_2"] = report.bleu[1];
  j["bleu_3"] = report.bleu[2];
  j["bleu_4"] = report.bleu[3];
  j["cider"] = report.cider;
  j["rouge_l"] = report.rouge_l;
  j["meteor_simplified"] = report.meteor_simplified;
  j["instances"] = report.instance_count;
  return j.dump();
}

}  // namespace nic
