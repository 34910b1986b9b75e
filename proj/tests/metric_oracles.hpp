// Brute-force reference implementations used only to check the metrics
// module. Everything here counts n-grams by direct subsequence scanning,
// builds full DP tables, or enumerates alignments exhaustively; no code is
// shared with src/metrics.cpp.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nic/metrics.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;

inline bool gram_at(const Tokens& s, std::size_t pos, const Tokens& gram) {
  if (pos + gram.size() > s.size()) return false;
  for (std::size_t i = 0; i < gram.size(); ++i)
    if (s[pos + i] != gram[i]) return false;
  return true;
}

inline std::size_t count_gram(const Tokens& s, const Tokens& gram) {
  if (s.size() < gram.size()) return 0;
  std::size_t count = 0;
  for (std::size_t pos = 0; pos + gram.size() <= s.size(); ++pos)
    if (gram_at(s, pos, gram)) ++count;
  return count;
}

inline std::vector<Tokens> distinct_grams(const Tokens& s, std::size_t n) {
  std::vector<Tokens> grams;
  if (s.size() < n) return grams;
  for (std::size_t pos = 0; pos + n <= s.size(); ++pos) {
    Tokens gram(s.begin() + static_cast<long>(pos),
                s.begin() + static_cast<long>(pos + n));
    if (std::find(grams.begin(), grams.end(), gram) == grams.end())
      grams.push_back(std::move(gram));
  }
  return grams;
}

inline double bleu(const std::vector<nic::EvalInstance>& instances,
                   std::size_t n) {
  std::vector<double> matched(n, 0.0), total(n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (const auto& inst : instances) {
    cand_len += static_cast<double>(inst.candidate.size());
    std::size_t closest = inst.references.front().size();
    for (const auto& ref : inst.references) {
      auto dist = [&](std::size_t len) {
        return len > inst.candidate.size() ? len - inst.candidate.size()
                                           : inst.candidate.size() - len;
      };
      if (dist(ref.size()) < dist(closest) ||
          (dist(ref.size()) == dist(closest) && ref.size() < closest))
        closest = ref.size();
    }
    ref_len += static_cast<double>(closest);
    for (std::size_t m = 1; m <= n; ++m) {
      for (const auto& gram : distinct_grams(inst.candidate, m)) {
        const std::size_t c = count_gram(inst.candidate, gram);
        std::size_t best_ref = 0;
        for (const auto& ref : inst.references)
          best_ref = std::max(best_ref, count_gram(ref, gram));
        matched[m - 1] += static_cast<double>(std::min(c, best_ref));
        total[m - 1] += static_cast<double>(c);
      }
    }
  }
  double log_prec = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    if (matched[m] == 0.0 || total[m] == 0.0) return 0.0;
    log_prec += std::log(matched[m] / total[m]);
  }
  const double bp = (cand_len >= ref_len || cand_len == 0.0)
                        ? 1.0
                        : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_prec / static_cast<double>(n));
}

inline double rouge_l(const std::vector<nic::EvalInstance>& instances) {
  const double beta = 1.2;
  double total = 0.0;
  for (const auto& inst : instances) {
    double best = 0.0;
    for (const auto& ref : inst.references) {
      if (inst.candidate.empty() || ref.empty()) continue;
      // full O(n*m) table
      std::vector<std::vector<std::size_t>> table(
          inst.candidate.size() + 1,
          std::vector<std::size_t>(ref.size() + 1, 0));
      for (std::size_t i = 1; i <= inst.candidate.size(); ++i)
        for (std::size_t j = 1; j <= ref.size(); ++j)
          table[i][j] = inst.candidate[i - 1] == ref[j - 1]
                            ? table[i - 1][j - 1] + 1
                            : std::max(table[i - 1][j], table[i][j - 1]);
      const double lcs =
          static_cast<double>(table[inst.candidate.size()][ref.size()]);
      if (lcs == 0.0) continue;
      const double r = lcs / static_cast<double>(ref.size());
      const double p = lcs / static_cast<double>(inst.candidate.size());
      best = std::max(best,
                      (1.0 + beta * beta) * r * p / (r + beta * beta * p));
    }
    total += best;
  }
  return total / static_cast<double>(instances.size());
}

inline double cider(const std::vector<nic::EvalInstance>& instances) {
  const double corpus = static_cast<double>(instances.size());
  double total = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    // every gram seen anywhere, with its reference-set document frequency
    std::vector<Tokens> grams;
    for (const auto& inst : instances) {
      for (const auto& g : distinct_grams(inst.candidate, n))
        if (std::find(grams.begin(), grams.end(), g) == grams.end())
          grams.push_back(g);
      for (const auto& ref : inst.references)
        for (const auto& g : distinct_grams(ref, n))
          if (std::find(grams.begin(), grams.end(), g) == grams.end())
            grams.push_back(g);
    }
    std::vector<double> idf(grams.size());
    for (std::size_t k = 0; k < grams.size(); ++k) {
      double df = 0.0;
      for (const auto& inst : instances) {
        bool present = false;
        for (const auto& ref : inst.references)
          present = present || count_gram(ref, grams[k]) > 0;
        if (present) df += 1.0;
      }
      idf[k] = std::log(corpus / std::max(1.0, df));
    }
    auto weight = [&](const Tokens& s, std::size_t k) {
      return static_cast<double>(count_gram(s, grams[k])) * idf[k];
    };
    for (const auto& inst : instances) {
      double sim_sum = 0.0;
      for (const auto& ref : inst.references) {
        double dot = 0.0, nc = 0.0, nr = 0.0;
        for (std::size_t k = 0; k < grams.size(); ++k) {
          const double wc = weight(inst.candidate, k);
          const double wr = weight(ref, k);
          dot += wc * wr;
          nc += wc * wc;
          nr += wr * wr;
        }
        if (nc > 0.0 && nr > 0.0) sim_sum += dot / std::sqrt(nc * nr);
      }
      total += sim_sum / static_cast<double>(inst.references.size());
    }
  }
  return 10.0 * total / (4.0 * corpus);
}

// All injective exact-token alignments, no pruning; maximize matches, then
// minimize chunks. Only for short sentences.
struct MeteorAlign {
  const Tokens& cand;
  const Tokens& ref;
  std::size_t best_m = 0;
  std::size_t best_chunks = 0;

  void visit(std::size_t ci, std::vector<bool>& used, int prev,
             std::size_t m, std::size_t chunks) {
    if (ci == cand.size()) {
      if (m > best_m || (m == best_m && (best_m == 0 || chunks < best_chunks))) {
        best_m = m;
        best_chunks = chunks;
      }
      return;
    }
    visit(ci + 1, used, -1, m, chunks);
    for (std::size_t r = 0; r < ref.size(); ++r) {
      if (used[r] || ref[r] != cand[ci]) continue;
      used[r] = true;
      const bool cont = prev >= 0 && static_cast<std::size_t>(prev) + 1 == r;
      visit(ci + 1, used, static_cast<int>(r), m + 1,
            chunks + (cont ? 0 : 1));
      used[r] = false;
    }
  }
};

inline double meteor(const std::vector<nic::EvalInstance>& instances) {
  double total = 0.0;
  for (const auto& inst : instances) {
    double best = 0.0;
    for (const auto& ref : inst.references) {
      if (inst.candidate.empty() || ref.empty()) continue;
      MeteorAlign align{inst.candidate, ref};
      std::vector<bool> used(ref.size(), false);
      align.visit(0, used, -1, 0, 0);
      if (align.best_m == 0) continue;
      const double m = static_cast<double>(align.best_m);
      const double p = m / static_cast<double>(inst.candidate.size());
      const double r = m / static_cast<double>(ref.size());
      const double f = 10.0 * p * r / (r + 9.0 * p);
      const double frag = static_cast<double>(align.best_chunks) / m;
      best = std::max(best, f * (1.0 - 0.5 * frag * frag * frag));
    }
    total += best;
  }
  return total / static_cast<double>(instances.size());
}

}  // namespace oracle
