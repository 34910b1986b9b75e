#include "nic/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "nic/io.hpp"
#include "nic/vocab.hpp"

namespace nic {

namespace {

std::string render_caption(std::size_t template_idx, const std::string& color,
                           const std::string& subject,
                           const std::string& action,
                           const std::string& location) {
  switch (template_idx % 3) {
    case 0:
      return "a " + color + " " + subject + " " + action + " in the " +
             location;
    case 1:
      return "the " + color + " " + subject + " is " + action + " at the " +
             location;
    default:
      return "there is a " + color + " " + subject + " " + action +
             " near the " + location;
  }
}

}  // namespace

DatasetSplits generate_dataset(const SceneSpec& spec) {
  check(!spec.subjects.empty() && !spec.colors.empty() &&
            !spec.actions.empty() && !spec.locations.empty(),
        "generate_dataset: every attribute axis must be non-empty");
  check(spec.captions_per_scene >= 1,
        "generate_dataset: captions_per_scene must be >= 1");
  check(std::abs(spec.train_fraction + spec.val_fraction +
                 spec.test_fraction - 1.0) < 1e-9,
        "generate_dataset: split fractions must sum to 1");
  check(spec.noise_amplitude >= 0.0,
        "generate_dataset: negative noise amplitude");

  Rng rng(spec.seed);
  const std::size_t dim = spec.feature_dim();

  auto is_held_out = [&spec](const SceneTuple& t) {
    return std::find(spec.held_out.begin(), spec.held_out.end(), t) !=
           spec.held_out.end();
  };

  Dataset scenes;
  std::vector<bool> held;
  for (std::size_t s = 0; s < spec.subjects.size(); ++s)
    for (std::size_t c = 0; c < spec.colors.size(); ++c)
      for (std::size_t a = 0; a < spec.actions.size(); ++a)
        for (std::size_t l = 0; l < spec.locations.size(); ++l) {
          CaptionedExample ex;
          ex.id = spec.subjects[s] + "_" + spec.colors[c] + "_" +
                  spec.actions[a] + "_" + spec.locations[l];
          ex.features.assign(dim, 0.0);
          std::size_t off = 0;
          ex.features[off + s] = 1.0;
          off += spec.subjects.size();
          ex.features[off + c] = 1.0;
          off += spec.colors.size();
          ex.features[off + a] = 1.0;
          off += spec.actions.size();
          ex.features[off + l] = 1.0;
          for (double& x : ex.features)
            x += rng.next_symmetric(spec.noise_amplitude);
          for (std::size_t k = 0; k < spec.captions_per_scene; ++k)
            ex.captions.push_back(tokenize(render_caption(
                k, spec.colors[c], spec.subjects[s], spec.actions[a],
                spec.locations[l])));
          scenes.push_back(std::move(ex));
          held.push_back(is_held_out({s, c, a, l}));
        }

  std::vector<std::size_t> trainable;
  std::vector<std::size_t> excluded;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    (held[i] ? excluded : trainable).push_back(i);
  if (trainable.empty())
    throw std::invalid_argument(
        "generate_dataset: held-out list excludes every scene, training "
        "split would be empty");

  // Fisher-Yates with the dataset rng.
  for (std::size_t i = trainable.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(trainable[i - 1], trainable[j]);
  }

  const std::size_t n = trainable.size();
  std::size_t n_train = static_cast<std::size_t>(
      std::round(spec.train_fraction * static_cast<double>(n)));
  std::size_t n_val = static_cast<std::size_t>(
      std::round(spec.val_fraction * static_cast<double>(n)));
  n_train = std::max<std::size_t>(1, std::min(n_train, n));
  n_val = std::min(n_val, n - n_train);

  DatasetSplits splits;
  for (std::size_t k = 0; k < n; ++k) {
    const CaptionedExample& ex = scenes[trainable[k]];
    if (k < n_train)
      splits.train.push_back(ex);
    else if (k < n_train + n_val)
      splits.val.push_back(ex);
    else
      splits.test.push_back(ex);
  }
  // Held-out compositions only ever appear in validation/test.
  for (std::size_t k = 0; k < excluded.size(); ++k) {
    (k % 2 == 0 ? splits.val : splits.test).push_back(scenes[excluded[k]]);
  }
  return splits;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open dataset file for writing: " + path);
  for (const auto& ex : ds) {
    nlohmann::json rec;
    rec["id"] = ex.id;
    rec["features"] = ex.features;
    nlohmann::json caps = nlohmann::json::array();
    for (const auto& cap : ex.captions) {
      std::string joined;
      for (std::size_t i = 0; i < cap.size(); ++i) {
        if (i) joined += ' ';
        joined += cap[i];
      }
      caps.push_back(joined);
    }
    rec["captions"] = caps;
    out << rec.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": parse error: " + e.what());
    }
    CaptionedExample ex;
    try {
      ex.id = rec.at("id").get<std::string>();
      ex.features = rec.at("features").get<Vec>();
      for (const auto& cap : rec.at("captions"))
        ex.captions.push_back(tokenize(cap.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": bad record: " + e.what());
    }
    if (ex.captions.empty())
      throw IoError(path + ":" + std::to_string(lineno) + ": record '" +
                    ex.id + "' has no captions");
    if (dim == 0) dim = ex.features.size();
    if (ex.features.size() != dim)
      throw IoError(path + ":" + std::to_string(lineno) + ": record '" +
                    ex.id + "' has feature dim " +
                    std::to_string(ex.features.size()) + ", expected " +
                    std::to_string(dim));
    ds.push_back(std::move(ex));
  }
  if (ds.empty()) throw IoError("dataset file is empty: " + path);
  return ds;
}

std::vector<std::vector<std::string>> all_captions(const Dataset& ds) {
  std::vector<std::vector<std::string>> out;
  for (const auto& ex : ds)
    for (const auto& cap : ex.captions) out.push_back(cap);
  return out;
}

}  // namespace nic
