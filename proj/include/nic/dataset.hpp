#pragma once

#include <array>
#include <string>
#include <vector>

#include "nic/linalg.hpp"

namespace nic {

// One "image": a fixed feature vector plus one or more reference captions.
struct CaptionedExample {
  std::string id;
  Vec features;
  std::vector<std::vector<std::string>> captions;  // tokenized
};

using Dataset = std::vector<CaptionedExample>;

// An attribute tuple: (subject, color, action, location) indices.
using SceneTuple = std::array<std::size_t, 4>;

struct SceneSpec {
  std::vector<std::string> subjects{"dog", "cat", "bird", "horse"};
  std::vector<std::string> colors{"red", "blue", "green"};
  std::vector<std::string> actions{"sleeping", "running", "eating"};
  std::vector<std::string> locations{"park", "house"};
  double noise_amplitude = 0.05;
  std::size_t captions_per_scene = 3;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  // Attribute tuples excluded from the training split.
  std::vector<SceneTuple> held_out;
  std::uint64_t seed = 1;

  std::size_t feature_dim() const {
    return subjects.size() + colors.size() + actions.size() + locations.size();
  }
};

struct DatasetSplits {
  Dataset train, val, test;
};

// One scene per attribute tuple; features are concatenated one-hot blocks
// plus uniform noise; captions come from a small template grammar.
DatasetSplits generate_dataset(const SceneSpec& spec);

// Line-delimited JSON records: {"id", "features", "captions"}.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

std::vector<std::vector<std::string>> all_captions(const Dataset& ds);

}  // namespace nic
