#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nic/dataset.hpp"
#include "nic/model.hpp"
#include "nic/vocab.hpp"

namespace nic {

enum class ScheduleKind { kOff, kLinear, kExponential, kInverseSigmoid };

// Probability of feeding the model's own sampled word instead of the
// ground-truth previous word, as a function of the training step.
struct SamplingSchedule {
  ScheduleKind kind = ScheduleKind::kOff;
  double slope = 0.0;   // linear: eps = min(cap, slope * step)
  double base = 0.999;  // exponential: eps = 1 - base^step
  double offset = 100.0;  // inverse_sigmoid: eps = 1 - b / (b + e^{step/b})
  double cap = 1.0;

  void validate() const;
};

double sampling_prob(const SamplingSchedule& schedule, std::size_t step);

ScheduleKind parse_schedule_kind(const std::string& name);
std::string schedule_kind_name(ScheduleKind kind);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t total_steps = 2000;
  std::size_t phase1_steps = 0;  // encoder frozen before this step
  double dropout_rate = 0.2;
  std::size_t min_token_count = 1;
  SamplingSchedule schedule;
  bool sample_from_argmax = false;
  std::uint64_t seed = 1;
  std::size_t embed_dim = 64;
  bool shuffle = true;
  double grad_clip = 0.0;  // L2 cap, 0 = off
  std::size_t log_every = 100;

  void validate() const;
};

// Flat key=value text file; flags in the CLI overlay these.
TrainConfig parse_train_config(const std::string& path);
std::string format_train_config(const TrainConfig& cfg);

struct TrainLogRecord {
  std::size_t step = 0;
  double mean_loss = 0.0;       // over the window since the last record
  double mean_token_loss = 0.0;
  double epsilon = 0.0;
  bool encoder_frozen = false;
  double wall_seconds = 0.0;
  bool clipped = false;  // gradient clip triggered within the window
};

struct TrainResult {
  ModelParams params;
  Vocabulary vocab;
  std::vector<TrainLogRecord> log;
};

// Per-example SGD with teacher forcing, scheduled sampling and two-phase
// encoder fine-tuning. When `initial` is given its params and vocabulary
// are resumed; otherwise the vocabulary is built from `dataset` and
// weights are randomly initialized.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::optional<std::pair<ModelParams, Vocabulary>>&
                      initial = std::nullopt);

// -------- checkpoints --------

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
  std::uint64_t step = 0;
};

// Versioned binary container, little-endian; load(save(m)) is bitwise
// identical.
void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     std::uint64_t step, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nic
