#include "nic/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nic/io.hpp"

namespace nic {

void SamplingSchedule::validate() const {
  switch (kind) {
    case ScheduleKind::kOff:
      break;
    case ScheduleKind::kLinear:
      check(slope >= 0.0, "schedule: linear slope must be >= 0");
      check(cap >= 0.0 && cap <= 1.0, "schedule: cap must be in [0, 1]");
      break;
    case ScheduleKind::kExponential:
      check(base > 0.0 && base < 1.0,
            "schedule: exponential base must be in (0, 1)");
      break;
    case ScheduleKind::kInverseSigmoid:
      check(offset > 0.0, "schedule: inverse-sigmoid offset must be > 0");
      break;
  }
}

double sampling_prob(const SamplingSchedule& schedule, std::size_t step) {
  const double s = static_cast<double>(step);
  double eps = 0.0;
  switch (schedule.kind) {
    case ScheduleKind::kOff:
      return 0.0;
    case ScheduleKind::kLinear:
      eps = std::min(schedule.cap, schedule.slope * s);
      break;
    case ScheduleKind::kExponential:
      eps = 1.0 - std::pow(schedule.base, s);
      break;
    case ScheduleKind::kInverseSigmoid:
      eps = 1.0 - schedule.offset /
                      (schedule.offset + std::exp(s / schedule.offset));
      break;
  }
  return std::clamp(eps, 0.0, 1.0);
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "off") return ScheduleKind::kOff;
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "exponential") return ScheduleKind::kExponential;
  if (name == "inverse_sigmoid") return ScheduleKind::kInverseSigmoid;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string schedule_kind_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kOff: return "off";
    case ScheduleKind::kLinear: return "linear";
    case ScheduleKind::kExponential: return "exponential";
    case ScheduleKind::kInverseSigmoid: return "inverse_sigmoid";
  }
  return "off";
}

void TrainConfig::validate() const {
  check(learning_rate > 0.0, "config: learning_rate must be > 0");
  check(phase1_steps <= total_steps,
        "config: phase1_steps must not exceed total_steps");
  check(dropout_rate >= 0.0 && dropout_rate < 1.0,
        "config: dropout_rate must be in [0, 1)");
  check(min_token_count >= 1, "config: min_token_count must be >= 1");
  check(embed_dim >= 1, "config: embed_dim must be >= 1");
  check(log_every >= 1, "config: log_every must be >= 1");
  schedule.validate();
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string key, value;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") cfg.learning_rate = std::stod(value);
      else if (key == "total_steps") cfg.total_steps = std::stoull(value);
      else if (key == "phase1_steps") cfg.phase1_steps = std::stoull(value);
      else if (key == "dropout_rate") cfg.dropout_rate = std::stod(value);
      else if (key == "min_token_count") cfg.min_token_count = std::stoull(value);
      else if (key == "schedule_kind") cfg.schedule.kind = parse_schedule_kind(value);
      else if (key == "schedule_slope") cfg.schedule.slope = std::stod(value);
      else if (key == "schedule_base") cfg.schedule.base = std::stod(value);
      else if (key == "schedule_offset") cfg.schedule.offset = std::stod(value);
      else if (key == "schedule_cap") cfg.schedule.cap = std::stod(value);
      else if (key == "sample_from_argmax") cfg.sample_from_argmax = value == "true" || value == "1";
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "embed_dim") cfg.embed_dim = std::stoull(value);
      else if (key == "shuffle") cfg.shuffle = value == "true" || value == "1";
      else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
      else if (key == "log_every") cfg.log_every = std::stoull(value);
      else
        throw IoError(path + ":" + std::to_string(lineno) +
                      ": unknown config key '" + key + "'");
    } catch (const std::logic_error&) {
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": bad value for '" + key + "': " + value);
    }
  }
  cfg.validate();
  return cfg;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "learning_rate=" << cfg.learning_rate << "\n"
      << "total_steps=" << cfg.total_steps << "\n"
      << "phase1_steps=" << cfg.phase1_steps << "\n"
      << "dropout_rate=" << cfg.dropout_rate << "\n"
      << "min_token_count=" << cfg.min_token_count << "\n"
      << "schedule_kind=" << schedule_kind_name(cfg.schedule.kind) << "\n"
      << "schedule_slope=" << cfg.schedule.slope << "\n"
      << "schedule_base=" << cfg.schedule.base << "\n"
      << "schedule_offset=" << cfg.schedule.offset << "\n"
      << "schedule_cap=" << cfg.schedule.cap << "\n"
      << "sample_from_argmax=" << (cfg.sample_from_argmax ? "true" : "false")
      << "\n"
      << "seed=" << cfg.seed << "\n"
      << "embed_dim=" << cfg.embed_dim << "\n"
      << "shuffle=" << (cfg.shuffle ? "true" : "false") << "\n"
      << "grad_clip=" << cfg.grad_clip << "\n"
      << "log_every=" << cfg.log_every << "\n";
  return out.str();
}

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const std::optional<std::pair<ModelParams, Vocabulary>>&
                      initial) {
  config.validate();
  check(!dataset.empty(), "train: dataset is empty");

  Rng rng(config.seed);

  Vocabulary vocab =
      initial ? initial->second
              : build_vocabulary(all_captions(dataset), config.min_token_count);

  const std::size_t feature_dim = dataset.front().features.size();
  ModelDims dims{feature_dim, config.embed_dim, vocab.size()};
  ModelParams params = initial ? initial->first
                               : ModelParams::random(dims, rng);
  check(params.dims.feature_dim == feature_dim,
        "train: checkpoint feature dim does not match dataset");

  struct Pair {
    const CaptionedExample* ex;
    std::vector<int> tokens;
  };
  std::vector<Pair> pairs;
  for (const auto& ex : dataset)
    for (const auto& cap : ex.captions)
      pairs.push_back({&ex, vocab.encode(cap)});

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result{std::move(params), std::move(vocab), {}};

  const auto t0 = std::chrono::steady_clock::now();
  double window_loss = 0.0;
  std::size_t window_tokens = 0, window_count = 0;
  bool window_clipped = false;

  std::size_t cursor = order.size();  // forces a reshuffle at step 0
  for (std::size_t step = 0; step < config.total_steps; ++step) {
    if (cursor >= order.size()) {
      if (config.shuffle) {
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.next_u64() % i]);
      }
      cursor = 0;
    }
    const Pair& pair = pairs[order[cursor++]];

    ForwardOptions opt;
    opt.dropout_rate = config.dropout_rate;
    opt.training = true;
    opt.sample_prob = sampling_prob(config.schedule, step);
    opt.sample_from_argmax = config.sample_from_argmax;

    double loss;
    ForwardCache cache;
    try {
      std::tie(loss, cache) =
          forward_caption(result.params, pair.ex->features, pair.tokens, opt,
                          rng);
    } catch (const std::exception& e) {
      throw std::runtime_error("train: diverged at step " +
                               std::to_string(step) + ", example '" +
                               pair.ex->id + "': " + e.what());
    }

    ModelParams grads = backward_caption(result.params, cache);
    const bool frozen = step < config.phase1_steps;
    if (frozen)
      std::fill(grads.w_enc.data.begin(), grads.w_enc.data.end(), 0.0);
    if (config.grad_clip > 0.0) {
      const double norm = grad_norm(grads);
      if (norm > config.grad_clip) {
        scale_grads(grads, config.grad_clip / norm);
        window_clipped = true;
      }
    }
    sgd_step(result.params, grads, config.learning_rate);

    window_loss += loss;
    window_tokens += cache.token_count;
    window_count += 1;
    if ((step + 1) % config.log_every == 0 || step + 1 == config.total_steps) {
      TrainLogRecord rec;
      rec.step = step + 1;
      rec.mean_loss = window_loss / static_cast<double>(window_count);
      rec.mean_token_loss =
          window_loss / static_cast<double>(std::max<std::size_t>(1, window_tokens));
      rec.epsilon = opt.sample_prob;
      rec.encoder_frozen = frozen;
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      rec.clipped = window_clipped;
      result.log.push_back(rec);
      window_loss = 0.0;
      window_tokens = 0;
      window_count = 0;
      window_clipped = false;
    }
  }
  return result;
}

// -------- checkpoints --------

namespace {

constexpr char kMagic[8] = {'N', 'I', 'C', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint file truncated or corrupt: " + path);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
  const auto len = read_pod<std::uint32_t>(in, path);
  if (len > (1u << 20))
    throw IoError("checkpoint file truncated or corrupt: " + path);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw IoError("checkpoint file truncated or corrupt: " + path);
  return s;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     std::uint64_t step, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod<std::uint64_t>(out, params.dims.feature_dim);
  write_pod<std::uint64_t>(out, params.dims.embed_dim);
  write_pod<std::uint64_t>(out, params.dims.vocab_size);
  write_pod<std::uint64_t>(out, vocab.hash());
  write_pod<std::uint64_t>(out, step);

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.size()));
  for (std::size_t i = 0; i < vocab.size(); ++i)
    write_string(out, vocab.token(static_cast<int>(i)));

  const auto mats = params.matrices();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(mats.size()));
  for (const auto& [name, mat] : mats) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, mat->rows);
    write_pod<std::uint64_t>(out, mat->cols);
    out.write(reinterpret_cast<const char*>(mat->data.data()),
              static_cast<std::streamsize>(mat->data.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw IoError("checkpoint version " + std::to_string(version) +
                  " unsupported (expected " + std::to_string(kVersion) +
                  "): " + path);
  ModelDims dims;
  dims.feature_dim = read_pod<std::uint64_t>(in, path);
  dims.embed_dim = read_pod<std::uint64_t>(in, path);
  dims.vocab_size = read_pod<std::uint64_t>(in, path);
  const auto vocab_hash = read_pod<std::uint64_t>(in, path);
  const auto step = read_pod<std::uint64_t>(in, path);

  Vocabulary vocab;
  const auto vocab_count = read_pod<std::uint32_t>(in, path);
  if (vocab_count < 3 || vocab_count != dims.vocab_size)
    throw IoError("checkpoint vocabulary size mismatch: " + path);
  for (std::uint32_t i = 0; i < vocab_count; ++i) {
    const std::string tok = read_string(in, path);
    if (i >= 3) vocab.add(tok);
  }
  if (vocab.hash() != vocab_hash)
    throw IoError("checkpoint vocabulary hash mismatch: " + path);

  ModelParams params(dims);
  auto mats = params.matrices();
  const auto mat_count = read_pod<std::uint32_t>(in, path);
  if (mat_count != mats.size())
    throw IoError("checkpoint matrix count mismatch: " + path);
  for (auto& [name, mat] : mats) {
    const std::string got = read_string(in, path);
    if (got != name)
      throw IoError("checkpoint matrix '" + got + "' where '" +
                    std::string(name) + "' expected: " + path);
    const auto rows = read_pod<std::uint64_t>(in, path);
    const auto cols = read_pod<std::uint64_t>(in, path);
    if (rows != mat->rows || cols != mat->cols)
      throw IoError("checkpoint matrix '" + got + "' shape mismatch: " + path);
    in.read(reinterpret_cast<char*>(mat->data.data()),
            static_cast<std::streamsize>(mat->data.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint file truncated or corrupt: " + path);
  }
  return Checkpoint{std::move(params), std::move(vocab), step};
}

}  // namespace nic
