#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nic/dataset.hpp"
#include "nic/inference.hpp"
#include "nic/metrics.hpp"
#include "nic/model.hpp"
#include "nic/training.hpp"
#include "nic/vocab.hpp"

namespace py = pybind11;
using namespace nic;

namespace {

// Checkpoint owns its params; ensembles on the Python side are lists of
// Checkpoint objects.
Ensemble to_ensemble(const std::vector<const Checkpoint*>& checkpoints) {
  Ensemble models;
  for (const auto* c : checkpoints) models.push_back(&c->params);
  return models;
}

py::dict hypothesis_dict(const Hypothesis& h, const Vocabulary& vocab) {
  py::dict d;
  d["tokens"] = h.tokens;
  d["words"] = vocab.decode(h.tokens);
  d["log_prob"] = h.log_prob;
  return d;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["bleu_1"] = r.bleu[0];
  d["bleu_2"] = r.bleu[1];
  d["bleu_3"] = r.bleu[2];
  d["bleu_4"] = r.bleu[3];
  d["cider"] = r.cider;
  d["rouge_l"] = r.rouge_l;
  d["meteor_simplified"] = r.meteor_simplified;
  d["instances"] = r.instance_count;
  return d;
}

std::vector<EvalInstance> to_instances(
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::vector<std::string>>>>&
        pairs) {
  std::vector<EvalInstance> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EvalInstance inst;
    inst.image_id = "img" + std::to_string(i);
    inst.candidate = pairs[i].first;
    inst.references = pairs[i].second;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_niccap, m) {
  m.doc() = "LSTM image caption generator: training, decoding and metrics";

  m.def("tokenize", &tokenize, py::arg("sentence"));

  py::class_<Vocabulary>(m, "Vocabulary")
      .def("id", &Vocabulary::id)
      .def("token", &Vocabulary::token)
      .def("__len__", &Vocabulary::size)
      .def("__contains__", &Vocabulary::contains)
      .def("encode", &Vocabulary::encode)
      .def("decode", &Vocabulary::decode);

  py::class_<CaptionedExample>(m, "CaptionedExample")
      .def_readonly("id", &CaptionedExample::id)
      .def_readonly("features", &CaptionedExample::features)
      .def_readonly("captions", &CaptionedExample::captions);

  py::class_<SceneSpec>(m, "SceneSpec")
      .def(py::init<>())
      .def_readwrite("subjects", &SceneSpec::subjects)
      .def_readwrite("colors", &SceneSpec::colors)
      .def_readwrite("actions", &SceneSpec::actions)
      .def_readwrite("locations", &SceneSpec::locations)
      .def_readwrite("captions_per_scene", &SceneSpec::captions_per_scene)
      .def_readwrite("noise_amplitude", &SceneSpec::noise_amplitude)
      .def_readwrite("train_fraction", &SceneSpec::train_fraction)
      .def_readwrite("val_fraction", &SceneSpec::val_fraction)
      .def_readwrite("test_fraction", &SceneSpec::test_fraction)
      .def_readwrite("held_out", &SceneSpec::held_out)
      .def_readwrite("seed", &SceneSpec::seed);

  py::class_<DatasetSplits>(m, "DatasetSplits")
      .def_readonly("train", &DatasetSplits::train)
      .def_readonly("val", &DatasetSplits::val)
      .def_readonly("test", &DatasetSplits::test);

  m.def("generate_dataset", &generate_dataset, py::arg("spec"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<SamplingSchedule>(m, "SamplingSchedule")
      .def(py::init<>())
      .def_readwrite("slope", &SamplingSchedule::slope)
      .def_readwrite("base", &SamplingSchedule::base)
      .def_readwrite("offset", &SamplingSchedule::offset)
      .def_readwrite("cap", &SamplingSchedule::cap)
      .def_property(
          "kind",
          [](const SamplingSchedule& s) { return schedule_kind_name(s.kind); },
          [](SamplingSchedule& s, const std::string& name) {
            s.kind = parse_schedule_kind(name);
          });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("total_steps", &TrainConfig::total_steps)
      .def_readwrite("phase1_steps", &TrainConfig::phase1_steps)
      .def_readwrite("dropout_rate", &TrainConfig::dropout_rate)
      .def_readwrite("min_token_count", &TrainConfig::min_token_count)
      .def_readwrite("schedule", &TrainConfig::schedule)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("embed_dim", &TrainConfig::embed_dim)
      .def_readwrite("shuffle", &TrainConfig::shuffle)
      .def_readwrite("grad_clip", &TrainConfig::grad_clip)
      .def_readwrite("log_every", &TrainConfig::log_every);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("step", &Checkpoint::step)
      .def_property_readonly(
          "vocab", [](const Checkpoint& c) -> const Vocabulary& {
            return c.vocab;
          },
          py::return_value_policy::reference_internal);

  m.def(
      "train",
      [](const TrainConfig& cfg, const Dataset& ds) {
        TrainResult r = train(cfg, ds);
        Checkpoint c{std::move(r.params), std::move(r.vocab),
                     cfg.total_steps};
        py::list log;
        for (const auto& rec : r.log) {
          py::dict d;
          d["step"] = rec.step;
          d["mean_loss"] = rec.mean_loss;
          d["mean_token_loss"] = rec.mean_token_loss;
          d["epsilon"] = rec.epsilon;
          d["encoder_frozen"] = rec.encoder_frozen;
          log.append(d);
        }
        return py::make_tuple(std::move(c), log);
      },
      py::arg("config"), py::arg("dataset"),
      "Returns (checkpoint, training_log).");

  m.def(
      "save_checkpoint",
      [](const Checkpoint& c, const std::string& path) {
        save_checkpoint(c.params, c.vocab, c.step, path);
      },
      py::arg("checkpoint"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "decode",
      [](const std::vector<const Checkpoint*>& checkpoints,
         const Vec& features, const std::string& mode, std::size_t beam_size,
         std::size_t max_length, double temperature, std::uint64_t seed) {
        DecodeConfig cfg;
        cfg.mode = parse_decode_mode(mode);
        cfg.beam_size = beam_size;
        cfg.max_length = max_length;
        cfg.temperature = temperature;
        Rng rng(seed);
        auto hyps = decode(to_ensemble(checkpoints), features, cfg, rng);
        py::list out;
        for (const auto& h : hyps)
          out.append(hypothesis_dict(h, checkpoints.front()->vocab));
        return out;
      },
      py::arg("checkpoints"), py::arg("features"), py::arg("mode") = "beam",
      py::arg("beam_size") = 3, py::arg("max_length") = 20,
      py::arg("temperature") = 1.0, py::arg("seed") = 1,
      "N-best caption hypotheses for one feature vector.");

  m.def(
      "caption_log_prob",
      [](const std::vector<const Checkpoint*>& checkpoints,
         const Vec& features, const std::vector<std::string>& words) {
        return caption_log_prob(to_ensemble(checkpoints), features,
                                checkpoints.front()->vocab.encode(words));
      },
      py::arg("checkpoints"), py::arg("features"), py::arg("words"));

  m.def(
      "gradcheck",
      [](std::uint64_t seed, std::size_t hidden, std::size_t vocab,
         std::size_t features, double eps, std::size_t coords, double tol) {
        check(vocab >= 4, "gradcheck: vocab must be >= 4");
        ModelDims dims{features, hidden, vocab};
        Rng rng(seed);
        ModelParams params = ModelParams::random(dims, rng);
        Vec f(features);
        for (double& x : f) x = rng.next_symmetric(1.0);
        std::vector<int> cap{Vocabulary::kStart};
        for (std::size_t t = 0; t < 5; ++t)
          cap.push_back(static_cast<int>(3 + rng.next_u64() % (vocab - 3)));
        cap.push_back(Vocabulary::kStop);

        auto loss_fn = [&](const ModelParams& p) {
          Rng r(0);
          return forward_caption(p, f, cap, {}, r).first;
        };
        Rng r(0);
        auto [loss, cache] = forward_caption(params, f, cap, {}, r);
        ModelParams analytic = backward_caption(params, cache);
        Rng probe(seed + 1);
        GradCheckReport rep = finite_diff_gradcheck(loss_fn, params, analytic,
                                                    eps, coords, probe, tol);
        py::dict d;
        d["pass"] = rep.pass;
        py::dict per_matrix;
        for (const auto& e : rep.entries)
          per_matrix[e.name.c_str()] = e.max_rel_err;
        d["max_rel_err"] = per_matrix;
        return d;
      },
      py::arg("seed") = 1, py::arg("hidden") = 8, py::arg("vocab") = 20,
      py::arg("features") = 6, py::arg("eps") = 1e-5, py::arg("coords") = 8,
      py::arg("tol") = 1e-4);

  m.def(
      "evaluate",
      [](const std::vector<std::pair<std::vector<std::string>,
                                     std::vector<std::vector<std::string>>>>&
             pairs) { return report_dict(evaluate(to_instances(pairs))); },
      py::arg("pairs"),
      "pairs: list of (candidate_tokens, [reference_tokens, ...]).");

  m.def(
      "perplexity",
      [](const Checkpoint& c, const Dataset& ds) {
        return perplexity(c.params, c.vocab, ds);
      },
      py::arg("checkpoint"), py::arg("dataset"));

  m.def(
      "embedding_neighbors",
      [](const Checkpoint& c, const std::string& query, std::size_t n) {
        return embedding_neighbors(c.params, c.vocab, query, n);
      },
      py::arg("checkpoint"), py::arg("query"), py::arg("n") = 5);

  m.def("novelty_rate", &novelty_rate, py::arg("generated"),
        py::arg("training"));

  m.def(
      "rank_captions",
      [](const std::vector<const Checkpoint*>& checkpoints,
         const Dataset& ds) {
        RankReport r = rank_captions(to_ensemble(checkpoints),
                                     checkpoints.front()->vocab, ds);
        py::dict d;
        d["recall_at_1"] = r.recall_at_1;
        d["recall_at_5"] = r.recall_at_5;
        d["recall_at_10"] = r.recall_at_10;
        d["median_rank"] = r.median_rank;
        return d;
      },
      py::arg("checkpoints"), py::arg("dataset"));
}
