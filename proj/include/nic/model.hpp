#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nic/linalg.hpp"

namespace nic {

struct ModelDims {
  std::size_t feature_dim = 0;  // F
  std::size_t embed_dim = 0;    // d, shared embedding and LSTM memory size
  std::size_t vocab_size = 0;   // V
};

// Every trainable matrix of the decoder. The image encoder W_enc is the
// trainable linear top standing in for the CNN; W_dec projects the LSTM
// output to vocabulary logits before the softmax.
struct ModelParams {
  ModelDims dims;

  Matrix w_enc;  // d x F
  Matrix w_e;    // d x V, one column per token
  Matrix w_ix, w_im;  // input gate, d x d
  Matrix w_fx, w_fm;  // forget gate, d x d
  Matrix w_ox, w_om;  // output gate, d x d
  Matrix w_cx, w_cm;  // cell candidate, d x d
  Matrix w_dec;  // V x d

  ModelParams() = default;
  explicit ModelParams(const ModelDims& d);  // zero-initialized

  static ModelParams random(const ModelDims& d, Rng& rng,
                            double scale_override = 0.0);

  struct Named {
    const char* name;
    Matrix* mat;
  };
  // Stable enumeration order, used by SGD, gradcheck and checkpoints.
  std::vector<Named> matrices();
  std::vector<std::pair<const char*, const Matrix*>> matrices() const;
};

// In-place w -= lr * g for every matrix. Rejects shape mismatch and
// non-finite gradient entries.
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

// L2 norm over all gradient entries; used by the optional clipping valve.
double grad_norm(const ModelParams& grads);
void scale_grads(ModelParams& grads, double factor);

struct LstmState {
  Vec m;  // memory output
  Vec c;  // cell
  static LstmState zero(std::size_t d) { return {Vec(d, 0.0), Vec(d, 0.0)}; }
};

// Everything the backward pass needs from one unrolled step.
struct StepCache {
  Vec x;        // input after dropout
  Vec x_mask;   // dropout mask applied to the raw input
  Vec i, f, o, g;
  Vec c_prev, m_prev;
  Vec c, m;
  Vec m_dropped;  // m after dropout, fed to w_dec
  Vec m_mask;
  Vec log_p;      // log-softmax over vocabulary (empty on the image step)
  int fed_token = -1;   // token actually embedded (-1 on the image step)
  int target = -1;      // -1 when this step's prediction is not trained
};

struct ForwardCache {
  Vec features;
  std::vector<StepCache> steps;  // image step first, then one per word input
  double loss = 0.0;
  std::size_t token_count = 0;   // number of predicted tokens
};

Vec encode_image(const ModelParams& params, const Vec& features);
Vec embed_word(const ModelParams& params, std::size_t token_id);

std::pair<LstmState, StepCache> lstm_step(const ModelParams& params,
                                          const Vec& x_t,
                                          const LstmState& prev);

// log_softmax(w_dec * m_t)
Vec output_distribution(const ModelParams& params, const Vec& m_t);

// Inverted dropout: zero with probability `rate`, survivors scaled by
// 1/(1-rate). Identity when not training. Returns (vector, mask).
std::pair<Vec, Vec> apply_dropout(const Vec& v, double rate, bool training,
                                  Rng& rng);

struct ForwardOptions {
  double dropout_rate = 0.0;
  bool training = false;
  // Scheduled sampling: probability of feeding a word sampled from the
  // previous step's distribution instead of the ground-truth word. Applies
  // to word positions after the start token. 0 = teacher forcing.
  double sample_prob = 0.0;
  bool sample_from_argmax = false;  // replacement word via argmax, not draw
};

// Unrolled pass: image at t = -1 from zero state, then one step per input
// token; loss sums -log p over every token after the start word, stop word
// included. `tokens` carries start and stop ids.
std::pair<double, ForwardCache> forward_caption(
    const ModelParams& params, const Vec& features,
    const std::vector<int>& tokens, const ForwardOptions& opt, Rng& rng);

// Exact gradients of the forward loss by backpropagation through the
// unrolled graph, using the cached activations and dropout masks.
ModelParams backward_caption(const ModelParams& params,
                             const ForwardCache& cache);

// -------- finite-difference gradient check --------

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = false;
  double tolerance = 1e-4;
};

// Central differences (L(w+eps) - L(w-eps)) / (2 eps) on n_coords randomly
// chosen coordinates per matrix; relative error uses floor 1e-8.
GradCheckReport finite_diff_gradcheck(
    const std::function<double(const ModelParams&)>& loss_fn,
    ModelParams& params, const ModelParams& analytic, double eps,
    std::size_t n_coords, Rng& rng, double tolerance = 1e-4);

}  // namespace nic
