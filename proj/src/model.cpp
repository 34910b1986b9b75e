#include "nic/model.hpp"

#include <algorithm>
#include <cmath>

namespace nic {

namespace {

Vec add(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

ModelParams::ModelParams(const ModelDims& d) : dims(d) {
  check(d.feature_dim >= 1 && d.embed_dim >= 1 && d.vocab_size >= 1,
        "ModelParams: all dimensions must be >= 1");
  w_enc = Matrix(d.embed_dim, d.feature_dim);
  w_e = Matrix(d.embed_dim, d.vocab_size);
  w_ix = w_im = w_fx = w_fm = w_ox = w_om = w_cx = w_cm =
      Matrix(d.embed_dim, d.embed_dim);
  w_dec = Matrix(d.vocab_size, d.embed_dim);
}

ModelParams ModelParams::random(const ModelDims& d, Rng& rng,
                                double scale_override) {
  ModelParams p(d);
  for (auto& [name, mat] : p.matrices()) {
    const double scale = scale_override > 0.0
                             ? scale_override
                             : default_init_scale(mat->rows, mat->cols);
    *mat = init_uniform(mat->rows, mat->cols, scale, rng);
  }
  return p;
}

std::vector<ModelParams::Named> ModelParams::matrices() {
  return {{"w_enc", &w_enc}, {"w_e", &w_e},   {"w_ix", &w_ix},
          {"w_im", &w_im},   {"w_fx", &w_fx}, {"w_fm", &w_fm},
          {"w_ox", &w_ox},   {"w_om", &w_om}, {"w_cx", &w_cx},
          {"w_cm", &w_cm},   {"w_dec", &w_dec}};
}

std::vector<std::pair<const char*, const Matrix*>> ModelParams::matrices()
    const {
  auto named = const_cast<ModelParams*>(this)->matrices();
  std::vector<std::pair<const char*, const Matrix*>> out;
  out.reserve(named.size());
  for (auto& n : named) out.emplace_back(n.name, n.mat);
  return out;
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  check(lr >= 0.0, "sgd_step: negative learning rate");
  auto ps = params.matrices();
  auto gs = grads.matrices();
  check(ps.size() == gs.size(), "sgd_step: parameter set mismatch");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Matrix& w = *ps[k].mat;
    const Matrix& g = *gs[k].second;
    check(w.same_shape(g),
          std::string("sgd_step: shape mismatch on ") + ps[k].name);
    check(all_finite(g.data),
          std::string("sgd_step: non-finite gradient in ") + ps[k].name);
    for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= lr * g.data[i];
  }
}

double grad_norm(const ModelParams& grads) {
  double sq = 0.0;
  for (auto& [name, mat] : grads.matrices())
    for (double x : mat->data) sq += x * x;
  return std::sqrt(sq);
}

void scale_grads(ModelParams& grads, double factor) {
  for (auto& [name, mat] : grads.matrices())
    for (double& x : mat->data) x *= factor;
}

Vec encode_image(const ModelParams& params, const Vec& features) {
  check(features.size() == params.dims.feature_dim,
        "encode_image: feature dim " + std::to_string(features.size()) +
            ", expected " + std::to_string(params.dims.feature_dim));
  return matvec(params.w_enc, features);
}

Vec embed_word(const ModelParams& params, std::size_t token_id) {
  check(token_id < params.dims.vocab_size,
        "embed_word: token id " + std::to_string(token_id) +
            " out of range (V=" + std::to_string(params.dims.vocab_size) + ")");
  Vec out(params.dims.embed_dim);
  for (std::size_t r = 0; r < params.dims.embed_dim; ++r)
    out[r] = params.w_e.at(r, token_id);
  return out;
}

std::pair<LstmState, StepCache> lstm_step(const ModelParams& params,
                                          const Vec& x_t,
                                          const LstmState& prev) {
  const std::size_t d = params.dims.embed_dim;
  check(x_t.size() == d && prev.m.size() == d && prev.c.size() == d,
        "lstm_step: dimension mismatch");
  StepCache cache;
  cache.x = x_t;
  cache.m_prev = prev.m;
  cache.c_prev = prev.c;
  cache.i = sigmoid(add(matvec(params.w_ix, x_t), matvec(params.w_im, prev.m)));
  cache.f = sigmoid(add(matvec(params.w_fx, x_t), matvec(params.w_fm, prev.m)));
  cache.o = sigmoid(add(matvec(params.w_ox, x_t), matvec(params.w_om, prev.m)));
  cache.g =
      tanh_vec(add(matvec(params.w_cx, x_t), matvec(params.w_cm, prev.m)));
  cache.c.resize(d);
  cache.m.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    cache.c[j] = cache.f[j] * prev.c[j] + cache.i[j] * cache.g[j];
    cache.m[j] = cache.o[j] * cache.c[j];  // no output-side tanh
  }
  LstmState next{cache.m, cache.c};
  return {std::move(next), std::move(cache)};
}

Vec output_distribution(const ModelParams& params, const Vec& m_t) {
  return log_softmax(matvec(params.w_dec, m_t));
}

std::pair<Vec, Vec> apply_dropout(const Vec& v, double rate, bool training,
                                  Rng& rng) {
  check(rate >= 0.0 && rate < 1.0, "apply_dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return {v, Vec(v.size(), 1.0)};
  const double keep_scale = 1.0 / (1.0 - rate);
  Vec out(v.size()), mask(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double m = rng.next_double() < rate ? 0.0 : keep_scale;
    mask[j] = m;
    out[j] = v[j] * m;
  }
  return {out, mask};
}

std::pair<double, ForwardCache> forward_caption(const ModelParams& params,
                                                const Vec& features,
                                                const std::vector<int>& tokens,
                                                const ForwardOptions& opt,
                                                Rng& rng) {
  check(tokens.size() >= 2, "forward_caption: need at least start and stop");
  const std::size_t d = params.dims.embed_dim;

  ForwardCache cache;
  cache.features = features;
  cache.steps.reserve(tokens.size());

  // t = -1: the image, from zero state; its prediction (the start word) is
  // conditioned on, never trained.
  LstmState state = LstmState::zero(d);
  {
    auto [xd, mask] =
        apply_dropout(encode_image(params, features), opt.dropout_rate,
                      opt.training, rng);
    auto [next, step] = lstm_step(params, xd, state);
    step.x_mask = std::move(mask);
    state = std::move(next);
    cache.steps.push_back(std::move(step));
  }

  double loss = 0.0;
  int prev_sampled = -1;  // sample from the previous step's output
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    int fed = tokens[t];
    check(fed >= 0 && static_cast<std::size_t>(fed) < params.dims.vocab_size,
          "forward_caption: token id out of range");
    if (t > 0 && opt.sample_prob > 0.0 && prev_sampled >= 0 &&
        rng.next_double() < opt.sample_prob) {
      fed = prev_sampled;
    }
    auto [xd, mask] =
        apply_dropout(embed_word(params, static_cast<std::size_t>(fed)),
                      opt.dropout_rate, opt.training, rng);
    auto [next, step] = lstm_step(params, xd, state);
    step.x_mask = std::move(mask);
    step.fed_token = fed;
    state = std::move(next);

    auto [md, mmask] =
        apply_dropout(step.m, opt.dropout_rate, opt.training, rng);
    step.m_dropped = std::move(md);
    step.m_mask = std::move(mmask);
    step.log_p = output_distribution(params, step.m_dropped);

    const int target = tokens[t + 1];
    check(target >= 0 &&
              static_cast<std::size_t>(target) < params.dims.vocab_size,
          "forward_caption: target id out of range");
    step.target = target;
    loss -= step.log_p[static_cast<std::size_t>(target)];
    cache.token_count += 1;

    if (opt.sample_prob > 0.0) {
      if (opt.sample_from_argmax) {
        prev_sampled = static_cast<int>(std::distance(
            step.log_p.begin(),
            std::max_element(step.log_p.begin(), step.log_p.end())));
      } else {
        Vec p(step.log_p.size());
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::exp(step.log_p[j]);
        prev_sampled = static_cast<int>(sample_categorical(p, rng));
      }
    }
    cache.steps.push_back(std::move(step));
  }
  check(std::isfinite(loss), "forward_caption: non-finite loss");
  cache.loss = loss;
  return {loss, std::move(cache)};
}

ModelParams backward_caption(const ModelParams& params,
                             const ForwardCache& cache) {
  const std::size_t d = params.dims.embed_dim;
  check(!cache.steps.empty() && cache.steps.front().fed_token == -1,
        "backward_caption: cache missing image step");
  ModelParams grads(params.dims);

  Vec dm_rec(d, 0.0), dc_rec(d, 0.0);
  for (std::size_t s = cache.steps.size(); s-- > 0;) {
    const StepCache& st = cache.steps[s];
    check(st.x.size() == d, "backward_caption: cache/params mismatch");

    Vec dm = dm_rec;
    if (st.target >= 0) {
      // d loss / d logits = p - onehot(target)
      Vec dlogits(st.log_p.size());
      for (std::size_t j = 0; j < dlogits.size(); ++j)
        dlogits[j] = std::exp(st.log_p[j]);
      dlogits[static_cast<std::size_t>(st.target)] -= 1.0;
      add_outer(grads.w_dec, dlogits, st.m_dropped);
      Vec dmd = matvec_transposed(params.w_dec, dlogits);
      for (std::size_t j = 0; j < d; ++j) dm[j] += dmd[j] * st.m_mask[j];
    }

    Vec dc(d), di(d), df(d), dg(d), do_(d);
    for (std::size_t j = 0; j < d; ++j) {
      do_[j] = dm[j] * st.c[j];
      dc[j] = dm[j] * st.o[j] + dc_rec[j];
      di[j] = dc[j] * st.g[j];
      dg[j] = dc[j] * st.i[j];
      df[j] = dc[j] * st.c_prev[j];
    }
    Vec da_i(d), da_f(d), da_o(d), da_g(d);
    for (std::size_t j = 0; j < d; ++j) {
      da_i[j] = di[j] * st.i[j] * (1.0 - st.i[j]);
      da_f[j] = df[j] * st.f[j] * (1.0 - st.f[j]);
      da_o[j] = do_[j] * st.o[j] * (1.0 - st.o[j]);
      da_g[j] = dg[j] * (1.0 - st.g[j] * st.g[j]);
    }

    add_outer(grads.w_ix, da_i, st.x);
    add_outer(grads.w_im, da_i, st.m_prev);
    add_outer(grads.w_fx, da_f, st.x);
    add_outer(grads.w_fm, da_f, st.m_prev);
    add_outer(grads.w_ox, da_o, st.x);
    add_outer(grads.w_om, da_o, st.m_prev);
    add_outer(grads.w_cx, da_g, st.x);
    add_outer(grads.w_cm, da_g, st.m_prev);

    Vec dx = matvec_transposed(params.w_ix, da_i);
    {
      Vec t = matvec_transposed(params.w_fx, da_f);
      for (std::size_t j = 0; j < d; ++j) dx[j] += t[j];
      t = matvec_transposed(params.w_ox, da_o);
      for (std::size_t j = 0; j < d; ++j) dx[j] += t[j];
      t = matvec_transposed(params.w_cx, da_g);
      for (std::size_t j = 0; j < d; ++j) dx[j] += t[j];
    }
    for (std::size_t j = 0; j < d; ++j) dx[j] *= st.x_mask[j];

    if (st.fed_token >= 0) {
      const std::size_t col = static_cast<std::size_t>(st.fed_token);
      for (std::size_t j = 0; j < d; ++j) grads.w_e.at(j, col) += dx[j];
    } else {
      add_outer(grads.w_enc, dx, cache.features);
    }

    dm_rec = matvec_transposed(params.w_im, da_i);
    {
      Vec t = matvec_transposed(params.w_fm, da_f);
      for (std::size_t j = 0; j < d; ++j) dm_rec[j] += t[j];
      t = matvec_transposed(params.w_om, da_o);
      for (std::size_t j = 0; j < d; ++j) dm_rec[j] += t[j];
      t = matvec_transposed(params.w_cm, da_g);
      for (std::size_t j = 0; j < d; ++j) dm_rec[j] += t[j];
    }
    // cell path through the forget gate
    for (std::size_t j = 0; j < d; ++j) dc_rec[j] = dc[j] * st.f[j];
  }
  return grads;
}

GradCheckReport finite_diff_gradcheck(
    const std::function<double(const ModelParams&)>& loss_fn,
    ModelParams& params, const ModelParams& analytic, double eps,
    std::size_t n_coords, Rng& rng, double tolerance) {
  check(eps >= 1e-7 && eps <= 1e-3, "finite_diff_gradcheck: eps out of range");
  check(n_coords >= 1, "finite_diff_gradcheck: n_coords must be >= 1");
  constexpr double kFloor = 1e-8;

  GradCheckReport report;
  report.tolerance = tolerance;
  report.pass = true;

  auto ps = params.matrices();
  auto as = analytic.matrices();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Matrix& w = *ps[k].mat;
    const Matrix& g = *as[k].second;
    GradCheckEntry entry;
    entry.name = ps[k].name;
    for (std::size_t probe = 0; probe < n_coords; ++probe) {
      const std::size_t idx = rng.next_u64() % w.data.size();
      const double orig = w.data[idx];
      w.data[idx] = orig + eps;
      const double lp = loss_fn(params);
      w.data[idx] = orig - eps;
      const double lm = loss_fn(params);
      w.data[idx] = orig;
      check(std::isfinite(lp) && std::isfinite(lm),
            "finite_diff_gradcheck: non-finite loss while probing");
      const double numeric = (lp - lm) / (2.0 * eps);
      const double abs_err = std::abs(g.data[idx] - numeric);
      const double rel_err =
          abs_err /
          std::max({std::abs(g.data[idx]), std::abs(numeric), kFloor});
      if (rel_err > entry.max_rel_err) {
        entry.max_rel_err = rel_err;
        entry.max_abs_err = abs_err;
        entry.worst_index = idx;
      }
    }
    if (entry.max_rel_err >= tolerance) report.pass = false;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace nic
