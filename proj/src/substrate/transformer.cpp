// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/substrate/transformer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "kebench/substrate/hashing.hpp"
#include "kebench/substrate/random.hpp"

namespace kebench {
namespace {

constexpr double kNormEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double u) {
  return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u)));
}

double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

// y[:, i] = gain .* x[:, i] / rms_i
Matrix rms_norm(const Matrix& x, const Vector& gain, Eigen::RowVectorXd& rms) {
  const double d = static_cast<double>(x.rows());
  rms = ((x.array().square().colwise().sum() / d) + kNormEps).sqrt().matrix();
  Matrix y = x;
  for (Eigen::Index i = 0; i < x.cols(); ++i) y.col(i) = gain.cwiseProduct(x.col(i)) / rms(i);
  return y;
}

Matrix rms_norm_backward(const Matrix& x, const Vector& gain, const Eigen::RowVectorXd& rms,
                         const Matrix& dy, Vector* d_gain) {
  const double d = static_cast<double>(x.rows());
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double r = rms(i);
    const Vector gdy = gain.cwiseProduct(dy.col(i));
    const double dot = gdy.dot(x.col(i));
    dx.col(i) = gdy / r - x.col(i) * (dot / (d * r * r * r));
    if (d_gain) *d_gain += dy.col(i).cwiseProduct(x.col(i)) / r;
  }
  return dx;
}

int argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace

void Architecture::validate() const {
  if (n_layers < 1 || d_model < 1 || d_mlp < 1 || vocab_size < Tokenizer::kBaseVocab ||
      n_heads < 1 || context_window < 2) {
    throw ValidationError("invalid architecture: " + describe());
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("d_model must be divisible by n_heads: " + describe());
  }
}

std::string Architecture::describe() const {
  return fmt::format("L={} d={} m={} V={} heads={} ctx={}", n_layers, d_model, d_mlp,
                     vocab_size, n_heads, context_window);
}

void to_json(nlohmann::json& j, const Architecture& a) {
  j = nlohmann::json{{"n_layers", a.n_layers},   {"d_model", a.d_model},
                     {"d_mlp", a.d_mlp},         {"vocab_size", a.vocab_size},
                     {"n_heads", a.n_heads},     {"context_window", a.context_window}};
}

void from_json(const nlohmann::json& j, Architecture& a) {
  a.n_layers = j.at("n_layers").get<int>();
  a.d_model = j.at("d_model").get<int>();
  a.d_mlp = j.at("d_mlp").get<int>();
  a.vocab_size = j.at("vocab_size").get<int>();
  a.n_heads = j.at("n_heads").get<int>();
  a.context_window = j.at("context_window").get<int>();
}

Parameters Parameters::zeros(const Architecture& arch) {
  const int d = arch.d_model, m = arch.d_mlp;
  Parameters p;
  p.token_embedding = Matrix::Zero(d, arch.vocab_size);
  p.position_embedding = Matrix::Zero(d, arch.context_window);
  p.layers.resize(arch.n_layers);
  for (auto& l : p.layers) {
    l.attn_gain = Vector::Zero(d);
    l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
    l.mlp_gain = Vector::Zero(d);
    l.w_up = Matrix::Zero(m, d);
    l.w_down = Matrix::Zero(d, m);
  }
  p.final_gain = Vector::Zero(d);
  p.head = Matrix::Zero(arch.vocab_size, d);
  return p;
}

void Parameters::axpy(double scale, const Parameters& o) {
  token_embedding += scale * o.token_embedding;
  position_embedding += scale * o.position_embedding;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto& r = o.layers[i];
    l.attn_gain += scale * r.attn_gain;
    l.wq += scale * r.wq;
    l.wk += scale * r.wk;
    l.wv += scale * r.wv;
    l.wo += scale * r.wo;
    l.mlp_gain += scale * r.mlp_gain;
    l.w_up += scale * r.w_up;
    l.w_down += scale * r.w_down;
  }
  final_gain += scale * o.final_gain;
  head += scale * o.head;
}

double Parameters::squared_norm() const {
  double s = token_embedding.squaredNorm() + position_embedding.squaredNorm() +
             final_gain.squaredNorm() + head.squaredNorm();
  for (const auto& l : layers) {
    s += l.attn_gain.squaredNorm() + l.wq.squaredNorm() + l.wk.squaredNorm() +
         l.wv.squaredNorm() + l.wo.squaredNorm() + l.mlp_gain.squaredNorm() +
         l.w_up.squaredNorm() + l.w_down.squaredNorm();
  }
  return s;
}

std::vector<std::span<double>> Parameters::buffers() {
  std::vector<std::span<double>> out;
  auto add = [&](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
  add(token_embedding);
  add(position_embedding);
  for (auto& l : layers) {
    add(l.attn_gain);
    add(l.wq);
    add(l.wk);
    add(l.wv);
    add(l.wo);
    add(l.mlp_gain);
    add(l.w_up);
    add(l.w_down);
  }
  add(final_gain);
  add(head);
  return out;
}

std::optional<std::size_t> CodebookAdaptor::lookup(const Vector& hidden) const {
  std::optional<std::size_t> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double dist = (hidden - entries[i].key).norm();
    if (dist <= entries[i].radius && dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

Vector CodebookAdaptor::apply(const Vector& hidden) const {
  if (auto hit = lookup(hidden)) return entries[*hit].value;
  return hidden;
}

SequenceLoss sequence_nll(const Matrix& logits, std::span<const int> tokens,
                          std::span<const int> positions) {
  SequenceLoss out;
  out.d_logits = Matrix::Zero(logits.rows(), logits.cols());
  if (positions.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(positions.size());
  for (int pos : positions) {
    const int target = tokens[pos + 1];
    const auto col = logits.col(pos);
    const double mx = col.maxCoeff();
    const Vector e = (col.array() - mx).exp().matrix();
    const double z = e.sum();
    out.loss += -(col(target) - mx - std::log(z)) * inv_n;
    out.d_logits.col(pos) = e / z * inv_n;
    out.d_logits(target, pos) -= inv_n;
    if (argmax(col) != target) out.all_argmax = false;
  }
  return out;
}

TransformerModel::TransformerModel(Architecture arch, Parameters params, Tokenizer tokenizer,
                                   std::string identity)
    : arch_(arch),
      params_(std::move(params)),
      tokenizer_(std::move(tokenizer)),
      identity_(std::move(identity)) {
  arch_.validate();
  if (tokenizer_.vocab_size() > arch_.vocab_size) {
    throw ValidationError(fmt::format("tokenizer has {} ids but the model vocabulary is {}",
                                      tokenizer_.vocab_size(), arch_.vocab_size));
  }
  const int d = arch_.d_model, m = arch_.d_mlp;
  bool ok = params_.token_embedding.rows() == d &&
            params_.token_embedding.cols() == arch_.vocab_size &&
            params_.position_embedding.rows() == d &&
            params_.position_embedding.cols() == arch_.context_window &&
            static_cast<int>(params_.layers.size()) == arch_.n_layers &&
            params_.head.rows() == arch_.vocab_size && params_.head.cols() == d &&
            params_.final_gain.size() == d;
  for (const auto& l : params_.layers) {
    ok = ok && l.wq.rows() == d && l.wq.cols() == d && l.w_up.rows() == m &&
         l.w_up.cols() == d && l.w_down.rows() == d && l.w_down.cols() == m &&
         l.attn_gain.size() == d && l.mlp_gain.size() == d;
  }
  if (!ok) throw ValidationError("parameter shapes do not match architecture " + arch_.describe());
}

TransformerModel TransformerModel::random(const Architecture& arch, Tokenizer tokenizer,
                                          std::uint64_t seed, std::string identity) {
  arch.validate();
  Rng rng(seed);
  const int d = arch.d_model, m = arch.d_mlp;
  Parameters p = Parameters::zeros(arch);
  auto fill = [&](Matrix& w, double std) {
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.normal() * std;
  };
  fill(p.token_embedding, 1.0);
  fill(p.position_embedding, 0.3);
  for (auto& l : p.layers) {
    l.attn_gain.setOnes();
    l.mlp_gain.setOnes();
    fill(l.wq, 1.0 / std::sqrt(d));
    fill(l.wk, 1.0 / std::sqrt(d));
    fill(l.wv, 1.0 / std::sqrt(d));
    fill(l.wo, 1.0 / std::sqrt(d));
    fill(l.w_up, 1.0 / std::sqrt(d));
    fill(l.w_down, 1.0 / std::sqrt(m));
  }
  p.final_gain.setOnes();
  fill(p.head, 1.0 / std::sqrt(d));
  return TransformerModel(arch, std::move(p), std::move(tokenizer), std::move(identity));
}

void TransformerModel::check_layer(int layer) const {
  if (layer < 0 || layer >= arch_.n_layers) {
    throw ValidationError(fmt::format("layer index {} out of range 0..{}", layer,
                                      arch_.n_layers - 1));
  }
}

void TransformerModel::check_window(std::size_t n_tokens) const {
  if (n_tokens > static_cast<std::size_t>(arch_.context_window)) {
    throw ContextOverflowError(static_cast<int>(n_tokens), arch_.context_window);
  }
}

std::vector<int> TransformerModel::prompt_tokens(std::string_view text) const {
  std::vector<int> ids{Tokenizer::kBos};
  auto body = tokenizer_.encode(text);
  ids.insert(ids.end(), body.begin(), body.end());
  check_window(ids.size());
  return ids;
}

ForwardCache TransformerModel::forward(std::span<const int> tokens,
                                       const ForwardOptions& opts) const {
  const int T = static_cast<int>(tokens.size());
  if (T < 1) throw ValidationError("forward pass needs at least one token");
  check_window(tokens.size());
  const int d = arch_.d_model;
  const int H = arch_.n_heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int last = opts.last_layer < 0 ? arch_.n_layers - 1 : opts.last_layer;
  check_layer(last);

  ForwardCache cache;
  cache.tokens.assign(tokens.begin(), tokens.end());
  Matrix x(d, T);
  for (int i = 0; i < T; ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= arch_.vocab_size) {
      throw ValidationError(fmt::format("token id {} outside vocabulary", t));
    }
    x.col(i) = params_.token_embedding.col(t) + params_.position_embedding.col(i);
  }

  cache.layers.resize(last + 1);
  for (int l = 0; l <= last; ++l) {
    const LayerWeights& w = params_.layers[l];
    LayerCache& c = cache.layers[l];
    c.x_in = x;
    c.a = rms_norm(x, w.attn_gain, c.rms_attn);
    c.q = w.wq * c.a;
    c.k = w.wk * c.a;
    c.v = w.wv * c.a;
    c.attn_concat = Matrix::Zero(d, T);
    c.probs.resize(H);
    for (int hd = 0; hd < H; ++hd) {
      const auto qh = c.q.middleRows(hd * dh, dh);
      const auto kh = c.k.middleRows(hd * dh, dh);
      const auto vh = c.v.middleRows(hd * dh, dh);
      Matrix scores = (qh.transpose() * kh) * scale;
      Matrix& P = c.probs[hd];
      P = Matrix::Zero(T, T);
      for (int i = 0; i < T; ++i) {
        const double mx = scores.row(i).head(i + 1).maxCoeff();
        double z = 0.0;
        for (int j = 0; j <= i; ++j) {
          P(i, j) = std::exp(scores(i, j) - mx);
          z += P(i, j);
        }
        P.row(i).head(i + 1) /= z;
      }
      c.attn_concat.middleRows(hd * dh, dh) = vh * P.transpose();
    }
    c.h = x + w.wo * c.attn_concat;
    c.b = rms_norm(c.h, w.mlp_gain, c.rms_mlp);
    c.u = w.w_up * c.b;
    c.key = c.u.unaryExpr([](double u) { return gelu(u); });
    c.mlp_raw = w.w_down * c.key;
    for (const auto& f : opts.lora) {
      if (f.layer == l) c.mlp_raw += f.scale * (f.a * (f.b * c.key));
    }
    c.mlp_out = c.mlp_raw;
    c.replaced.assign(T, false);
    if (opts.use_adaptor && adaptor_ && adaptor_->layer == l) {
      for (int i = 0; i < T; ++i) {
        if (auto hit = adaptor_->lookup(c.mlp_raw.col(i))) {
          c.mlp_out.col(i) = adaptor_->entries[*hit].value;
          c.replaced[i] = true;
        }
      }
    }
    if (opts.shift && opts.shift->layer == l) {
      const int p = opts.shift->position;
      if (p < 0 || p >= T) throw ValidationError("value shift position out of range");
      c.mlp_out.col(p) = c.mlp_raw.col(p) + opts.shift->delta;
      c.replaced[p] = false;
    }
    c.x_out = c.h + c.mlp_out;
    x = c.x_out;
  }

  if (last == arch_.n_layers - 1) {
    cache.final_in = x;
    cache.final_normed = rms_norm(x, params_.final_gain, cache.rms_final);
    cache.logits = params_.head * cache.final_normed;
  }
  return cache;
}

BackwardResult TransformerModel::backward(const ForwardCache& cache, const Matrix& d_logits,
                                          const ForwardOptions& fwd,
                                          const BackwardOptions& opts) const {
  if (cache.logits.size() == 0) throw ValidationError("backward needs a full forward pass");
  const int T = static_cast<int>(cache.tokens.size());
  const int d = arch_.d_model;
  const int H = arch_.n_heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Parameters* g = opts.param_grads;

  BackwardResult out;
  out.d_x_out.resize(arch_.n_layers);

  const Matrix d_final = params_.head.transpose() * d_logits;
  if (g) g->head += d_logits * cache.final_normed.transpose();
  Matrix dx = rms_norm_backward(cache.final_in, params_.final_gain, cache.rms_final, d_final,
                                g ? &g->final_gain : nullptr);

  for (int l = arch_.n_layers - 1; l >= opts.down_to_layer; --l) {
    const LayerWeights& w = params_.layers[l];
    const LayerCache& c = cache.layers[l];
    LayerWeights* gl = g ? &g->layers[l] : nullptr;
    out.d_x_out[l] = dx;

    Matrix d_raw = dx;
    for (int i = 0; i < T; ++i) {
      if (c.replaced[i]) d_raw.col(i).setZero();
    }
    Matrix d_key = w.w_down.transpose() * d_raw;
    if (gl) gl->w_down += d_raw * c.key.transpose();
    for (std::size_t fi = 0; fi < fwd.lora.size(); ++fi) {
      const auto& f = fwd.lora[fi];
      if (f.layer != l) continue;
      const Matrix bk = f.b * c.key;
      const Matrix d_bk = f.scale * (f.a.transpose() * d_raw);
      if (opts.lora_grads) {
        auto& lg = (*opts.lora_grads)[fi];
        lg.a += f.scale * d_raw * bk.transpose();
        lg.b += d_bk * c.key.transpose();
      }
      d_key += f.b.transpose() * d_bk;
    }
    const Matrix du = d_key.cwiseProduct(c.u.unaryExpr([](double u) { return gelu_grad(u); }));
    if (gl) gl->w_up += du * c.b.transpose();
    const Matrix db = w.w_up.transpose() * du;
    Matrix d_h = dx + rms_norm_backward(c.h, w.mlp_gain, c.rms_mlp, db,
                                        gl ? &gl->mlp_gain : nullptr);

    if (gl) gl->wo += d_h * c.attn_concat.transpose();
    const Matrix d_concat = w.wo.transpose() * d_h;
    Matrix dq = Matrix::Zero(d, T), dk = Matrix::Zero(d, T), dv = Matrix::Zero(d, T);
    for (int hd = 0; hd < H; ++hd) {
      const auto qh = c.q.middleRows(hd * dh, dh);
      const auto kh = c.k.middleRows(hd * dh, dh);
      const auto vh = c.v.middleRows(hd * dh, dh);
      const auto d_oh = d_concat.middleRows(hd * dh, dh);
      const Matrix& P = c.probs[hd];
      const Matrix dP = d_oh.transpose() * vh;  // T x T
      dv.middleRows(hd * dh, dh) = d_oh * P;
      Matrix dS = Matrix::Zero(T, T);
      for (int i = 0; i < T; ++i) {
        double row = 0.0;
        for (int j = 0; j <= i; ++j) row += P(i, j) * dP(i, j);
        for (int j = 0; j <= i; ++j) dS(i, j) = P(i, j) * (dP(i, j) - row);
      }
      dq.middleRows(hd * dh, dh) = kh * dS.transpose() * scale;
      dk.middleRows(hd * dh, dh) = qh * dS * scale;
    }
    if (gl) {
      gl->wq += dq * c.a.transpose();
      gl->wk += dk * c.a.transpose();
      gl->wv += dv * c.a.transpose();
    }
    const Matrix da = w.wq.transpose() * dq + w.wk.transpose() * dk + w.wv.transpose() * dv;
    dx = d_h + rms_norm_backward(c.x_in, w.attn_gain, c.rms_attn, da,
                                 gl ? &gl->attn_gain : nullptr);
  }

  if (opts.down_to_layer == 0) {
    out.d_x0 = dx;
    if (g) {
      for (int i = 0; i < T; ++i) {
        g->token_embedding.col(cache.tokens[i]) += dx.col(i);
        g->position_embedding.col(i) += dx.col(i);
      }
    }
  }
  return out;
}

std::vector<int> TransformerModel::generate_tokens(std::vector<int> tokens,
                                                   const GenerationOptions& opts,
                                                   const ForwardOptions& fwd) const {
  if (opts.max_tokens < 1) throw ValidationError("max_tokens must be at least 1");
  check_window(tokens.size());
  Rng rng(opts.seed);
  std::vector<int> generated;
  for (int step = 0; step < opts.max_tokens; ++step) {
    if (tokens.size() >= static_cast<std::size_t>(arch_.context_window)) break;
    const ForwardCache c = forward(tokens, fwd);
    const Vector logits = c.logits.col(c.logits.cols() - 1);
    int next = 0;
    if (opts.temperature <= 0.0) {
      next = argmax(logits);
    } else {
      const Vector scaled = logits / opts.temperature;
      const Vector p = (scaled.array() - scaled.maxCoeff()).exp().matrix();
      double u = rng.uniform() * p.sum();
      next = static_cast<int>(p.size()) - 1;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        u -= p(i);
        if (u <= 0.0) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    if (next == Tokenizer::kEos) break;
    tokens.push_back(next);
    generated.push_back(next);
  }
  return generated;
}

std::string TransformerModel::generate(std::string_view prompt,
                                       const GenerationOptions& opts) const {
  const auto ids = generate_tokens(prompt_tokens(prompt), opts);
  return repair_utf8(tokenizer_.decode(ids));
}

Matrix TransformerModel::get_weight(int layer, Site) const {
  check_layer(layer);
  return params_.layers[layer].w_down;
}

void TransformerModel::set_weight(int layer, Site, const Matrix& w) {
  check_layer(layer);
  if (w.rows() != arch_.d_model || w.cols() != arch_.d_mlp) {
    throw ValidationError(fmt::format("weight shape mismatch: expected {}x{}, received {}x{}",
                                      arch_.d_model, arch_.d_mlp, w.rows(), w.cols()));
  }
  params_.layers[layer].w_down = w;
}

void TransformerModel::add_to_weight(int layer, Site site, const Matrix& delta) {
  check_layer(layer);
  if (delta.rows() != arch_.d_model || delta.cols() != arch_.d_mlp) {
    throw ValidationError(fmt::format("delta shape mismatch: expected {}x{}, received {}x{}",
                                      arch_.d_model, arch_.d_mlp, delta.rows(), delta.cols()));
  }
  (void)site;
  params_.layers[layer].w_down += delta;
}

CodebookAdaptor& TransformerModel::ensure_adaptor(int layer) {
  check_layer(layer);
  if (!adaptor_) {
    adaptor_ = CodebookAdaptor{layer, {}};
  } else if (adaptor_->layer != layer) {
    throw ValidationError(fmt::format("adaptor already attached at layer {}, not {}",
                                      adaptor_->layer, layer));
  }
  return *adaptor_;
}

namespace {

void hash_adaptor(Sha256& h, const std::optional<CodebookAdaptor>& adaptor) {
  if (!adaptor) {
    h.update(std::string_view("no-adaptor"));
    return;
  }
  h.update(fmt::format("adaptor@{}:{}", adaptor->layer, adaptor->entries.size()));
  for (const auto& e : adaptor->entries) {
    h.update(e.key).update(e.value);
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(&e.radius), sizeof(double)));
    h.update(e.target);
  }
}

}  // namespace

std::string TransformerModel::checksum() const {
  Sha256 h;
  h.update(arch_.describe());
  h.update(params_.token_embedding).update(params_.position_embedding);
  for (const auto& l : params_.layers) {
    h.update(l.attn_gain).update(l.wq).update(l.wk).update(l.wv).update(l.wo);
    h.update(l.mlp_gain).update(l.w_up).update(l.w_down);
  }
  h.update(params_.final_gain).update(params_.head);
  hash_adaptor(h, adaptor_);
  return h.hex_digest();
}

Checkpoint TransformerModel::snapshot() const {
  Sha256 h;
  h.update(arch_.describe());
  for (const auto& l : params_.layers) h.update(l.w_down);
  hash_adaptor(h, adaptor_);
  std::string hash = h.hex_digest();
  for (const auto& cp : *snapshot_cache_) {
    if (cp.hash == hash) return cp;
  }
  auto w = std::make_shared<std::vector<Matrix>>();
  for (const auto& l : params_.layers) w->push_back(l.w_down);
  Checkpoint cp{std::move(hash), arch_, std::move(w),
                std::make_shared<const std::optional<CodebookAdaptor>>(adaptor_)};
  snapshot_cache_->push_back(cp);
  return cp;
}

void TransformerModel::restore(const Checkpoint& cp) {
  if (!(cp.architecture == arch_)) {
    throw ValidationError("checkpoint architecture " + cp.architecture.describe() +
                          " does not match model " + arch_.describe());
  }
  for (int l = 0; l < arch_.n_layers; ++l) params_.layers[l].w_down = (*cp.w_down)[l];
  adaptor_ = *cp.adaptor;
}

}  // namespace kebench
