// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/common.hpp"
#include "kebench/substrate/language_model.hpp"
#include "kebench/substrate/tokenizer.hpp"

namespace kebench {

struct Architecture {
  int n_layers = 4;
  int d_model = 64;
  int d_mlp = 256;
  int vocab_size = 512;
  int n_heads = 4;
  int context_window = 256;

  void validate() const;
  bool operator==(const Architecture&) const = default;
  std::string describe() const;
};

void to_json(nlohmann::json& j, const Architecture& a);
void from_json(const nlohmann::json& j, Architecture& a);

// The only editable site: the MLP down-projection (d_model x d_mlp).
enum class Site { kMlpDown };

struct LayerWeights {
  Vector attn_gain;
  Matrix wq, wk, wv, wo;  // d x d
  Vector mlp_gain;
  Matrix w_up;    // m x d
  Matrix w_down;  // d x m
};

struct Parameters {
  Matrix token_embedding;     // d x V, one column per token
  Matrix position_embedding;  // d x context_window
  std::vector<LayerWeights> layers;
  Vector final_gain;
  Matrix head;  // V x d

  static Parameters zeros(const Architecture& arch);
  void axpy(double scale, const Parameters& other);  // this += scale * other
  double squared_norm() const;
  // Every tensor's storage, in a fixed order.
  std::vector<std::span<double>> buffers();
};

// One discrete-codebook entry of the adaptor (see edit/grace.hpp).
struct CodebookEntry {
  Vector key;
  Vector value;
  double radius = 1.0;
  std::string target;
};

// Replaces MLP outputs at one layer when they fall within an entry's radius.
struct CodebookAdaptor {
  int layer = 0;
  std::vector<CodebookEntry> entries;

  // Nearest entry whose radius covers `hidden`, if any.
  std::optional<std::size_t> lookup(const Vector& hidden) const;
  Vector apply(const Vector& hidden) const;
};

// value-optimization hook: mlp_out[:, position] at `layer` is replaced by
// (raw mlp output + delta), bypassing any adaptor at that position.
struct ValueShift {
  int layer = 0;
  int position = 0;
  Vector delta;
};

struct LoraFactors {
  int layer = 0;
  Matrix a;  // d x r
  Matrix b;  // r x m
  double scale = 1.0;
};

struct ForwardOptions {
  const ValueShift* shift = nullptr;
  std::span<const LoraFactors> lora{};
  bool use_adaptor = true;
  // Stop after this layer and skip the head (-1 = full pass).
  int last_layer = -1;
};

struct LayerCache {
  Matrix x_in, a, q, k, v, attn_concat, h, b, u, key, mlp_raw, mlp_out, x_out;
  Eigen::RowVectorXd rms_attn, rms_mlp;
  std::vector<Matrix> probs;  // per head, T x T (row = query)
  std::vector<bool> replaced; // positions whose mlp_out was substituted
};

struct ForwardCache {
  std::vector<int> tokens;
  std::vector<LayerCache> layers;
  Matrix final_normed;
  Eigen::RowVectorXd rms_final;
  Matrix final_in;
  Matrix logits;  // V x T; empty when the pass stopped early
};

struct LoraGradient {
  Matrix a, b;
};

struct BackwardOptions {
  // Lowest layer whose input gradient is needed.
  int down_to_layer = 0;
  Parameters* param_grads = nullptr;           // accumulated into when set
  std::vector<LoraGradient>* lora_grads = nullptr;  // parallel to forward lora
};

struct BackwardResult {
  // Gradient w.r.t. each layer's output x_out (index = layer); empty below
  // down_to_layer.
  std::vector<Matrix> d_x_out;
  Matrix d_x0;  // only when down_to_layer == 0
};

struct SequenceLoss {
  double loss = 0.0;  // mean NLL over scored positions
  Matrix d_logits;    // V x T
  bool all_argmax = true;
};

// Mean NLL of tokens[pos + 1] given logits[:, pos] for pos in `positions`.
SequenceLoss sequence_nll(const Matrix& logits, std::span<const int> tokens,
                          std::span<const int> positions);

struct Checkpoint {
  std::string hash;
  Architecture architecture;
  std::shared_ptr<const std::vector<Matrix>> w_down;
  std::shared_ptr<const std::optional<CodebookAdaptor>> adaptor;
};

// Decoder-only pre-norm transformer: learned positions, multi-head causal
// attention, GELU MLP, RMSNorm. Read operations are const and may run
// concurrently; mutation requires exclusive access (write_lock()).
class TransformerModel : public LanguageModel {
 public:
  TransformerModel(Architecture arch, Parameters params, Tokenizer tokenizer,
                   std::string identity);

  static TransformerModel random(const Architecture& arch, Tokenizer tokenizer,
                                 std::uint64_t seed, std::string identity);

  const Architecture& architecture() const { return arch_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Parameters& parameters() const { return params_; }
  Parameters& mutable_parameters() { return params_; }
  std::string identity() const override { return identity_; }

  // BOS + encode(text). Throws ContextOverflowError beyond the window.
  std::vector<int> prompt_tokens(std::string_view text) const;
  void check_window(std::size_t n_tokens) const;

  ForwardCache forward(std::span<const int> tokens, const ForwardOptions& opts = {}) const;
  BackwardResult backward(const ForwardCache& cache, const Matrix& d_logits,
                          const ForwardOptions& fwd, const BackwardOptions& opts) const;

  std::string generate(std::string_view prompt, const GenerationOptions& opts) const override;
  std::vector<int> generate_tokens(std::vector<int> tokens, const GenerationOptions& opts,
                                   const ForwardOptions& fwd = {}) const;

  Matrix get_weight(int layer, Site site) const;
  void set_weight(int layer, Site site, const Matrix& w);
  void add_to_weight(int layer, Site site, const Matrix& delta);

  const std::optional<CodebookAdaptor>& adaptor() const { return adaptor_; }
  CodebookAdaptor& ensure_adaptor(int layer);
  void clear_adaptor() { adaptor_.reset(); }

  // SHA-256 over every parameter and the adaptor.
  std::string checksum() const;
  // Content-addressed: identical editable state yields the same payload.
  Checkpoint snapshot() const;
  void restore(const Checkpoint& cp);

  std::shared_lock<std::shared_mutex> read_lock() const {
    return std::shared_lock<std::shared_mutex>(*mutex_);
  }
  std::unique_lock<std::shared_mutex> write_lock() {
    return std::unique_lock<std::shared_mutex>(*mutex_);
  }

 private:
  void check_layer(int layer) const;

  Architecture arch_;
  Parameters params_;
  Tokenizer tokenizer_;
  std::string identity_;
  std::optional<CodebookAdaptor> adaptor_;
  std::shared_ptr<std::shared_mutex> mutex_ = std::make_shared<std::shared_mutex>();
  mutable std::shared_ptr<std::vector<Checkpoint>> snapshot_cache_ =
      std::make_shared<std::vector<Checkpoint>>();
};

}  // namespace kebench
