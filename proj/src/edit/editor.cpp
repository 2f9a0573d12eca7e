// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/edit/editor.hpp"

#include <set>

#include <fmt/format.h>

namespace kebench {
namespace {

// Folds per-request outcomes of a sequentially applied method into one.
EditOutcome merge(std::vector<EditOutcome> parts) {
  if (parts.size() == 1) return std::move(parts[0]);
  EditOutcome out = parts.front();
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    before += p.diagnostics.nll_before;
    after += p.diagnostics.nll_after;
    if (i == 0) continue;
    out.diagnostics.value_steps += p.diagnostics.value_steps;
    out.diagnostics.converged = out.diagnostics.converged && p.diagnostics.converged;
    out.diagnostics.solve_residual =
        std::max(out.diagnostics.solve_residual, p.diagnostics.solve_residual);
    for (const auto& w : p.diagnostics.warnings) {
      out.diagnostics.warnings.push_back(fmt::format("request {}: {}", i, w));
    }
    if (out.weight_delta && p.weight_delta) out.weight_delta->absorb(*p.weight_delta);
    if (out.codebook && p.codebook) {
      auto& c = *out.codebook;
      c.inserted.insert(c.inserted.end(), p.codebook->inserted.begin(), p.codebook->inserted.end());
      c.replaced.insert(c.replaced.end(), p.codebook->replaced.begin(), p.codebook->replaced.end());
      c.shrunk.insert(c.shrunk.end(), p.codebook->shrunk.begin(), p.codebook->shrunk.end());
    }
    out.wall_ms += p.wall_ms;
    out.weight_hash = p.weight_hash;
  }
  out.diagnostics.nll_before = before / static_cast<double>(parts.size());
  out.diagnostics.nll_after = after / static_cast<double>(parts.size());
  return out;
}

class Overrides {
 public:
  Overrides(const nlohmann::json& j, std::string method) : j_(j), method_(std::move(method)) {
    if (!j_.is_null() && !j_.is_object()) {
      throw ValidationError("hyperparameter overrides for " + method_ + " must be an object");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (j_.is_null() || !j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(fmt::format("hyperparameter {}.{} has the wrong type", method_, key));
    }
  }

  void finish() const {
    if (j_.is_null()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) {
        throw ValidationError(fmt::format("unknown hyperparameter {} for {}", k, method_));
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string method_;
  std::set<std::string> used_;
};

ValueOptions value_options(Overrides& o) {
  ValueOptions v;
  v.steps = o.get("value_steps", v.steps);
  v.rate = o.get("value_rate", v.rate);
  v.weight_decay = o.get("value_weight_decay", v.weight_decay);
  v.stop_loss = o.get("value_stop_loss", v.stop_loss);
  return v;
}

std::shared_ptr<CovarianceProvider> need(const std::shared_ptr<CovarianceProvider>& c,
                                         const std::string& method) {
  if (!c) throw ValidationError(method + " needs a covariance sample");
  return c;
}

class RomeEditor : public Editor {
 public:
  RomeEditor(ValueOptions v, std::shared_ptr<CovarianceProvider> c) : v_(v), cov_(std::move(c)) {}
  std::string name() const override { return "rome"; }
  nlohmann::json hyperparameters() const override { return {{"value", v_}}; }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    std::vector<EditOutcome> parts;
    for (const auto& r : reqs) parts.push_back(edit_rome(model, r, *cov_, v_));
    return merge(std::move(parts));
  }

 private:
  ValueOptions v_;
  std::shared_ptr<CovarianceProvider> cov_;
};

class MemitEditor : public Editor {
 public:
  MemitEditor(ValueOptions v, std::shared_ptr<CovarianceProvider> c) : v_(v), cov_(std::move(c)) {}
  std::string name() const override { return "memit"; }
  nlohmann::json hyperparameters() const override { return {{"value", v_}}; }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    return edit_memit(model, reqs, *cov_, v_);
  }

 private:
  ValueOptions v_;
  std::shared_ptr<CovarianceProvider> cov_;
};

class AlphaEditEditor : public Editor {
 public:
  AlphaEditEditor(ValueOptions v, std::shared_ptr<CovarianceProvider> c,
                  std::shared_ptr<PreservedKeyProvider> p)
      : v_(v), cov_(std::move(c)), preserved_(std::move(p)) {}
  std::string name() const override { return "alphaedit"; }
  nlohmann::json hyperparameters() const override {
    return {{"value", v_}, {"preserved_prompts", preserved_->prompts().size()}};
  }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    return edit_alphaedit(model, reqs, *cov_, *preserved_, v_);
  }

 private:
  ValueOptions v_;
  std::shared_ptr<CovarianceProvider> cov_;
  std::shared_ptr<PreservedKeyProvider> preserved_;
};

class AnyEditEditor : public Editor {
 public:
  AnyEditEditor(ValueOptions v, int chunk, std::shared_ptr<CovarianceProvider> c)
      : v_(v), chunk_(chunk), cov_(std::move(c)) {}
  std::string name() const override { return "anyedit"; }
  nlohmann::json hyperparameters() const override { return {{"value", v_}, {"chunk_size", chunk_}}; }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    std::vector<EditOutcome> parts;
    for (const auto& r : reqs) parts.push_back(edit_anyedit(model, r, chunk_, *cov_, v_));
    return merge(std::move(parts));
  }

 private:
  ValueOptions v_;
  int chunk_;
  std::shared_ptr<CovarianceProvider> cov_;
};

class LoraEditor : public Editor {
 public:
  explicit LoraEditor(LoraOptions o) : o_(o) {}
  std::string name() const override { return "lora"; }
  nlohmann::json hyperparameters() const override { return o_; }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    return edit_lora(model, reqs, o_);
  }

 private:
  LoraOptions o_;
};

class GraceEditor : public Editor {
 public:
  explicit GraceEditor(GraceOptions o) : o_(o) {}
  std::string name() const override { return "grace"; }
  nlohmann::json hyperparameters() const override {
    return {{"epsilon", o_.epsilon}, {"value", o_.value}};
  }
  EditOutcome apply(TransformerModel& model, std::span<const EditRequest> reqs) override {
    std::vector<EditOutcome> parts;
    for (const auto& r : reqs) parts.push_back(edit_grace(model, r, o_));
    return merge(std::move(parts));
  }

 private:
  GraceOptions o_;
};

}  // namespace

const std::vector<std::string>& editor_names() {
  static const std::vector<std::string> names{"rome", "memit", "alphaedit", "anyedit", "lora", "grace"};
  return names;
}

std::unique_ptr<Editor> make_editor(const std::string& name, const nlohmann::json& overrides,
                                    EditContext ctx) {
  Overrides o(overrides, name);
  std::unique_ptr<Editor> out;
  if (name == "rome") {
    out = std::make_unique<RomeEditor>(value_options(o), need(ctx.covariance, name));
  } else if (name == "memit") {
    out = std::make_unique<MemitEditor>(value_options(o), need(ctx.covariance, name));
  } else if (name == "alphaedit") {
    if (!ctx.preserved) throw ValidationError("alphaedit needs preserved prompts");
    out = std::make_unique<AlphaEditEditor>(value_options(o), need(ctx.covariance, name),
                                            ctx.preserved);
  } else if (name == "anyedit") {
    const auto v = value_options(o);
    const int chunk = o.get("chunk_size", 16);
    if (chunk < 1) throw ValidationError("anyedit chunk_size must be at least 1");
    out = std::make_unique<AnyEditEditor>(v, chunk, need(ctx.covariance, name));
  } else if (name == "lora") {
    LoraOptions l;
    l.rank = o.get("rank", l.rank);
    l.steps = o.get("steps", l.steps);
    l.rate = o.get("rate", l.rate);
    l.scale = o.get("scale", l.scale);
    l.seed = o.get("seed", l.seed);
    if (l.rank < 1) throw ValidationError("lora rank must be at least 1");
    out = std::make_unique<LoraEditor>(l);
  } else if (name == "grace") {
    GraceOptions g;
    g.value = value_options(o);
    g.epsilon = o.get("epsilon", g.epsilon);
    if (!(g.epsilon > 0.0)) throw ValidationError("grace epsilon must be positive");
    out = std::make_unique<GraceEditor>(g);
  } else {
    throw ValidationError("unknown editing method: " + name);
  }
  o.finish();
  return out;
}

}  // namespace kebench
