#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "sqzt/ops.hpp"
#include "sqzt/tensor.hpp"

namespace sqzt {

template <typename T>
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Ordered record of executed ops with the inputs their backward rules need.
/// backward() replays the record in exact reverse execution order and
/// accumulates gradients for every variable touched in forward (variables the
/// loss does not depend on read back as zero). One tape per training step;
/// never shared across concurrent steps.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf over an external tensor (parameters); the tensor must outlive the tape.
  Var<T> leaf(const Tensor<T>* external) {
    values_.push_back(std::shared_ptr<const Tensor<T>>(std::shared_ptr<void>(), external));
    return {static_cast<int>(values_.size()) - 1};
  }

  /// Leaf owning its value (inputs, constants).
  Var<T> leaf(Tensor<T> owned) {
    values_.push_back(std::make_shared<const Tensor<T>>(std::move(owned)));
    return {static_cast<int>(values_.size()) - 1};
  }

  const Tensor<T>& value(Var<T> v) const { return *values_[static_cast<size_t>(v.id)]; }

  /// Gradient of a variable after backward(); zero tensor if never touched.
  const Tensor<T>& grad(Var<T> v) {
    Tensor<T>& g = grads_[static_cast<size_t>(v.id)];
    if (g.empty()) g = Tensor<T>(value(v).shape());
    return g;
  }

  size_t size() const { return values_.size(); }

  void backward(Var<T> root) {
    const Tensor<T>& rv = value(root);
    if (rv.numel() != 1) {
      throw std::invalid_argument("tape: backward root must be scalar, got " + rv.shape_str());
    }
    grads_.assign(values_.size(), Tensor<T>());
    grads_[static_cast<size_t>(root.id)] = Tensor<T>::scalar(T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  // -- recorded ops --------------------------------------------------------

  Var<T> conv2d(Var<T> x, Var<T> w, std::optional<Var<T>> b, int stride, int pad) {
    const Tensor<T>* bias = b ? &value(*b) : nullptr;
    Var<T> out = store(ops::conv2d(value(x), value(w), bias, stride, pad));
    nodes_.push_back([this, x, w, b, out, stride, pad]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::conv2d_bwd(value(x), value(w), *g, stride, pad, buf(x), buf(w),
                      b ? buf(*b) : nullptr);
    });
    return out;
  }

  Var<T> linear(Var<T> x, Var<T> w, std::optional<Var<T>> b) {
    const Tensor<T>* bias = b ? &value(*b) : nullptr;
    Var<T> out = store(ops::linear(value(x), value(w), bias));
    nodes_.push_back([this, x, w, b, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::linear_bwd(value(x), value(w), *g, buf(x), buf(w), b ? buf(*b) : nullptr);
    });
    return out;
  }

  Var<T> relu(Var<T> x) {
    Var<T> out = store(ops::relu(value(x)));
    nodes_.push_back([this, x, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::relu_bwd(value(out), *g, *buf(x));
    });
    return out;
  }

  Var<T> sigmoid(Var<T> x) {
    Var<T> out = store(ops::sigmoid(value(x)));
    nodes_.push_back([this, x, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::sigmoid_bwd(value(out), *g, *buf(x));
    });
    return out;
  }

  Var<T> add(Var<T> a, Var<T> b) { return binary(a, b, ops::BinKind::add); }
  Var<T> mul(Var<T> a, Var<T> b) { return binary(a, b, ops::BinKind::mul); }

  Var<T> global_pool(Var<T> x, ops::PoolKind kind) {
    auto argmax = std::make_shared<std::vector<int64_t>>();
    Var<T> out = store(ops::global_pool(value(x), kind, argmax.get()));
    nodes_.push_back([this, x, out, kind, argmax]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::global_pool_bwd(value(x), kind, *argmax, *g, *buf(x));
    });
    return out;
  }

  Var<T> avgpool2x2(Var<T> x) {
    Var<T> out = store(ops::avgpool2x2(value(x)));
    nodes_.push_back([this, x, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::avgpool2x2_bwd(value(x), *g, *buf(x));
    });
    return out;
  }

  /// (n,c,h,w) -> (n,c_out,h,w), channels [c, c_out) zero-filled.
  Var<T> pad_channels(Var<T> x, int64_t c_out) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 4) throw std::invalid_argument("pad_channels: input must be (n,c,h,w)");
    const int64_t n = xv.extent(0), c = xv.extent(1), plane = xv.extent(2) * xv.extent(3);
    if (c_out < c) throw std::invalid_argument("pad_channels: target below input channels");
    Tensor<T> padded({n, c_out, xv.extent(2), xv.extent(3)});
    for (int64_t nn = 0; nn < n; ++nn) {
      std::copy(xv.data() + nn * c * plane, xv.data() + (nn + 1) * c * plane,
                padded.data() + nn * c_out * plane);
    }
    Var<T> out = store(std::move(padded));
    nodes_.push_back([this, x, out, n, c, c_out, plane]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      Tensor<T>* gx = buf(x);
      for (int64_t nn = 0; nn < n; ++nn) {
        kern::axpy(T(1), g->data() + nn * c_out * plane, gx->data() + nn * c * plane,
                   static_cast<size_t>(c * plane));
      }
    });
    return out;
  }

  Var<T> reshape(Var<T> x, std::vector<int64_t> shape) {
    Var<T> out = store(value(x).reshaped(shape));
    nodes_.push_back([this, x, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      kern::axpy(T(1), g->data(), buf(x)->data(), static_cast<size_t>(g->numel()));
    });
    return out;
  }

  Var<T> batchnorm(Var<T> x, Var<T> gamma, Var<T> beta, Tensor<T>& running_mean,
                   Tensor<T>& running_var, T eps, T momentum, bool train) {
    if (train) {
      auto cache = std::make_shared<ops::BnCache<T>>();
      Var<T> out = store(ops::bn_train(value(x), value(gamma), value(beta), running_mean,
                                       running_var, eps, momentum, *cache));
      nodes_.push_back([this, x, gamma, beta, out, cache]() {
        const Tensor<T>* g = grad_of(out);
        if (g == nullptr) return;
        ops::bn_train_bwd(value(x), value(gamma), *cache, *g, buf(x), buf(gamma), buf(beta));
      });
      return out;
    }
    // infer-mode stats are captured by value: running stats may mutate later
    auto rm = std::make_shared<Tensor<T>>(running_mean);
    auto rv = std::make_shared<Tensor<T>>(running_var);
    Var<T> out = store(ops::bn_infer(value(x), value(gamma), value(beta), *rm, *rv, eps));
    nodes_.push_back([this, x, gamma, beta, out, rm, rv, eps]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::bn_infer_bwd(value(x), value(gamma), *rm, *rv, eps, *g, buf(x), buf(gamma), buf(beta));
    });
    return out;
  }

  Var<T> cross_entropy(Var<T> logits, std::vector<int> labels) {
    auto probs = std::make_shared<Tensor<T>>();
    auto lab = std::make_shared<std::vector<int>>(std::move(labels));
    const T loss = ops::softmax_ce(value(logits), *lab, *probs);
    Var<T> out = store(Tensor<T>::scalar(loss));
    nodes_.push_back([this, logits, out, probs, lab]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::softmax_ce_bwd(*probs, *lab, (*g)[0], *buf(logits));
    });
    return out;
  }

  Var<T> sum(Var<T> x) {
    Var<T> out = store(Tensor<T>::scalar(kern::sum(value(x).data(),
                                                   static_cast<size_t>(value(x).numel()))));
    nodes_.push_back([this, x, out]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      Tensor<T>* gx = buf(x);
      const T gv = (*g)[0];
      for (int64_t i = 0; i < gx->numel(); ++i) (*gx)[i] += gv;
    });
    return out;
  }

  /// dot(x, fixed weights) -> scalar; handy as a generic test loss.
  Var<T> weighted_sum(Var<T> x, Tensor<T> weights) {
    if (weights.numel() != value(x).numel()) {
      throw std::invalid_argument("weighted_sum: weight count mismatch");
    }
    auto wts = std::make_shared<Tensor<T>>(std::move(weights));
    Var<T> out = store(Tensor<T>::scalar(
        kern::dot(value(x).data(), wts->data(), static_cast<size_t>(value(x).numel()))));
    nodes_.push_back([this, x, out, wts]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      kern::axpy((*g)[0], wts->data(), buf(x)->data(), static_cast<size_t>(wts->numel()));
    });
    return out;
  }

  /// Test hook: record an arbitrary backward step.
  Var<T> custom(Tensor<T> value_out, std::function<void(Tape&, Var<T>)> bwd) {
    Var<T> out = store(std::move(value_out));
    nodes_.push_back([this, out, bwd = std::move(bwd)]() { bwd(*this, out); });
    return out;
  }

  /// Gradient of `v` if the loss reached it, nullptr otherwise (treat as zero).
  const Tensor<T>* grad_of(Var<T> v) const {
    const Tensor<T>& g = grads_[static_cast<size_t>(v.id)];
    return g.empty() ? nullptr : &g;
  }

  /// Accumulation buffer for a variable's gradient (allocates zeros on first use).
  Tensor<T>* buf(Var<T> v) {
    Tensor<T>& g = grads_[static_cast<size_t>(v.id)];
    if (g.empty()) g = Tensor<T>(value(v).shape());
    return &g;
  }

 private:
  Var<T> store(Tensor<T> t) {
    values_.push_back(std::make_shared<const Tensor<T>>(std::move(t)));
    return {static_cast<int>(values_.size()) - 1};
  }

  Var<T> binary(Var<T> a, Var<T> b, ops::BinKind kind) {
    Var<T> out = store(ops::binary_bc(value(a), value(b), kind));
    nodes_.push_back([this, a, b, out, kind]() {
      const Tensor<T>* g = grad_of(out);
      if (g == nullptr) return;
      ops::binary_bc_bwd(value(a), value(b), *g, kind, buf(a), buf(b));
    });
    return out;
  }

  std::vector<std::shared_ptr<const Tensor<T>>> values_;
  std::vector<Tensor<T>> grads_;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace sqzt
