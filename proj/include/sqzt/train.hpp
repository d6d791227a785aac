#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sqzt/config.hpp"
#include "sqzt/data.hpp"
#include "sqzt/model.hpp"

namespace sqzt {

/// Linear warmup to lr0 over W epochs, then cosine annealing to zero at E.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Classical SGD with momentum and L2-in-gradient weight decay:
/// v <- momentum*v + grad + wd*param; param <- param - lr*v.
/// Rejects non-finite gradients.
template <typename T>
void sgd_update(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity, T lr, T momentum,
                T weight_decay) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw std::invalid_argument("sgd: parameter/gradient/velocity shapes disagree");
  }
  for (int64_t i = 0; i < grad.numel(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error("sgd: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  for (int64_t i = 0; i < param.numel(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
    param[i] -= lr * velocity[i];
  }
}

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double loss = 0;
  double top1 = 0;
};

/// Momentum buffers keyed by parameter name (ordered for determinism).
struct SgdState {
  std::map<std::string, Tensor<float>> velocity;
};

struct TrainHooks {
  std::function<void(int epoch, ModelF& model, const SgdState& opt,
                     const std::vector<EpochStats>& history)>
      after_epoch;
};

/// Deterministic under cfg.seed: per-epoch RNG streams are derived from
/// (seed, epoch), so resuming from a checkpoint at an epoch boundary
/// reproduces the uninterrupted run bit-exactly.
std::vector<EpochStats> train_model(ModelF& model, const TrainConfig& cfg,
                                    const std::vector<VideoRecord>& data, SgdState& opt,
                                    int start_epoch = 0, const TrainHooks& hooks = {});

struct EvalResult {
  double top1 = 0;
  double top5 = 0;
  std::vector<double> per_class_acc;
  std::vector<int> per_class_count;
  int total = 0;
};

/// Multi-view evaluation: per-sample prediction is the argmax of the mean of
/// softmax scores over all views (fixed summation order; ties broken by the
/// lowest class index).
EvalResult evaluate_multiview(ModelF& model, const std::vector<VideoRecord>& data,
                              const EvalConfig& ecfg, int interval,
                              uint64_t shuffle_seed = 1234);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace sqzt
