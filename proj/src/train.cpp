#include "sqzt/train.hpp"

#include <cmath>
#include <fstream>

namespace sqzt {

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.total_epochs) {
    throw std::invalid_argument("lr_schedule: epoch " + std::to_string(epoch) +
                                " outside [0," + std::to_string(cfg.total_epochs) + "]");
  }
  if (epoch < cfg.warmup_epochs) {
    return cfg.lr0 * static_cast<double>(epoch + 1) / static_cast<double>(cfg.warmup_epochs);
  }
  const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                          static_cast<double>(cfg.total_epochs - cfg.warmup_epochs);
  return cfg.lr0 * 0.5 * (1.0 + std::cos(M_PI * progress));
}

namespace {

int argmax_row(const float* row, int64_t k) {
  int best = 0;
  for (int64_t j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace

std::vector<EpochStats> train_model(ModelF& model, const TrainConfig& cfg,
                                    const std::vector<VideoRecord>& data, SgdState& opt,
                                    int start_epoch, const TrainHooks& hooks) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const int64_t L = data.front().frames.extent(1);
  const int64_t h = data.front().frames.extent(2), w = data.front().frames.extent(3);
  if (h != model.cfg.input_h || w != model.cfg.input_w) {
    throw std::invalid_argument("train: dataset resolution " + std::to_string(h) + "x" +
                                std::to_string(w) + " != model input " +
                                std::to_string(model.cfg.input_h) + "x" +
                                std::to_string(model.cfg.input_w));
  }
  const int t_frames = model.cfg.frames;
  auto params = model.params();
  for (const auto& p : params) {
    if (opt.velocity.find(p.name) == opt.velocity.end()) {
      opt.velocity.emplace(p.name, Tensor<float>(p.tensor->shape()));
    }
  }

  std::vector<EpochStats> history;
  model.training = true;
  for (int epoch = start_epoch; epoch < cfg.total_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    Rng erng(Rng::derive(cfg.seed, 0xE0000 + static_cast<uint64_t>(epoch)));
    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    erng.shuffle(order);

    double loss_sum = 0;
    int64_t seen = 0, correct = 0;
    for (size_t at = 0; at + 2 <= order.size(); at += static_cast<size_t>(cfg.batch_size)) {
      const int bs = static_cast<int>(
          std::min<size_t>(static_cast<size_t>(cfg.batch_size), order.size() - at));
      if (bs < 2) break;  // batch statistics need at least two values
      Tensor<float> batch({bs, 3, t_frames, h, w});
      std::vector<int> labels(static_cast<size_t>(bs));
      const int64_t clip_elems = 3 * t_frames * h * w;
      for (int b = 0; b < bs; ++b) {
        const VideoRecord& rec = data[order[at + static_cast<size_t>(b)]];
        const int offset =
            cfg.temporal_offset_augment ? static_cast<int>(erng.uniform_int(
                                              static_cast<uint64_t>(L)))
                                        : 0;
        Tensor<float> clip = sample_clip(rec, t_frames, cfg.interval, offset);
        int label = rec.label;
        if (cfg.flip_augment && erng.uniform() < 0.5) {
          clip = hflip_clip(clip);
          label = hflip_label(label);
        }
        if (cfg.shuffle_frames) shuffle_clip_frames(clip, erng);
        std::copy(clip.data(), clip.data() + clip_elems, batch.data() + b * clip_elems);
        labels[static_cast<size_t>(b)] = label;
      }

      Tape<float> tape;
      ParamVars<float> pv;
      Var<float> logits =
          model.forward(tape, pv, tape.leaf(squeeze_time(std::move(batch))));
      Var<float> loss = tape.cross_entropy(logits, labels);
      const float loss_v = tape.value(loss)[0];
      if (!std::isfinite(loss_v)) {
        throw std::runtime_error(
            "train: loss became non-finite at epoch " + std::to_string(epoch) +
            "; restart from the last written checkpoint");
      }
      tape.backward(loss);

      const Tensor<float>& lv = tape.value(logits);
      for (int b = 0; b < bs; ++b) {
        if (argmax_row(lv.data() + b * model.cfg.num_classes, model.cfg.num_classes) ==
            labels[static_cast<size_t>(b)]) {
          ++correct;
        }
      }
      loss_sum += static_cast<double>(loss_v) * bs;
      seen += bs;

      for (const auto& p : params) {
        const Tensor<float>& g = tape.grad(pv.at(p.tensor));
        try {
          sgd_update(*p.tensor, g, opt.velocity.at(p.name), static_cast<float>(lr),
                     static_cast<float>(cfg.momentum),
                     p.decay ? static_cast<float>(cfg.weight_decay) : 0.0f);
        } catch (const std::runtime_error& e) {
          throw std::runtime_error("train: parameter '" + p.name + "': " + e.what());
        }
      }
    }

    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    st.top1 = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    history.push_back(st);
    if (hooks.after_epoch) hooks.after_epoch(epoch, model, opt, history);
  }
  model.training = false;
  return history;
}

EvalResult evaluate_multiview(ModelF& model, const std::vector<VideoRecord>& data,
                              const EvalConfig& ecfg, int interval, uint64_t shuffle_seed) {
  model.training = false;
  const int k = model.cfg.num_classes;
  EvalResult res;
  res.per_class_acc.assign(static_cast<size_t>(k), 0.0);
  res.per_class_count.assign(static_cast<size_t>(k), 0);

  for (size_t ri = 0; ri < data.size(); ++ri) {
    const VideoRecord& rec = data[ri];
    std::vector<Tensor<float>> views = make_views(rec, model.cfg.frames, interval, ecfg.n_clips,
                                                  ecfg.n_crops, ecfg.crop_h, ecfg.crop_w);
    if (ecfg.shuffle_frames) {
      Rng vr(Rng::derive(shuffle_seed, ri));
      for (auto& v : views) shuffle_clip_frames(v, vr);
    }
    const int64_t vh = views.front().extent(2), vw = views.front().extent(3);
    Tensor<float> batch({static_cast<int64_t>(views.size()), 3, model.cfg.frames, vh, vw});
    const int64_t clip_elems = views.front().numel();
    for (size_t v = 0; v < views.size(); ++v) {
      std::copy(views[v].data(), views[v].data() + clip_elems,
                batch.data() + static_cast<int64_t>(v) * clip_elems);
    }
    Tensor<float> logits = model.forward_videos(batch);

    // averaged softmax scores, fixed view order
    std::vector<double> score(static_cast<size_t>(k), 0.0);
    std::vector<float> probs(static_cast<size_t>(k));
    for (size_t v = 0; v < views.size(); ++v) {
      ops::softmax_row(logits.data() + static_cast<int64_t>(v) * k, probs.data(), k);
      for (int j = 0; j < k; ++j) score[static_cast<size_t>(j)] += probs[static_cast<size_t>(j)];
    }
    for (int j = 0; j < k; ++j) score[static_cast<size_t>(j)] /= static_cast<double>(views.size());

    int pred = 0;
    for (int j = 1; j < k; ++j) {
      if (score[static_cast<size_t>(j)] > score[static_cast<size_t>(pred)]) pred = j;
    }
    int rank = 0;  // classes strictly better, ties to the lower index
    for (int j = 0; j < k; ++j) {
      if (j == rec.label) continue;
      if (score[static_cast<size_t>(j)] > score[static_cast<size_t>(rec.label)] ||
          (score[static_cast<size_t>(j)] == score[static_cast<size_t>(rec.label)] &&
           j < rec.label)) {
        ++rank;
      }
    }
    ++res.total;
    ++res.per_class_count[static_cast<size_t>(rec.label)];
    if (pred == rec.label) {
      res.top1 += 1;
      res.per_class_acc[static_cast<size_t>(rec.label)] += 1;
    }
    if (rank < 5) res.top5 += 1;
  }
  if (res.total > 0) {
    res.top1 /= res.total;
    res.top5 /= res.total;
    for (int j = 0; j < k; ++j) {
      if (res.per_class_count[static_cast<size_t>(j)] > 0) {
        res.per_class_acc[static_cast<size_t>(j)] /= res.per_class_count[static_cast<size_t>(j)];
      }
    }
  }
  return res;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("history: cannot open '" + path + "' for writing");
  os << "epoch,lr,loss,top1\n";
  char buf[128];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g\n", e.epoch, e.lr, e.loss, e.top1);
    os << buf;
  }
  if (!os) throw std::runtime_error("history: write failed for '" + path + "'");
}

}  // namespace sqzt
