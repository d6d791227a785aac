#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqzt {

/// Architecture hyperparameters. `ioi_temporal` is the internal temporal
/// width of the IOI gate (bottleneck of the channels->T compression and the
/// length of the positional encoding). It defaults to 16 and does not follow
/// `frames`: varying the clip length only changes the stem input channels,
/// everything behind the stem is unchanged.
struct ModelConfig {
  int frames = 16;
  int input_h = 224;
  int input_w = 224;
  double channel_factor = 1.0;
  std::array<int, 4> stage_blocks = {3, 4, 6, 3};
  std::array<int, 4> stage_channels = {256, 512, 1024, 2048};
  double reduction = 0.25;
  int num_classes = 400;
  int stem_channels = 64;
  int ioi_temporal = 16;
  double wcm_hidden_ratio = 1.0;
  std::string variant = "full";  // full | base | branch1 | branch2

  static int round_min1(double v) {
    const int r = static_cast<int>(std::llround(v));
    return r < 1 ? 1 : r;
  }

  int scaled_stem() const { return round_min1(channel_factor * stem_channels); }
  int scaled_channels(int stage) const {
    return round_min1(channel_factor * stage_channels[static_cast<size_t>(stage)]);
  }
  int bottleneck(int stage) const { return round_min1(reduction * scaled_channels(stage)); }

  void validate() const {
    if (frames < 1) throw std::invalid_argument("model.frames must be >= 1");
    if (input_h < 1 || input_w < 1) throw std::invalid_argument("model resolution must be >= 1");
    if (channel_factor <= 0) throw std::invalid_argument("model.channel_factor must be > 0");
    if (reduction <= 0) throw std::invalid_argument("model.reduction must be > 0");
    if (num_classes < 1) throw std::invalid_argument("model.num_classes must be >= 1");
    if (stem_channels < 1) throw std::invalid_argument("model.stem_channels must be >= 1");
    if (ioi_temporal < 1) throw std::invalid_argument("model.ioi_temporal must be >= 1");
    if (wcm_hidden_ratio <= 0) throw std::invalid_argument("model.wcm_hidden_ratio must be > 0");
    for (int b : stage_blocks) {
      if (b < 1) throw std::invalid_argument("model.stage_blocks entries must be >= 1");
    }
    for (int c : stage_channels) {
      if (c < 1) throw std::invalid_argument("model.stage_channels entries must be >= 1");
    }
    if (variant != "full" && variant != "base" && variant != "branch1" && variant != "branch2") {
      throw std::invalid_argument("model.variant must be full|base|branch1|branch2, got '" +
                                  variant + "'");
    }
  }
};

struct TrainConfig {
  double lr0 = 0.015;
  int warmup_epochs = 8;
  int total_epochs = 30;  // paper uses 100 at batch 512; desk default is toy scale
  double weight_decay = 7e-5;
  double momentum = 0.9;
  int batch_size = 32;
  uint64_t seed = 3;
  int interval = 4;  // dense sampling frame interval
  int checkpoint_every = 0;
  bool flip_augment = true;
  bool temporal_offset_augment = true;
  bool shuffle_frames = false;  // control arm: destroy clip ordering

  void validate() const {
    if (lr0 <= 0) throw std::invalid_argument("train.lr0 must be > 0");
    if (warmup_epochs < 0 || warmup_epochs >= std::max(total_epochs, 1)) {
      throw std::invalid_argument("train: require 0 <= warmup_epochs < total_epochs");
    }
    if (total_epochs < 0) throw std::invalid_argument("train.total_epochs must be >= 0");
    if (batch_size < 2) throw std::invalid_argument("train.batch_size must be >= 2 (batchnorm)");
    if (interval < 1) throw std::invalid_argument("train.interval must be >= 1");
  }
};

struct EvalConfig {
  int n_clips = 10;
  int n_crops = 3;
  int crop_h = 0;  // 0 = full frame
  int crop_w = 0;
  bool shuffle_frames = false;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
};

/// Flat UTF-8 key/value config ("model.frames=16"); '#' starts a comment.
/// Unknown keys are rejected with a diagnostic naming the key.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::string& path);
void apply_config_kv(Config& cfg, const std::string& key, const std::string& value);
std::string serialize_config(const Config& cfg);

}  // namespace sqzt
