#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sqzt/analysis.hpp"
#include "sqzt/config.hpp"
#include "sqzt/tape.hpp"
#include "sqzt/tensor.hpp"

namespace sqzt {

// ---------------------------------------------------------------------------
// reshape operations around the network

/// (3,T,h,w) -> (3T,h,w) or (n,3,T,h,w) -> (n,3T,h,w). Pure reshape,
/// channel-major ordering: output channel = color*T + t.
template <typename T>
Tensor<T> squeeze_time(const Tensor<T>& video) {
  const bool batched = video.rank() == 5;
  if (!batched && video.rank() != 4) {
    throw std::invalid_argument("squeeze_time: input must be (3,T,h,w) or (n,3,T,h,w), got " +
                                video.shape_str());
  }
  const int64_t colors = video.extent(batched ? 1 : 0);
  if (colors != 3) {
    throw std::invalid_argument("squeeze_time: leading extent must be 3 color channels, got " +
                                std::to_string(colors));
  }
  const int64_t t = video.extent(batched ? 2 : 1);
  const int64_t h = video.extent(batched ? 3 : 2);
  const int64_t w = video.extent(batched ? 4 : 3);
  if (batched) return video.reshaped({video.extent(0), 3 * t, h, w});
  return video.reshaped({3 * t, h, w});
}

template <typename T>
Tensor<T> unsqueeze_time(const Tensor<T>& squeezed, int64_t t) {
  const bool batched = squeezed.rank() == 4;
  if (!batched && squeezed.rank() != 3) {
    throw std::invalid_argument("unsqueeze_time: input must be rank 3 or 4");
  }
  const int64_t c = squeezed.extent(batched ? 1 : 0);
  if (c != 3 * t) {
    throw std::invalid_argument("unsqueeze_time: channel count " + std::to_string(c) +
                                " != 3*T with T=" + std::to_string(t));
  }
  const int64_t h = squeezed.extent(batched ? 2 : 1);
  const int64_t w = squeezed.extent(batched ? 3 : 2);
  if (batched) return squeezed.reshaped({squeezed.extent(0), 3, t, h, w});
  return squeezed.reshaped({3, t, h, w});
}

/// (C,Fh,Fw) -> (C/T, T, Fh, Fw); channel c maps to (c/T, c mod T),
/// consistent with the squeeze ordering.
template <typename T>
Tensor<T> detection_reshape(const Tensor<T>& feature, int64_t t) {
  if (feature.rank() != 3) {
    throw std::invalid_argument("detection_reshape: input must be (C,Fh,Fw), got " +
                                feature.shape_str());
  }
  const int64_t c = feature.extent(0);
  if (t < 1 || c % t != 0) {
    throw std::invalid_argument("detection_reshape: channel count " + std::to_string(c) +
                                " not divisible by T=" + std::to_string(t));
  }
  return feature.reshaped({c / t, t, feature.extent(1), feature.extent(2)});
}

template <typename T>
Tensor<T> detection_reshape_inverse(const Tensor<T>& feature) {
  if (feature.rank() != 4) {
    throw std::invalid_argument("detection_reshape_inverse: input must be rank 4");
  }
  return feature.reshaped(
      {feature.extent(0) * feature.extent(1), feature.extent(2), feature.extent(3)});
}

enum class WindowMode { exact, cover };

/// Start indices of sliding windows. cover mode appends one tail window
/// ending at n_frames when uncovered frames remain.
inline std::vector<int> sliding_window_clips(int n_frames, int window, int stride,
                                             WindowMode mode) {
  if (window < 1 || window > n_frames) {
    throw std::invalid_argument("sliding_window_clips: window " + std::to_string(window) +
                                " exceeds frame count " + std::to_string(n_frames));
  }
  if (stride < 1) throw std::invalid_argument("sliding_window_clips: stride must be >= 1");
  std::vector<int> starts;
  for (int s = 0; s + window <= n_frames; s += stride) starts.push_back(s);
  if (mode == WindowMode::cover) {
    const int tail = n_frames - window;
    if (starts.empty() || starts.back() + window < n_frames) {
      starts.push_back(tail);
    }
  }
  return starts;
}

// ---------------------------------------------------------------------------
// parameter bookkeeping

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor = nullptr;
  bool decay = false;  // weight decay applies to conv/linear weights only
};

/// Per-forward-pass binding of parameter tensors to tape leaves.
template <typename T>
struct ParamVars {
  std::unordered_map<const Tensor<T>*, Var<T>> map;

  Var<T> bind(Tape<T>& t, const Tensor<T>* p) {
    auto it = map.find(p);
    if (it != map.end()) return it->second;
    Var<T> v = t.leaf(p);
    map.emplace(p, v);
    return v;
  }

  Var<T> at(const Tensor<T>* p) const {
    auto it = map.find(p);
    if (it == map.end()) throw std::logic_error("ParamVars: tensor was not bound this pass");
    return it->second;
  }
};

inline int64_t conv_out_extent(int64_t in, int64_t k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// layers

template <typename T>
struct ConvLayer {
  int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
  Tensor<T> w;

  ConvLayer() = default;
  ConvLayer(int ci, int co, int kk, int s, int p)
      : cin(ci), cout(co), k(kk), stride(s), pad(p),
        w(std::vector<int64_t>{co, ci, kk, kk}) {}

  void init(Rng& rng) { rng.fill_normal(w, std::sqrt(2.0 / (cin * k * k))); }

  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x) const {
    return t.conv2d(x, pv.bind(t, &w), std::nullopt, stride, pad);
  }

  int64_t macs(int64_t oh, int64_t ow) const {
    return static_cast<int64_t>(cout) * cin * k * k * oh * ow;
  }
};

template <typename T>
struct BnLayer {
  Tensor<T> gamma, beta, running_mean, running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);

  BnLayer() = default;
  explicit BnLayer(int64_t c)
      : gamma(Tensor<T>::full({c}, T(1))),
        beta(Tensor<T>({c})),
        running_mean(Tensor<T>({c})),
        running_var(Tensor<T>::full({c}, T(1))) {}

  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x, bool train) {
    return t.batchnorm(x, pv.bind(t, &gamma), pv.bind(t, &beta), running_mean, running_var, eps,
                       momentum, train);
  }
};

/// Weight computation module: sigmoid(W2 relu(W1 gmax(x) + b1) + b2), one
/// weight per channel in (0,1).
template <typename T>
struct WcmLayer {
  int c = 0, hidden = 0;
  Tensor<T> w1, b1, w2, b2;

  WcmLayer() = default;
  WcmLayer(int channels, int hidden_width)
      : c(channels), hidden(hidden_width),
        w1(std::vector<int64_t>{hidden_width, channels}),
        b1(std::vector<int64_t>{hidden_width}),
        w2(std::vector<int64_t>{channels, hidden_width}),
        b2(std::vector<int64_t>{channels}) {}

  void init(Rng& rng) {
    rng.fill_normal(w1, std::sqrt(2.0 / c));
    rng.fill_normal(w2, std::sqrt(2.0 / hidden));
  }

  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x) const {
    Var<T> pooled = t.global_pool(x, ops::PoolKind::global_max);
    Var<T> h = t.relu(t.linear(pooled, pv.bind(t, &w1), pv.bind(t, &b1)));
    return t.sigmoid(t.linear(h, pv.bind(t, &w2), pv.bind(t, &b2)));
  }
};

enum class CtlVariant { full, base, branch1, branch2 };

inline CtlVariant ctl_variant_from(const std::string& s) {
  if (s == "full") return CtlVariant::full;
  if (s == "base") return CtlVariant::base;
  if (s == "branch1") return CtlVariant::branch1;
  if (s == "branch2") return CtlVariant::branch2;
  throw std::invalid_argument("unknown CTL variant '" + s + "'");
}

/// Channel-Time Learning module (channel-preserving, width c).
/// branch1: 1x1 temporal focus conv. branch2 (IOI): sigmoid gate built from a
/// 3x3 TFC down to the temporal width, positional encoding, a 7x7 relation
/// conv and a 3x3 conv back to c, multiplied into a direct 3x3 mapping.
/// Both TFCs share one WCM. The base variant is a bare 3x3 conv.
template <typename T>
struct CtlModule {
  CtlVariant variant = CtlVariant::full;
  int c = 0, tw = 0;

  WcmLayer<T> wcm;
  ConvLayer<T> tfc1;      // 1x1 c->c
  ConvLayer<T> gate_c2t;  // 3x3 c->tw (TFC)
  BnLayer<T> gate_bn1;
  Tensor<T> pos;  // (tw,1,1), zero-initialized
  ConvLayer<T> gate_t2t;  // 7x7 tw->tw
  BnLayer<T> gate_bn2;
  ConvLayer<T> gate_t2c;  // 3x3 tw->c
  ConvLayer<T> value_conv;  // 3x3 c->c
  BnLayer<T> value_bn;

  CtlModule() = default;
  CtlModule(int channels, int temporal_width, int wcm_hidden, CtlVariant v)
      : variant(v), c(channels), tw(temporal_width) {
    if (variant == CtlVariant::base) {
      value_conv = ConvLayer<T>(c, c, 3, 1, 1);
      return;
    }
    wcm = WcmLayer<T>(c, wcm_hidden);
    if (has_branch1()) tfc1 = ConvLayer<T>(c, c, 1, 1, 0);
    if (has_branch2()) {
      gate_c2t = ConvLayer<T>(c, tw, 3, 1, 1);
      gate_bn1 = BnLayer<T>(tw);
      pos = Tensor<T>({tw, 1, 1});
      gate_t2t = ConvLayer<T>(tw, tw, 7, 1, 3);
      gate_bn2 = BnLayer<T>(tw);
      gate_t2c = ConvLayer<T>(tw, c, 3, 1, 1);
      value_conv = ConvLayer<T>(c, c, 3, 1, 1);
      value_bn = BnLayer<T>(c);
    }
  }

  bool has_branch1() const {
    return variant == CtlVariant::full || variant == CtlVariant::branch1;
  }
  bool has_branch2() const {
    return variant == CtlVariant::full || variant == CtlVariant::branch2;
  }

  void init(Rng& rng) {
    if (variant == CtlVariant::base) {
      value_conv.init(rng);
      return;
    }
    wcm.init(rng);
    if (has_branch1()) tfc1.init(rng);
    if (has_branch2()) {
      gate_c2t.init(rng);
      gate_t2t.init(rng);
      gate_t2c.init(rng);
      value_conv.init(rng);
    }
  }

  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x, bool train) {
    if (variant == CtlVariant::base) return value_conv.forward(t, pv, x);

    const Tensor<T>& xv = t.value(x);
    const int64_t n = xv.rank() == 4 ? xv.extent(0) : 1;
    Var<T> weights = wcm.forward(t, pv, x);  // (n,c)
    Var<T> wr = t.reshape(weights, xv.rank() == 4
                                       ? std::vector<int64_t>{n, c, 1, 1}
                                       : std::vector<int64_t>{c, 1, 1});
    Var<T> scaled = t.mul(x, wr);  // shared TFC input scaling

    std::optional<Var<T>> out;
    if (has_branch1()) out = tfc1.forward(t, pv, scaled);
    if (has_branch2()) {
      Var<T> q = t.relu(gate_bn1.forward(t, pv, gate_c2t.forward(t, pv, scaled), train));
      q = t.add(q, pv.bind(t, &pos));
      q = t.relu(gate_bn2.forward(t, pv, gate_t2t.forward(t, pv, q), train));
      Var<T> gate = t.sigmoid(gate_t2c.forward(t, pv, q));
      Var<T> value = t.relu(value_bn.forward(t, pv, value_conv.forward(t, pv, x), train));
      Var<T> gated = t.mul(gate, value);
      out = out ? t.add(*out, gated) : gated;
    }
    return *out;
  }
};

/// Bottleneck block: 1x1 down to c, CTL module, 1x1 back up, identity
/// shortcut; stage-entry blocks insert a 2x2 stride-2 conv after the first
/// 1x1 and use an avgpool + channel zero-pad shortcut.
template <typename T>
struct CtlBlock {
  bool down = false;
  int cin = 0, cout = 0, cmid = 0;
  ConvLayer<T> conv1;
  BnLayer<T> bn1;
  ConvLayer<T> ds;
  BnLayer<T> bn_ds;
  CtlModule<T> mid;
  BnLayer<T> bn_mid;
  ConvLayer<T> conv2;
  BnLayer<T> bn2;

  CtlBlock() = default;
  CtlBlock(int in_ch, int out_ch, int mid_ch, int temporal_width, int wcm_hidden, CtlVariant v,
           bool downsample)
      : down(downsample), cin(in_ch), cout(out_ch), cmid(mid_ch) {
    conv1 = ConvLayer<T>(cin, cmid, 1, 1, 0);
    bn1 = BnLayer<T>(cmid);
    if (down) {
      ds = ConvLayer<T>(cmid, cmid, 2, 2, 0);
      bn_ds = BnLayer<T>(cmid);
    } else if (cin != cout) {
      throw std::invalid_argument("ctl_block: channel-preserving block requires c_in == c_out");
    }
    mid = CtlModule<T>(cmid, temporal_width, wcm_hidden, v);
    bn_mid = BnLayer<T>(cmid);
    conv2 = ConvLayer<T>(cmid, cout, 1, 1, 0);
    bn2 = BnLayer<T>(cout);
  }

  void init(Rng& rng) {
    conv1.init(rng);
    if (down) ds.init(rng);
    mid.init(rng);
    conv2.init(rng);
  }

  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x, bool train) {
    Var<T> m = t.relu(bn1.forward(t, pv, conv1.forward(t, pv, x), train));
    if (down) m = t.relu(bn_ds.forward(t, pv, ds.forward(t, pv, m), train));
    m = t.relu(bn_mid.forward(t, pv, mid.forward(t, pv, m, train), train));
    m = bn2.forward(t, pv, conv2.forward(t, pv, m), train);
    Var<T> shortcut = x;
    if (down) {
      shortcut = t.avgpool2x2(x);
      if (cout > cin) shortcut = t.pad_channels(shortcut, cout);
    }
    return t.add(m, shortcut);
  }
};

// ---------------------------------------------------------------------------
// the network

template <typename T>
class SqueezeTimeModel {
 public:
  ModelConfig cfg;
  uint64_t seed = 0;
  ConvLayer<T> stem;
  BnLayer<T> stem_bn;
  std::vector<std::vector<CtlBlock<T>>> stages;
  Tensor<T> head_w, head_b;
  bool training = false;

  /// Deterministic construction: identical seeds give bit-identical initial
  /// parameters. init=false leaves parameters zeroed (cost analysis only).
  static SqueezeTimeModel build(const ModelConfig& config, uint64_t seed, bool init = true) {
    config.validate();
    validate_resolution(config);
    SqueezeTimeModel m;
    m.cfg = config;
    m.seed = seed;
    const CtlVariant variant = ctl_variant_from(config.variant);
    const int in_ch = 3 * config.frames;
    m.stem = ConvLayer<T>(in_ch, config.scaled_stem(), 5, 2, 2);
    m.stem_bn = BnLayer<T>(config.scaled_stem());
    int prev = config.scaled_stem();
    for (int s = 0; s < 4; ++s) {
      const int ch = config.scaled_channels(s);
      const int mid = config.bottleneck(s);
      const int wcm_hidden =
          std::max(1, ModelConfig::round_min1(config.wcm_hidden_ratio * mid));
      std::vector<CtlBlock<T>> blocks;
      blocks.emplace_back(prev, ch, mid, config.ioi_temporal, wcm_hidden, variant, true);
      for (int b = 1; b < config.stage_blocks[static_cast<size_t>(s)]; ++b) {
        blocks.emplace_back(ch, ch, mid, config.ioi_temporal, wcm_hidden, variant, false);
      }
      m.stages.push_back(std::move(blocks));
      prev = ch;
    }
    m.head_w = Tensor<T>({config.num_classes, prev});
    m.head_b = Tensor<T>({static_cast<int64_t>(config.num_classes)});
    if (init) {
      Rng rng(seed);
      m.stem.init(rng);
      for (auto& stage : m.stages) {
        for (auto& blk : stage) blk.init(rng);
      }
      rng.fill_normal(m.head_w, std::sqrt(2.0 / prev));
    }
    return m;
  }

  /// Spatial ladder: stem /2 then one /2 per stage; every stage entry needs
  /// an extent of at least 2.
  static void validate_resolution(const ModelConfig& config) {
    int64_t h = conv_out_extent(config.input_h, 5, 2, 2);
    int64_t w = conv_out_extent(config.input_w, 5, 2, 2);
    for (int s = 0; s < 4; ++s) {
      if (h < 2 || w < 2) {
        throw std::invalid_argument(
            "model: input resolution " + std::to_string(config.input_h) + "x" +
            std::to_string(config.input_w) + " does not survive the /32 downsampling ladder (" +
            std::to_string(h) + "x" + std::to_string(w) + " entering stage " +
            std::to_string(s + 1) + ")");
      }
      h = conv_out_extent(h, 2, 2, 0);
      w = conv_out_extent(w, 2, 2, 0);
    }
  }

  /// Squeezed batch (n,3T,h,w) -> logits (n,num_classes).
  Var<T> forward(Tape<T>& t, ParamVars<T>& pv, Var<T> x) {
    const Tensor<T>& xv = t.value(x);
    if (xv.rank() != 4 || xv.extent(1) != 3 * cfg.frames) {
      throw std::invalid_argument("forward: expected squeezed batch (n," +
                                  std::to_string(3 * cfg.frames) + ",h,w), got " +
                                  xv.shape_str());
    }
    Var<T> h = t.relu(stem_bn.forward(t, pv, stem.forward(t, pv, x), training));
    for (auto& stage : stages) {
      for (auto& blk : stage) h = blk.forward(t, pv, h, training);
    }
    Var<T> pooled = t.global_pool(h, ops::PoolKind::global_avg);
    return t.linear(pooled, pv.bind(t, &head_w), pv.bind(t, &head_b));
  }

  /// Convenience inference: (n,3,T,h,w) or (3,T,h,w) video batch -> logits.
  /// In infer mode this is read-only and safe to call concurrently.
  Tensor<T> forward_videos(const Tensor<T>& videos) {
    Tensor<T> squeezed = squeeze_time(videos);
    if (squeezed.rank() == 3) {
      squeezed = squeezed.reshaped(
          {1, squeezed.extent(0), squeezed.extent(1), squeezed.extent(2)});
    }
    Tape<T> tape;
    ParamVars<T> pv;
    Var<T> logits = forward(tape, pv, tape.leaf(std::move(squeezed)));
    return tape.value(logits);
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    collect(&out, nullptr);
    return out;
  }

  /// Batchnorm running statistics: state, not parameters.
  std::vector<ParamRef<T>> state() {
    std::vector<ParamRef<T>> out;
    collect(nullptr, &out);
    return out;
  }

  /// Cost-model rows for a single clip (defaults to the configured resolution).
  std::vector<LayerCost> describe(int64_t in_h = 0, int64_t in_w = 0) const {
    std::vector<LayerCost> rows;
    if (in_h <= 0) in_h = cfg.input_h;
    if (in_w <= 0) in_w = cfg.input_w;
    int64_t h = conv_out_extent(in_h, 5, 2, 2);
    int64_t w = conv_out_extent(in_w, 5, 2, 2);
    conv_row(rows, "stem.conv", stem, h, w);
    bn_act_rows(rows, "stem.bn", stem.cout, h * w, true);
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        const CtlBlock<T>& blk = stages[s][b];
        const std::string p = "s" + std::to_string(s + 1) + ".b" + std::to_string(b);
        conv_row(rows, p + ".conv1", blk.conv1, h, w);
        bn_act_rows(rows, p + ".bn1", blk.cmid, h * w, true);
        if (blk.down) {
          h = conv_out_extent(h, 2, 2, 0);
          w = conv_out_extent(w, 2, 2, 0);
          conv_row(rows, p + ".ds", blk.ds, h, w);
          bn_act_rows(rows, p + ".bn_ds", blk.cmid, h * w, true);
        }
        module_rows(rows, p + ".ctl", blk.mid, h, w);
        bn_act_rows(rows, p + ".bn_mid", blk.cmid, h * w, true);
        conv_row(rows, p + ".conv2", blk.conv2, h, w);
        bn_act_rows(rows, p + ".bn2", blk.cout, h * w, false);
        rows.push_back({p + ".add", "eltwise", 0, blk.cout * h * w, {blk.cout, h, w}});
      }
    }
    const int64_t c_last = stages.back().back().cout;
    rows.push_back({"head.pool", "pool", 0, c_last * h * w, {c_last}});
    rows.push_back({"head.fc", "linear", head_w.numel() + head_b.numel(),
                    head_w.numel(), {static_cast<int64_t>(cfg.num_classes)}});
    return rows;
  }

 private:
  static void conv_row(std::vector<LayerCost>& rows, const std::string& name,
                       const ConvLayer<T>& c, int64_t oh, int64_t ow) {
    rows.push_back({name, "conv", c.w.numel(), c.macs(oh, ow), {c.cout, oh, ow}});
  }

  static void bn_act_rows(std::vector<LayerCost>& rows, const std::string& name, int64_t c,
                          int64_t plane, bool with_relu) {
    rows.push_back({name, "bn", 2 * c, c * plane, {c}});
    if (with_relu) rows.push_back({name + ".relu", "act", 0, c * plane, {c}});
  }

  static void module_rows(std::vector<LayerCost>& rows, const std::string& p,
                          const CtlModule<T>& m, int64_t h, int64_t w) {
    const int64_t plane = h * w;
    if (m.variant == CtlVariant::base) {
      conv_row(rows, p + ".conv3x3", m.value_conv, h, w);
      return;
    }
    rows.push_back({p + ".wcm.pool", "pool", 0, m.c * plane, {m.c}});
    rows.push_back({p + ".wcm.fc1", "linear", m.wcm.w1.numel() + m.wcm.b1.numel(),
                    m.wcm.w1.numel(), {m.wcm.hidden}});
    rows.push_back({p + ".wcm.fc2", "linear", m.wcm.w2.numel() + m.wcm.b2.numel(),
                    m.wcm.w2.numel(), {m.c}});
    rows.push_back({p + ".wcm.scale", "eltwise", 0, m.c * plane, {m.c, h, w}});
    if (m.has_branch1()) conv_row(rows, p + ".tfc1", m.tfc1, h, w);
    if (m.has_branch2()) {
      conv_row(rows, p + ".gate.c2t", m.gate_c2t, h, w);
      bn_act_rows(rows, p + ".gate.bn1", m.tw, plane, true);
      rows.push_back({p + ".gate.pos", "eltwise", m.tw, m.tw * plane, {m.tw, h, w}});
      conv_row(rows, p + ".gate.t2t", m.gate_t2t, h, w);
      bn_act_rows(rows, p + ".gate.bn2", m.tw, plane, true);
      conv_row(rows, p + ".gate.t2c", m.gate_t2c, h, w);
      rows.push_back({p + ".gate.sigmoid", "act", 0, m.c * plane, {m.c, h, w}});
      conv_row(rows, p + ".value", m.value_conv, h, w);
      bn_act_rows(rows, p + ".value.bn", m.c, plane, true);
      rows.push_back({p + ".gate.mul", "eltwise", 0, m.c * plane, {m.c, h, w}});
    }
    if (m.has_branch1() && m.has_branch2()) {
      rows.push_back({p + ".branch_sum", "eltwise", 0, m.c * plane, {m.c, h, w}});
    }
  }

  void add_param(std::vector<ParamRef<T>>* out, const std::string& name, Tensor<T>& t,
                 bool decay) {
    if (out != nullptr) out->push_back({name, &t, decay});
  }

  void collect_bn(std::vector<ParamRef<T>>* params_out, std::vector<ParamRef<T>>* state_out,
                  const std::string& name, BnLayer<T>& bn) {
    add_param(params_out, name + ".gamma", bn.gamma, false);
    add_param(params_out, name + ".beta", bn.beta, false);
    add_param(state_out, name + ".running_mean", bn.running_mean, false);
    add_param(state_out, name + ".running_var", bn.running_var, false);
  }

  void collect(std::vector<ParamRef<T>>* params_out, std::vector<ParamRef<T>>* state_out) {
    add_param(params_out, "stem.conv.w", stem.w, true);
    collect_bn(params_out, state_out, "stem.bn", stem_bn);
    for (size_t s = 0; s < stages.size(); ++s) {
      for (size_t b = 0; b < stages[s].size(); ++b) {
        CtlBlock<T>& blk = stages[s][b];
        const std::string p = "s" + std::to_string(s + 1) + ".b" + std::to_string(b);
        add_param(params_out, p + ".conv1.w", blk.conv1.w, true);
        collect_bn(params_out, state_out, p + ".bn1", blk.bn1);
        if (blk.down) {
          add_param(params_out, p + ".ds.w", blk.ds.w, true);
          collect_bn(params_out, state_out, p + ".bn_ds", blk.bn_ds);
        }
        CtlModule<T>& m = blk.mid;
        if (m.variant != CtlVariant::base) {
          add_param(params_out, p + ".ctl.wcm.w1", m.wcm.w1, true);
          add_param(params_out, p + ".ctl.wcm.b1", m.wcm.b1, false);
          add_param(params_out, p + ".ctl.wcm.w2", m.wcm.w2, true);
          add_param(params_out, p + ".ctl.wcm.b2", m.wcm.b2, false);
        }
        if (m.has_branch1()) add_param(params_out, p + ".ctl.tfc1.w", m.tfc1.w, true);
        if (m.has_branch2()) {
          add_param(params_out, p + ".ctl.gate.c2t.w", m.gate_c2t.w, true);
          collect_bn(params_out, state_out, p + ".ctl.gate.bn1", m.gate_bn1);
          add_param(params_out, p + ".ctl.pos", m.pos, false);
          add_param(params_out, p + ".ctl.gate.t2t.w", m.gate_t2t.w, true);
          collect_bn(params_out, state_out, p + ".ctl.gate.bn2", m.gate_bn2);
          add_param(params_out, p + ".ctl.gate.t2c.w", m.gate_t2c.w, true);
        }
        if (m.variant == CtlVariant::base || m.has_branch2()) {
          add_param(params_out, p + ".ctl.value.w", m.value_conv.w, true);
        }
        if (m.has_branch2()) {
          collect_bn(params_out, state_out, p + ".ctl.value.bn", m.value_bn);
        }
        collect_bn(params_out, state_out, p + ".bn_mid", blk.bn_mid);
        add_param(params_out, p + ".conv2.w", blk.conv2.w, true);
        collect_bn(params_out, state_out, p + ".bn2", blk.bn2);
      }
    }
    add_param(params_out, "head.fc.w", head_w, true);
    add_param(params_out, "head.fc.b", head_b, false);
  }
};

using ModelF = SqueezeTimeModel<float>;
using ModelD = SqueezeTimeModel<double>;

/// Exact integer parameter counts per named tensor (running stats excluded).
template <typename T>
CostReport count_params(const SqueezeTimeModel<T>& m) {
  return make_report(m.describe());
}

/// Per-layer FLOPs for one clip at the given input resolution.
template <typename T>
CostReport count_flops(const SqueezeTimeModel<T>& m, int64_t in_h = 0, int64_t in_w = 0) {
  return make_report(m.describe(in_h, in_w));
}

/// Cost report straight from a config (parameters left uninitialized).
inline CostReport count_config(const ModelConfig& cfg) {
  ModelF m = ModelF::build(cfg, 0, /*init=*/false);
  return make_report(m.describe());
}

}  // namespace sqzt
