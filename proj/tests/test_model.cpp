#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sqzt/gradcheck.hpp"
#include "sqzt/model.hpp"

using namespace sqzt;

namespace {

ModelConfig toy_config() {
  ModelConfig c;
  c.frames = 4;
  c.input_h = c.input_w = 32;
  c.stage_blocks = {1, 1, 1, 1};
  c.stage_channels = {8, 16, 32, 64};
  c.stem_channels = 8;
  c.num_classes = 5;
  c.ioi_temporal = 4;
  return c;
}

TensorF random_video(Rng& rng, int t, int res) {
  TensorF v({3, t, res, res});
  rng.fill_uniform(v, 0.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("squeeze_time: shapes, ordering, roundtrip") {
  TensorF big({3, 16, 224, 224});
  TensorF sq = squeeze_time(big);
  CHECK(sq.shape() == std::vector<int64_t>{48, 224, 224});

  // color 0 frames valued 1,2 at 1x1: channel index = color*T + t
  TensorF v({3, 2, 1, 1});
  v.at({0, 0, 0, 0}) = 1.0f;
  v.at({0, 1, 0, 0}) = 2.0f;
  TensorF s = squeeze_time(v);
  CHECK(s.shape() == std::vector<int64_t>{6, 1, 1});
  CHECK(s[0] == 1.0f);
  CHECK(s[1] == 2.0f);
  for (int64_t i = 2; i < 6; ++i) CHECK(s[i] == 0.0f);

  Rng rng(4);
  TensorF x = random_video(rng, 4, 6);
  TensorF back = unsqueeze_time(squeeze_time(x), 4);
  REQUIRE(back.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) REQUIRE(back[i] == x[i]);

  TensorF wrong({2, 4, 6, 6});
  CHECK_THROWS_WITH_AS(squeeze_time(wrong), doctest::Contains("3 color channels"),
                       std::invalid_argument);
}

TEST_CASE("detection_reshape: mapping and roundtrip") {
  TensorF f({2048, 7, 7});
  TensorF r = detection_reshape(f, 16);
  CHECK(r.shape() == std::vector<int64_t>{128, 16, 7, 7});

  TensorF small({4, 1, 1}, {10.f, 20.f, 30.f, 40.f});
  TensorF rs = detection_reshape(small, 2);
  CHECK(rs.shape() == std::vector<int64_t>{2, 2, 1, 1});
  CHECK(rs.at({0, 0, 0, 0}) == 10.f);
  CHECK(rs.at({0, 1, 0, 0}) == 20.f);
  CHECK(rs.at({1, 0, 0, 0}) == 30.f);
  CHECK(rs.at({1, 1, 0, 0}) == 40.f);

  TensorF inv = detection_reshape_inverse(rs);
  for (int64_t i = 0; i < 4; ++i) REQUIRE(inv[i] == small[i]);

  CHECK_THROWS_WITH_AS(detection_reshape(small, 3), doctest::Contains("not divisible"),
                       std::invalid_argument);
}

TEST_CASE("sliding_window_clips") {
  CHECK(sliding_window_clips(24, 16, 8, WindowMode::exact) == std::vector<int>{0, 8});
  CHECK(sliding_window_clips(16, 16, 8, WindowMode::exact) == std::vector<int>{0});
  // paper quotes 32 clips from 256 frames at window 16 stride 8; the
  // arithmetic gives 31, and the tail is already covered
  CHECK(sliding_window_clips(256, 16, 8, WindowMode::exact).size() == 31);
  CHECK(sliding_window_clips(256, 16, 8, WindowMode::cover).size() == 31);
  CHECK(sliding_window_clips(20, 16, 8, WindowMode::exact) == std::vector<int>{0});
  CHECK(sliding_window_clips(20, 16, 8, WindowMode::cover) == std::vector<int>{0, 4});
  CHECK_THROWS_AS(sliding_window_clips(8, 16, 8, WindowMode::exact), std::invalid_argument);
}

TEST_CASE("ctl module: zero parameters give zero output") {
  CtlModule<float> m(4, 4, 4, CtlVariant::full);  // default tensors: convs 0, bn affine (1,0)
  Rng rng(8);
  TensorF x({1, 4, 6, 6});
  rng.fill_uniform(x, -1.0, 1.0);
  Tape<float> t;
  ParamVars<float> pv;
  Var<float> out = m.forward(t, pv, t.leaf(x), /*train=*/false);
  const TensorF& ov = t.value(out);
  for (int64_t i = 0; i < ov.numel(); ++i) REQUIRE(ov[i] == 0.0f);
}

TEST_CASE("ioi branch: zero gate parameters halve the value path") {
  // branch2 only; gate convs zero => gate = sigmoid(0) = 0.5 everywhere
  CtlModule<float> m(4, 4, 4, CtlVariant::branch2);
  Rng rng(9);
  m.value_conv.init(rng);
  TensorF x({1, 4, 6, 6});
  rng.fill_uniform(x, -1.0, 1.0);

  Tape<float> t;
  ParamVars<float> pv;
  Var<float> out = m.forward(t, pv, t.leaf(x), false);
  const TensorF& got = t.value(out);

  TensorF conv = ops::conv2d(x, m.value_conv.w, nullptr, 1, 1);
  TensorF bn = ops::bn_infer(conv, m.value_bn.gamma, m.value_bn.beta, m.value_bn.running_mean,
                             m.value_bn.running_var, 1e-5f);
  TensorF value = ops::relu(bn);
  REQUIRE(got.numel() == value.numel());
  for (int64_t i = 0; i < got.numel(); ++i) {
    REQUIRE(got[i] == doctest::Approx(0.5f * value[i]).epsilon(1e-6));
    REQUIRE(std::fabs(got[i]) <= std::fabs(value[i]) + 1e-7f);  // gate in (0,1)
  }
}

TEST_CASE("ctl module matches a straight-line compositional oracle") {
  const int c = 8, tw = 4;
  CtlModule<float> m(c, tw, c, CtlVariant::full);
  Rng rng(10);
  m.init(rng);
  rng.fill_uniform(m.pos, -0.2, 0.2);
  TensorF x({1, c, 6, 6});
  rng.fill_uniform(x, -1.0, 1.0);

  Tape<float> t;
  ParamVars<float> pv;
  Var<float> out = m.forward(t, pv, t.leaf(x), false);
  const TensorF& got = t.value(out);

  // independent composition from the op layer
  TensorF x3 = x.reshaped({c, 6, 6});
  TensorF w = oracle::wcm(x3, m.wcm.w1, m.wcm.b1, m.wcm.w2, m.wcm.b2);
  TensorF branch1 = ops::tfc2d(x3, m.tfc1.w, w, nullptr, 1, 0);
  TensorF q = ops::tfc2d(x3, m.gate_c2t.w, w, nullptr, 1, 1);
  q = q.reshaped({1, tw, 6, 6});
  q = ops::relu(ops::bn_infer(q, m.gate_bn1.gamma, m.gate_bn1.beta, m.gate_bn1.running_mean,
                              m.gate_bn1.running_var, 1e-5f));
  q = ops::add_bc(q, m.pos);
  q = ops::conv2d(q, m.gate_t2t.w, nullptr, 1, 3);
  q = ops::relu(ops::bn_infer(q, m.gate_bn2.gamma, m.gate_bn2.beta, m.gate_bn2.running_mean,
                              m.gate_bn2.running_var, 1e-5f));
  TensorF gate = ops::sigmoid(ops::conv2d(q, m.gate_t2c.w, nullptr, 1, 1));
  TensorF value = ops::relu(
      ops::bn_infer(ops::conv2d(x, m.value_conv.w, nullptr, 1, 1), m.value_bn.gamma,
                    m.value_bn.beta, m.value_bn.running_mean, m.value_bn.running_var, 1e-5f));
  TensorF branch2 = ops::mul_bc(gate.reshaped({c, 6, 6}), value.reshaped({c, 6, 6}));
  TensorF want = ops::add_bc(branch1, branch2);

  REQUIRE(got.numel() == want.numel());
  CHECK(oracle::rel_err(got.reshaped({c, 6, 6}), want) <= 1e-6);
}

TEST_CASE("ctl block: zeroed inner parameters are an exact identity") {
  CtlBlock<float> blk(16, 16, 4, 4, 4, CtlVariant::full, /*downsample=*/false);
  Rng rng(11);
  TensorF x({2, 16, 6, 6});
  rng.fill_uniform(x, -1.0, 1.0);

  for (bool train : {false, true}) {
    Tape<float> t;
    ParamVars<float> pv;
    Var<float> out = blk.forward(t, pv, t.leaf(x), train);
    const TensorF& ov = t.value(out);
    REQUIRE(ov.shape() == x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) REQUIRE(ov[i] == x[i]);
  }
  CHECK_THROWS_AS(CtlBlock<float>(16, 32, 4, 4, 4, CtlVariant::full, false),
                  std::invalid_argument);
}

TEST_CASE("ctl block: output shape contract and gradient check") {
  CtlBlock<double> blk(8, 8, 2, 4, 2, CtlVariant::full, false);
  Rng rng(12);
  blk.init(rng);
  rng.fill_uniform(blk.mid.pos, -0.1, 0.1);
  TensorD x({2, 8, 5, 5});
  rng.fill_uniform(x, -1.0, 1.0);

  // collect the block's tensors as grad-check points
  std::vector<TensorD*> ptensors;
  std::vector<TensorD> points;
  points.push_back(x);
  auto add = [&](TensorD& t) {
    ptensors.push_back(&t);
    points.push_back(t);
  };
  add(blk.conv1.w);
  add(blk.mid.wcm.w1);
  add(blk.mid.wcm.b1);
  add(blk.mid.wcm.w2);
  add(blk.mid.wcm.b2);
  add(blk.mid.tfc1.w);
  add(blk.mid.gate_c2t.w);
  add(blk.mid.pos);
  add(blk.mid.gate_t2t.w);
  add(blk.mid.gate_t2c.w);
  add(blk.mid.value_conv.w);
  add(blk.conv2.w);

  TensorD lw({2 * 8 * 5 * 5});
  rng.fill_uniform(lw, -1.0, 1.0);
  // scratch outlives each tape: tape nodes reference its BN state tensors
  CtlBlock<double> scratch = blk;
  auto fn = [&](Tape<double>& t, const std::vector<Var<double>>& v) {
    // route every checked tensor through its leaf var; BN affine stays at
    // the scratch defaults
    ParamVars<double> pv;
    for (size_t i = 0; i < ptensors.size(); ++i) {
      // ptensors points into blk; translate to the matching scratch field
      const char* base = reinterpret_cast<const char*>(&blk);
      char* sbase = reinterpret_cast<char*>(&scratch);
      auto* member = reinterpret_cast<TensorD*>(
          sbase + (reinterpret_cast<const char*>(ptensors[i]) - base));
      pv.map.emplace(member, v[i + 1]);
    }
    Var<double> out = scratch.forward(t, pv, v[0], /*train=*/true);
    return t.weighted_sum(out, lw);
  };
  GradCheckResult r = grad_check(fn, points);
  CAPTURE(r.max_rel_err);
  CHECK(r.ok(1e-5));
}

TEST_CASE("wcm outputs lie strictly in (0,1) and match the oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    WcmLayer<float> wcm(6, 6);
    wcm.init(rng);
    rng.fill_uniform(wcm.b1, -0.5, 0.5);
    rng.fill_uniform(wcm.b2, -0.5, 0.5);
    TensorF x({1, 6, 5, 5});
    rng.fill_uniform(x, -2.0, 2.0);
    Tape<float> t;
    ParamVars<float> pv;
    Var<float> out = wcm.forward(t, pv, t.leaf(x));
    const TensorF& w = t.value(out);
    TensorF want = oracle::wcm(x.reshaped({6, 5, 5}), wcm.w1, wcm.b1, wcm.w2, wcm.b2);
    for (int64_t i = 0; i < 6; ++i) {
      REQUIRE(w[i] > 0.0f);
      REQUIRE(w[i] < 1.0f);
      REQUIRE(w[i] == doctest::Approx(want[i]).epsilon(1e-6));
    }
  }
  // saturation: inputs <= -20 through an identity MLP give weights < 1e-8
  WcmLayer<float> idw(3, 3);
  for (int i = 0; i < 3; ++i) {
    idw.w1.at({i, i}) = 1.0f;
    idw.w2.at({i, i}) = 1.0f;
  }
  TensorF neg = TensorF::full({1, 3, 2, 2}, -25.0f);
  Tape<float> t;
  ParamVars<float> pv;
  const TensorF& w = t.value(idw.forward(t, pv, t.leaf(neg)));
  for (int64_t i = 0; i < 3; ++i) {
    // relu clamps the hidden layer to zero, sigmoid(0) = 0.5; feed the raw
    // pool through both layers instead to expose saturation
    (void)i;
  }
  // direct check of the sigmoid tail via the oracle on a no-relu-path input
  TensorF sat = ops::sigmoid(TensorF({1}, {-20.0f}));
  CHECK(sat[0] < 1e-8f);
  CHECK(w[0] == 0.5f);  // relu(negative) = 0 -> sigmoid(0)
}

TEST_CASE("build_model determinism: same seed same bytes, different seed differs") {
  ModelConfig cfg = toy_config();
  ModelF a = ModelF::build(cfg, 42);
  ModelF b = ModelF::build(cfg, 42);
  ModelF c = ModelF::build(cfg, 43);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool any_diff_c = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].name == pb[i].name);
    REQUIRE(pa[i].tensor->numel() == pb[i].tensor->numel());
    for (int64_t j = 0; j < pa[i].tensor->numel(); ++j) {
      REQUIRE((*pa[i].tensor)[j] == (*pb[i].tensor)[j]);
      if ((*pa[i].tensor)[j] != (*pc[i].tensor)[j]) any_diff_c = true;
    }
  }
  CHECK(any_diff_c);
}

TEST_CASE("parameter names are globally unique") {
  ModelF m = ModelF::build(toy_config(), 1, false);
  auto ps = m.params();
  std::vector<std::string> names;
  for (auto& p : ps) names.push_back(p.name);
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}

TEST_CASE("forward: shape, finiteness, batch invariance in infer mode") {
  ModelConfig cfg = toy_config();
  ModelF m = ModelF::build(cfg, 7);
  m.training = false;
  Rng rng(14);
  TensorF x = random_video(rng, 4, 32);
  TensorF y = random_video(rng, 4, 32);

  TensorF lx = m.forward_videos(x);
  CHECK(lx.shape() == std::vector<int64_t>{1, 5});
  for (int64_t i = 0; i < 5; ++i) CHECK(std::isfinite(lx[i]));

  TensorF batch({2, 3, 4, 32, 32});
  std::copy(x.data(), x.data() + x.numel(), batch.data());
  std::copy(y.data(), y.data() + y.numel(), batch.data() + x.numel());
  TensorF lb = m.forward_videos(batch);
  REQUIRE(lb.shape() == std::vector<int64_t>{2, 5});
  for (int64_t i = 0; i < 5; ++i) {
    CHECK(std::fabs(lb[i] - lx[i]) <= 1e-6f * std::max(1.0f, std::fabs(lx[i])));
  }
}

TEST_CASE("frame-order sensitivity with nonzero positional encoding") {
  ModelConfig cfg = toy_config();
  ModelF m = ModelF::build(cfg, 21);
  for (auto& stage : m.stages) {
    for (auto& blk : stage) {
      if (blk.mid.pos.numel() > 0) blk.mid.pos.fill(0.5f);
    }
  }
  Rng rng(15);
  TensorF x = random_video(rng, 4, 32);
  TensorF rev({3, 4, 32, 32});
  for (int c = 0; c < 3; ++c) {
    for (int t = 0; t < 4; ++t) {
      for (int i = 0; i < 32 * 32; ++i) {
        rev[(c * 4 + (3 - t)) * 1024 + i] = x[(c * 4 + t) * 1024 + i];
      }
    }
  }
  TensorF a = m.forward_videos(x);
  TensorF b = m.forward_videos(rev);
  double maxdiff = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    maxdiff = std::max(maxdiff, std::fabs(double(a[i]) - double(b[i])));
  }
  CHECK(maxdiff > 0.0);
}

TEST_CASE("resolution ladder validation") {
  ModelConfig cfg = toy_config();
  cfg.input_h = cfg.input_w = 20;  // 10 -> 5 -> 2 -> 1: dies entering stage 4
  CHECK_THROWS_WITH_AS(ModelF::build(cfg, 1, false), doctest::Contains("stage"),
                       std::invalid_argument);
}

TEST_CASE("describe() parameter rows agree with the registry") {
  for (const char* variant : {"full", "base", "branch1", "branch2"}) {
    ModelConfig cfg = toy_config();
    cfg.variant = variant;
    ModelF m = ModelF::build(cfg, 3, false);
    int64_t from_registry = 0;
    for (auto& p : m.params()) from_registry += p.tensor->numel();
    CostReport r = count_params(m);
    CAPTURE(variant);
    CHECK(r.params_total == from_registry);
  }
}

TEST_CASE("paper table: default config parameters and flops") {
  ModelConfig cfg;  // defaults: T=16, 224^2, [3,4,6,3], [256,512,1024,2048], 400 classes
  CostReport r = count_config(cfg);
  const double params_m = static_cast<double>(r.params_total) / 1e6;
  const double flops_g = static_cast<double>(r.macs_convlinear) / 1e9;
  CAPTURE(params_m);
  CAPTURE(flops_g);
  CHECK(params_m == doctest::Approx(28.7).epsilon(0.03));
  CHECK(flops_g == doctest::Approx(5.5).epsilon(0.10));
  CHECK(r.flops2x_convlinear == 2 * r.macs_convlinear);

  // branch ablation parameter column: base 23.6, TFC 16.1, IOI 27.5 (+-5%)
  ModelConfig base = cfg;
  base.variant = "base";
  ModelConfig b1 = cfg;
  b1.variant = "branch1";
  ModelConfig b2 = cfg;
  b2.variant = "branch2";
  const double pm_base = static_cast<double>(count_config(base).params_total) / 1e6;
  const double pm_b1 = static_cast<double>(count_config(b1).params_total) / 1e6;
  const double pm_b2 = static_cast<double>(count_config(b2).params_total) / 1e6;
  CAPTURE(pm_base);
  CAPTURE(pm_b1);
  CAPTURE(pm_b2);
  CHECK(pm_base == doctest::Approx(23.6).epsilon(0.05));
  CHECK(pm_b1 == doctest::Approx(16.1).epsilon(0.05));
  CHECK(pm_b2 == doctest::Approx(27.5).epsilon(0.05));
}

TEST_CASE("single conv model flops equal the squeezed analytic formula") {
  // a lone conv layer counted by the model machinery must match
  // analytic_complexity(squeezed) exactly (under the same convention)
  ConvLayer<float> conv(8, 16, 3, 1, 1);
  const int64_t macs = conv.macs(16, 16);
  ComplexityDims d;
  d.c_in = 8;
  d.c_out = 16;
  d.k = 3;
  d.h = 16;
  d.w = 16;
  CHECK(2 * macs == analytic_complexity(Paradigm::squeezed, d));
}

TEST_CASE("analytic complexity ratios") {
  ComplexityDims d;
  CHECK(analytic_complexity(Paradigm::conv3d, d) == 2);
  CHECK(analytic_complexity(Paradigm::conv2d_temporal, d) == 2);
  CHECK(analytic_complexity(Paradigm::squeezed, d) == 2);

  d.k = 3;
  d.t = 16;
  d.c_in = 4;
  d.c_out = 8;
  d.h = 10;
  d.w = 12;
  const int64_t c3 = analytic_complexity(Paradigm::conv3d, d);
  const int64_t sq = analytic_complexity(Paradigm::squeezed, d);
  CHECK(c3 == sq * d.k * d.t);  // ratio exactly k*t = 48
  d.o_t = 0;
  const int64_t c2t = analytic_complexity(Paradigm::conv2d_temporal, d);
  CHECK(c2t == sq * d.t);  // ratio exactly t
}
