#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sqzt {

/// One forward-pass row of the cost model (batch 1).
struct LayerCost {
  std::string name;
  std::string kind;  // conv | linear | bn | act | pool | eltwise | reshape
  int64_t params = 0;
  int64_t macs = 0;     // multiply-accumulates for conv/linear, ops-per-element otherwise
  std::vector<int64_t> out_shape;
};

/// Per-layer and total parameter/FLOP accounting under a declared convention.
/// The canonical totals count conv and linear layers only, in MACs
/// ("macs" convention: one multiply-accumulate = 1); flops2x doubles them.
/// Elementwise/norm/pool work is kept in a separate bucket so inclusive and
/// conv-only totals are both derivable from one report.
struct CostReport {
  std::vector<LayerCost> rows;
  int64_t params_total = 0;
  int64_t macs_convlinear = 0;
  int64_t flops2x_convlinear = 0;
  int64_t aux_ops = 0;
  std::string convention = "macs";
};

CostReport make_report(std::vector<LayerCost> rows);

enum class Paradigm { conv3d, conv2d_temporal, squeezed };

struct ComplexityDims {
  int64_t c_in = 1, c_out = 1, k = 1, h = 1, w = 1, t = 1, o_t = 0;
};

/// Closed-form single-layer costs (2*c_out*c_in*k^3*h*w*t for a 3D conv,
/// 2*c_out*c_in*k^2*h*w*t + O(t) for 2D+temporal, 2*c_out*c_in*k^2*h*w for
/// the squeezed path).
int64_t analytic_complexity(Paradigm p, const ComplexityDims& d);

}  // namespace sqzt
