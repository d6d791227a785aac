#include "sqzt/analysis.hpp"

#include <stdexcept>

namespace sqzt {

CostReport make_report(std::vector<LayerCost> rows) {
  CostReport r;
  r.rows = std::move(rows);
  for (const LayerCost& row : r.rows) {
    r.params_total += row.params;
    if (row.kind == "conv" || row.kind == "linear") {
      r.macs_convlinear += row.macs;
      r.flops2x_convlinear += 2 * row.macs;
    } else {
      r.aux_ops += row.macs;
    }
  }
  return r;
}

int64_t analytic_complexity(Paradigm p, const ComplexityDims& d) {
  if (d.c_in < 1 || d.c_out < 1 || d.k < 1 || d.h < 1 || d.w < 1 || d.t < 1 || d.o_t < 0) {
    throw std::invalid_argument("analytic_complexity: dims must be positive (O_t >= 0)");
  }
  const int64_t planar = 2 * d.c_out * d.c_in * d.k * d.k * d.h * d.w;
  switch (p) {
    case Paradigm::conv3d:
      return planar * d.k * d.t;
    case Paradigm::conv2d_temporal:
      return planar * d.t + d.o_t;
    case Paradigm::squeezed:
      return planar;
  }
  throw std::invalid_argument("analytic_complexity: unknown paradigm");
}

}  // namespace sqzt
