#pragma once

#include <functional>
#include <vector>

#include "nire/tensor.hpp"

namespace nire {

/// Largest |analytic - central difference| / (|analytic| + 1e-6) over the
/// components of `x`. `f` must map a float64 tensor to a scalar.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-6);

struct ParamGradReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::int64_t worst_index = 0;
  std::size_t components = 0;
};

/// Same measure over a set of float64 leaf parameters read by `loss`.
/// Parameters are perturbed in place and restored.
ParamGradReport grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  double h = 1e-6);

}  // namespace nire
