#include "nire/grad_check.hpp"

#include <cmath>

namespace nire {

namespace {

constexpr double kFloor = 1e-6;

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + kFloor);
}

void require_f64(const Tensor& t) {
  if (t.dtype() != DType::f64) throw ContractError("grad_check needs float64 tensors");
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  require_f64(x);
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  f(leaf).backward();
  const auto analytic = leaf.grad().to_vector();

  NoGradGuard guard;
  Tensor probe = x.clone();
  auto values = probe.mutable_data<double>();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = f(probe).item();
    values[i] = orig - h;
    const double down = f(probe).item();
    values[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

ParamGradReport grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  double h) {
  for (auto& p : params) {
    require_f64(p);
    p.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad().to_vector());

  NoGradGuard guard;
  ParamGradReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data<double>();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss().item();
      values[i] = orig - h;
      const double down = loss().item();
      values[i] = orig;
      const double err = rel_error(analytic[k][i], (up - down) / (2.0 * h));
      ++report.components;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = k;
        report.worst_index = static_cast<std::int64_t>(i);
      }
    }
  }
  return report;
}

}  // namespace nire
