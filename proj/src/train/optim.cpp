#include "nire/optim.hpp"

#include <cmath>
#include <map>

#include "nire/error.hpp"

namespace nire {

Adam::Adam(const ParamSet& params, AdamOptions options) : params_(params.entries()), options_(options) {
  if (!(options_.learning_rate >= 0.0) || !(options_.beta1 >= 0.0 && options_.beta1 < 1.0) ||
      !(options_.beta2 >= 0.0 && options_.beta2 < 1.0) || !(options_.epsilon > 0.0) || !(options_.weight_decay >= 0.0)) {
    throw ConfigError("invalid optimizer settings");
  }
  for (const auto& [_, t] : params_) {
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate, decay = options_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor p = params_[k].second;
    if (!p.has_grad()) continue;
    dispatch(p.dtype(), [&]<class T>() {
      auto values = p.mutable_data<T>();
      auto grads = p.mutable_grad<T>();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
        double x = values[i];
        if (decay > 0.0) x -= lr * decay * x;
        values[i] = static_cast<T>(x - lr * update);
      }
    });
  }
}

NamedTensors Adam::state() const {
  NamedTensors out;
  out.emplace_back("optim.step", Tensor::scalar(static_cast<double>(steps_), DType::f64));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& shape = params_[k].second.shape();
    out.emplace_back("optim.m." + params_[k].first, Tensor::from_values(shape, m_[k], DType::f64));
    out.emplace_back("optim.v." + params_[k].first, Tensor::from_values(shape, v_[k], DType::f64));
  }
  return out;
}

void Adam::load_state(const NamedTensors& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : entries) by_name[name] = &t;
  const auto step = by_name.find("optim.step");
  if (step == by_name.end()) throw ContractError("checkpoint has no optimizer state");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (auto [prefix, dest] : {std::pair{"optim.m.", &m_[k]}, std::pair{"optim.v.", &v_[k]}}) {
      const auto it = by_name.find(std::string(prefix) + params_[k].first);
      if (it == by_name.end()) throw ContractError("optimizer state missing " + std::string(prefix) + params_[k].first);
      if (it->second->shape() != params_[k].second.shape()) {
        throw ContractError("optimizer state shape mismatch for " + params_[k].first);
      }
      *dest = it->second->to_vector();
    }
  }
  steps_ = static_cast<std::int64_t>(step->second->item());
}

}  // namespace nire
