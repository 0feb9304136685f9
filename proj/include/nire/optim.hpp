#pragma once

#include <cstdint>
#include <vector>

#include "nire/layers.hpp"
#include "nire/serialize.hpp"

namespace nire {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled decay applied as p -= lr * decay * p.
  double weight_decay = 0.0;
};

/// Adaptive-moment optimizer over a fixed parameter set. Moments are kept in
/// float64 regardless of the parameter dtype.
class Adam {
 public:
  Adam(const ParamSet& params, AdamOptions options = {});

  /// One update from the gradients currently accumulated on the parameters.
  void step();
  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

  /// "optim.step", "optim.m.<param>", "optim.v.<param>".
  NamedTensors state() const;
  /// Restores moments from entries produced by state(); other names are ignored.
  void load_state(const NamedTensors& entries);

 private:
  NamedTensors params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t steps_ = 0;
};

}  // namespace nire
