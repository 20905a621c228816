#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tendon/tensor.hpp"

namespace tendon {

enum class OptimizerKind { Sgd, SgdMomentum, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double momentum = 0.9;   // SgdMomentum only
  double beta1 = 0.9;      // Adam only
  double beta2 = 0.999;    // Adam only
  double eps = 1e-8;       // Adam only

  void validate() const;
};

// Parameters are addressed by name so moment state survives independent of
// registration order.
using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Applies one update to every parameter. Each tensor must have a grad
  // buffer allocated (i.e. backward ran); a missing grad is an error naming
  // the parameter.
  void step(const NamedParams& params);

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps_taken() const { return step_count_; }

 private:
  struct Slot {
    std::vector<double> m;  // momentum / first moment
    std::vector<double> v;  // second moment (Adam)
  };

  Slot& slot_for(const std::string& name, std::size_t size);

  OptimizerConfig config_;
  std::size_t step_count_ = 0;
  std::vector<std::pair<std::string, Slot>> slots_;
};

}  // namespace tendon
