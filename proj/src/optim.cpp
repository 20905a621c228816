#include "tendon/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tendon {

void OptimizerConfig::validate() const {
  if (!(lr > 0.0))
    throw std::invalid_argument("optimizer: lr must be positive, got " +
                                std::to_string(lr));
  if (kind == OptimizerKind::SgdMomentum &&
      !(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("optimizer: momentum must lie in [0,1), got " +
                                std::to_string(momentum));
  if (kind == OptimizerKind::Adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0))
      throw std::invalid_argument("optimizer: beta1 must lie in [0,1), got " +
                                  std::to_string(beta1));
    if (!(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("optimizer: beta2 must lie in [0,1), got " +
                                  std::to_string(beta2));
    if (!(eps > 0.0))
      throw std::invalid_argument("optimizer: eps must be positive, got " +
                                  std::to_string(eps));
  }
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  config_.validate();
}

Optimizer::Slot& Optimizer::slot_for(const std::string& name,
                                     std::size_t size) {
  for (auto& [n, slot] : slots_)
    if (n == name) {
      if (slot.m.size() != size)
        throw std::invalid_argument("optimizer: parameter '" + name +
                                    "' changed size between steps");
      return slot;
    }
  slots_.emplace_back(name, Slot{});
  auto& slot = slots_.back().second;
  slot.m.assign(size, 0.0);
  if (config_.kind == OptimizerKind::Adam) slot.v.assign(size, 0.0);
  return slot;
}

void Optimizer::step(const NamedParams& params) {
  for (const auto& [name, p] : params)
    if (!p->has_grad())
      throw std::invalid_argument("optimizer: parameter '" + name +
                                  "' has no gradient; run backward first");
  ++step_count_;
  switch (config_.kind) {
    case OptimizerKind::Sgd:
      for (const auto& [name, p] : params)
        for (std::size_t i = 0; i < p->data.size(); ++i)
          p->data[i] -= config_.lr * p->grad[i];
      break;
    case OptimizerKind::SgdMomentum:
      for (const auto& [name, p] : params) {
        auto& slot = slot_for(name, p->data.size());
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          slot.m[i] = config_.momentum * slot.m[i] + p->grad[i];
          p->data[i] -= config_.lr * slot.m[i];
        }
      }
      break;
    case OptimizerKind::Adam: {
      const double bc1 = 1.0 - std::pow(config_.beta1,
                                        static_cast<double>(step_count_));
      const double bc2 = 1.0 - std::pow(config_.beta2,
                                        static_cast<double>(step_count_));
      for (const auto& [name, p] : params) {
        auto& slot = slot_for(name, p->data.size());
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          const double g = p->grad[i];
          slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g;
          slot.v[i] = config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g * g;
          const double mhat = slot.m[i] / bc1;
          const double vhat = slot.v[i] / bc2;
          p->data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
      }
      break;
    }
  }
}

}  // namespace tendon
