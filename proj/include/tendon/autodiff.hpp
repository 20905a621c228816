#pragma once

#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tendon/tensor.hpp"

namespace tendon {

// Reverse-mode tape. Ops append nodes in execution order, which is by
// construction a topological order; backward() walks it in reverse.
//
// Conventions, fixed across the project:
//   - conv2d is cross-correlation (no kernel flip).
//   - maxpool routes gradient to the first (row-major) maximum of a window.
//   - relu uses subgradient 0 at x == 0.
//   - backward() zeroes the grads of every tensor the tape touches unless
//     accumulate is requested; leaf tensors without requires_grad never get
//     a grad buffer.
class Graph {
 public:
  TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel,
                   const TensorPtr& bias, int stride, int padding);
  TensorPtr maxpool2d(const TensorPtr& input, int window, int stride);
  TensorPtr relu(const TensorPtr& input);
  TensorPtr flatten(const TensorPtr& input);  // [N,...] -> [N,rest]
  TensorPtr affine(const TensorPtr& input, const TensorPtr& weight,
                   const TensorPtr& bias);
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sum(const TensorPtr& input);  // -> scalar

  // mean_i log(1 + exp(-(2*label_i - 1) * logit_i)), stable log-sum-exp form.
  // Labels must be exactly 0 or 1 and are treated as constants.
  TensorPtr bce_with_logits(const TensorPtr& logits, const TensorPtr& labels);
  // mean_i (pred_i - target_i)^2
  TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);

  void backward(const TensorPtr& loss, bool accumulate = false);

  void clear();
  std::size_t size() const { return nodes_.size(); }

  // Debug check: when enabled, every op output and every grad buffer is
  // scanned for NaN/Inf and a std::runtime_error names the offending op.
  static void set_finite_checks(bool on);
  static bool finite_checks();

 private:
  struct Node {
    std::string op;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backprop;
  };

  TensorPtr record(std::string op, std::vector<TensorPtr> inputs,
                   TensorPtr output, std::function<void()> backprop);
  bool produced(const Tensor* t) const {
    return produced_.count(t) > 0;
  }

  std::vector<Node> nodes_;
  std::unordered_set<const Tensor*> produced_;
};

}  // namespace tendon
