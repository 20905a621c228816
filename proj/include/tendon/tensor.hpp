#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tendon {

std::string shape_str(const std::vector<int>& shape);

// Validates that every extent is positive; returns the element count.
std::size_t shape_numel(const std::vector<int>& shape);

// Dense row-major tensor of 64-bit floats. `grad` stays empty until a
// backward pass (or ensure_grad) allocates it; when present it always has
// the same length as `data`.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;

  std::size_t numel() const { return data.size(); }
  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  void drop_grad() { grad.clear(); }

  int dim(std::size_t i) const { return shape.at(i); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data);
TensorPtr make_scalar(double value);

}  // namespace tendon
