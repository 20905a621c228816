#include "tendon/tensor.hpp"

namespace tendon {

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0)
      throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                  " has a non-positive extent");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

TensorPtr make_tensor(std::vector<int> shape) {
  auto t = std::make_shared<Tensor>();
  std::size_t n = shape_numel(shape);
  t->shape = std::move(shape);
  t->data.assign(n, 0.0);
  return t;
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> data) {
  std::size_t n = shape_numel(shape);
  if (n != data.size())
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  return t;
}

TensorPtr make_scalar(double value) { return make_tensor({1}, {value}); }

}  // namespace tendon
