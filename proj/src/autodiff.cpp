#include "tendon/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "tendon/kernels.hpp"

namespace tendon {

namespace {

std::atomic<bool> g_finite_checks{false};

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("non-finite value produced by ") +
                               op);
}

double stable_softplus(double t) {
  // log(1 + exp(t)) without overflow
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

void Graph::set_finite_checks(bool on) { g_finite_checks.store(on); }
bool Graph::finite_checks() { return g_finite_checks.load(); }

TensorPtr Graph::record(std::string op, std::vector<TensorPtr> inputs,
                        TensorPtr output, std::function<void()> backprop) {
  if (g_finite_checks.load()) check_finite(op.c_str(), output->data);
  produced_.insert(output.get());
  nodes_.push_back(
      Node{std::move(op), std::move(inputs), output, std::move(backprop)});
  return output;
}

void Graph::clear() {
  nodes_.clear();
  produced_.clear();
}

TensorPtr Graph::conv2d(const TensorPtr& input, const TensorPtr& kernel,
                        const TensorPtr& bias, int stride, int padding) {
  if (input->shape.size() != 4)
    throw std::invalid_argument("conv2d: input must be [N,C,H,W], got " +
                                shape_str(input->shape));
  if (kernel->shape.size() != 4)
    throw std::invalid_argument("conv2d: kernel must be [F,C,kH,kW], got " +
                                shape_str(kernel->shape));
  auto s = kernels::conv2d_shape(input->shape[0], input->shape[1],
                                 input->shape[2], input->shape[3],
                                 kernel->shape[0], kernel->shape[1],
                                 kernel->shape[2], kernel->shape[3], stride,
                                 padding);
  if (bias && bias->shape != std::vector<int>{s.f})
    throw std::invalid_argument("conv2d: bias must be [" + std::to_string(s.f) +
                                "], got " + shape_str(bias->shape));
  auto out = make_tensor({s.n, s.f, s.oh, s.ow});
  kernels::conv2d_forward(s, input->data.data(), kernel->data.data(),
                          bias ? bias->data.data() : nullptr,
                          out->data.data());
  Tensor* in_raw = input.get();
  Tensor* k_raw = kernel.get();
  Tensor* b_raw = bias ? bias.get() : nullptr;
  Tensor* out_raw = out.get();
  std::vector<TensorPtr> inputs{input, kernel};
  if (bias) inputs.push_back(bias);
  return record("conv2d", std::move(inputs), out, [=]() {
    if (in_raw->has_grad())
      kernels::conv2d_backward_input(s, k_raw->data.data(),
                                     out_raw->grad.data(),
                                     in_raw->grad.data());
    if (k_raw->has_grad() || (b_raw && b_raw->has_grad())) {
      // params kernel fills both; give it scratch if one side is frozen
      static thread_local std::vector<double> scratch;
      double* dk = nullptr;
      double* db = nullptr;
      if (k_raw->has_grad()) {
        dk = k_raw->grad.data();
      } else {
        scratch.assign(k_raw->data.size(), 0.0);
        dk = scratch.data();
      }
      if (b_raw && b_raw->has_grad()) db = b_raw->grad.data();
      kernels::conv2d_backward_params(s, in_raw->data.data(),
                                      out_raw->grad.data(), dk, db);
    }
  });
}

TensorPtr Graph::maxpool2d(const TensorPtr& input, int window, int stride) {
  if (input->shape.size() != 4)
    throw std::invalid_argument("maxpool2d: input must be [N,C,H,W], got " +
                                shape_str(input->shape));
  if (window <= 0 || stride <= 0)
    throw std::invalid_argument("maxpool2d: window and stride must be positive");
  const int h = input->shape[2], w = input->shape[3];
  if (window > h || window > w)
    throw std::invalid_argument(
        "maxpool2d: window " + std::to_string(window) +
        " exceeds spatial extent of input " + shape_str(input->shape));
  const int oh = (h - window) / stride + 1;
  const int ow = (w - window) / stride + 1;
  const int n = input->shape[0], c = input->shape[1];
  auto out = make_tensor({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int>>(
      static_cast<std::size_t>(n) * c * oh * ow);
  kernels::maxpool_forward(n, c, h, w, window, stride, oh, ow,
                           input->data.data(), out->data.data(),
                           argmax->data());
  Tensor* in_raw = input.get();
  Tensor* out_raw = out.get();
  return record("maxpool2d", {input}, out, [=]() {
    if (in_raw->has_grad())
      kernels::maxpool_backward(n, c, h, w, oh, ow, argmax->data(),
                                out_raw->grad.data(), in_raw->grad.data());
  });
}

TensorPtr Graph::relu(const TensorPtr& input) {
  auto out = make_tensor(input->shape);
  kernels::relu_forward(input->numel(), input->data.data(), out->data.data());
  Tensor* in_raw = input.get();
  Tensor* out_raw = out.get();
  return record("relu", {input}, out, [=]() {
    if (in_raw->has_grad())
      kernels::relu_backward(in_raw->data.size(), in_raw->data.data(),
                             out_raw->grad.data(), in_raw->grad.data());
  });
}

TensorPtr Graph::flatten(const TensorPtr& input) {
  if (input->shape.empty())
    throw std::invalid_argument("flatten: scalar input");
  const int n = input->shape[0];
  const int rest = static_cast<int>(input->numel()) / n;
  auto out = make_tensor({n, rest}, input->data);
  Tensor* in_raw = input.get();
  Tensor* out_raw = out.get();
  return record("flatten", {input}, out, [=]() {
    if (!in_raw->has_grad()) return;
    for (std::size_t i = 0; i < in_raw->grad.size(); ++i)
      in_raw->grad[i] += out_raw->grad[i];
  });
}

TensorPtr Graph::affine(const TensorPtr& input, const TensorPtr& weight,
                        const TensorPtr& bias) {
  if (input->shape.size() != 2 || weight->shape.size() != 2)
    throw std::invalid_argument("affine: input " + shape_str(input->shape) +
                                " and weight " + shape_str(weight->shape) +
                                " must both be rank 2");
  const int n = input->shape[0], d = input->shape[1];
  if (weight->shape[0] != d)
    throw std::invalid_argument("affine: inner dimensions disagree, input " +
                                shape_str(input->shape) + " vs weight " +
                                shape_str(weight->shape));
  const int m = weight->shape[1];
  if (bias && bias->shape != std::vector<int>{m})
    throw std::invalid_argument("affine: bias must be [" + std::to_string(m) +
                                "], got " + shape_str(bias->shape));
  auto out = make_tensor({n, m});
  kernels::affine_forward(n, d, m, input->data.data(), weight->data.data(),
                          bias ? bias->data.data() : nullptr,
                          out->data.data());
  Tensor* in_raw = input.get();
  Tensor* w_raw = weight.get();
  Tensor* b_raw = bias ? bias.get() : nullptr;
  Tensor* out_raw = out.get();
  std::vector<TensorPtr> inputs{input, weight};
  if (bias) inputs.push_back(bias);
  return record("affine", std::move(inputs), out, [=]() {
    if (in_raw->has_grad())
      kernels::affine_backward_input(n, d, m, w_raw->data.data(),
                                     out_raw->grad.data(),
                                     in_raw->grad.data());
    if (w_raw->has_grad() || (b_raw && b_raw->has_grad())) {
      static thread_local std::vector<double> scratch;
      double* dw = nullptr;
      if (w_raw->has_grad()) {
        dw = w_raw->grad.data();
      } else {
        scratch.assign(w_raw->data.size(), 0.0);
        dw = scratch.data();
      }
      kernels::affine_backward_params(
          n, d, m, in_raw->data.data(), out_raw->grad.data(), dw,
          (b_raw && b_raw->has_grad()) ? b_raw->grad.data() : nullptr);
    }
  });
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw std::invalid_argument("add: shapes disagree, " + shape_str(a->shape) +
                                " vs " + shape_str(b->shape));
  auto out = make_tensor(a->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i)
    out->data[i] = a->data[i] + b->data[i];
  Tensor* a_raw = a.get();
  Tensor* b_raw = b.get();
  Tensor* out_raw = out.get();
  return record("add", {a, b}, out, [=]() {
    if (a_raw->has_grad())
      for (std::size_t i = 0; i < a_raw->grad.size(); ++i)
        a_raw->grad[i] += out_raw->grad[i];
    if (b_raw->has_grad())
      for (std::size_t i = 0; i < b_raw->grad.size(); ++i)
        b_raw->grad[i] += out_raw->grad[i];
  });
}

TensorPtr Graph::sum(const TensorPtr& input) {
  double acc = 0.0;
  for (double v : input->data) acc += v;
  auto out = make_tensor({1}, {acc});
  Tensor* in_raw = input.get();
  Tensor* out_raw = out.get();
  return record("sum", {input}, out, [=]() {
    if (!in_raw->has_grad()) return;
    const double g = out_raw->grad[0];
    for (double& d : in_raw->grad) d += g;
  });
}

TensorPtr Graph::bce_with_logits(const TensorPtr& logits,
                                 const TensorPtr& labels) {
  if (logits->shape != labels->shape)
    throw std::invalid_argument("bce_with_logits: logits " +
                                shape_str(logits->shape) + " vs labels " +
                                shape_str(labels->shape));
  for (double y : labels->data)
    if (y != 0.0 && y != 1.0)
      throw std::invalid_argument(
          "bce_with_logits: labels must be exactly 0 or 1, got " +
          std::to_string(y));
  const std::size_t n = logits->numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = 2.0 * labels->data[i] - 1.0;
    acc += stable_softplus(-sign * logits->data[i]);
  }
  auto out = make_tensor({1}, {acc / static_cast<double>(n)});
  Tensor* z_raw = logits.get();
  Tensor* y_raw = labels.get();
  Tensor* out_raw = out.get();
  return record("bce_with_logits", {logits, labels}, out, [=]() {
    if (!z_raw->has_grad()) return;
    const double g = out_raw->grad[0] / static_cast<double>(z_raw->data.size());
    for (std::size_t i = 0; i < z_raw->data.size(); ++i) {
      const double sign = 2.0 * y_raw->data[i] - 1.0;
      z_raw->grad[i] += g * -sign * sigmoid(-sign * z_raw->data[i]);
    }
  });
}

TensorPtr Graph::mse(const TensorPtr& pred, const TensorPtr& target) {
  if (pred->shape != target->shape)
    throw std::invalid_argument("mse: pred " + shape_str(pred->shape) +
                                " vs target " + shape_str(target->shape));
  const std::size_t n = pred->numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  auto out = make_tensor({1}, {acc / static_cast<double>(n)});
  Tensor* p_raw = pred.get();
  Tensor* t_raw = target.get();
  Tensor* out_raw = out.get();
  return record("mse", {pred, target}, out, [=]() {
    const double g = out_raw->grad[0] * 2.0 / static_cast<double>(p_raw->data.size());
    if (p_raw->has_grad())
      for (std::size_t i = 0; i < p_raw->data.size(); ++i)
        p_raw->grad[i] += g * (p_raw->data[i] - t_raw->data[i]);
    if (t_raw->has_grad())
      for (std::size_t i = 0; i < t_raw->data.size(); ++i)
        t_raw->grad[i] -= g * (p_raw->data[i] - t_raw->data[i]);
  });
}

void Graph::backward(const TensorPtr& loss, bool accumulate) {
  if (loss->numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                shape_str(loss->shape));
  if (!produced(loss.get()))
    throw std::invalid_argument(
        "backward: loss tensor was not produced by this graph");

  // Allocate (and, unless accumulating, clear) the grad buffers that will
  // participate. Leaf tensors without requires_grad stay grad-less.
  for (auto& node : nodes_) {
    node.output->ensure_grad();
    if (!accumulate) node.output->zero_grad();
    for (auto& in : node.inputs) {
      if (in->requires_grad || produced(in.get())) {
        const bool fresh = !in->has_grad();
        in->ensure_grad();
        if (!accumulate && !fresh) in->zero_grad();
      }
    }
  }
  // Intermediates always restart from zero: their values are recomputed
  // every forward pass, so stale grads would be meaningless.
  if (accumulate)
    for (auto& node : nodes_) node.output->zero_grad();

  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->output->has_grad()) it->backprop();

  if (g_finite_checks.load())
    for (auto& node : nodes_)
      for (auto& in : node.inputs)
        if (in->has_grad()) check_finite(node.op.c_str(), in->grad);
}

}  // namespace tendon
