#include "tendon/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tendon/rng.hpp"

namespace tendon {

namespace {

std::pair<int, int> stack_spatial(const ModelConfig& c, bool* ok) {
  int h = c.input_h, w = c.input_w;
  *ok = h >= 1 && w >= 1;
  for (const ConvBlock& b : c.conv_blocks) {
    h = h - b.kernel + 1;
    w = w - b.kernel + 1;
    if (h < b.pool || w < b.pool) {
      *ok = false;
      return {h, w};
    }
    h = (h - b.pool) / b.pool + 1;
    w = (w - b.pool) / b.pool + 1;
  }
  if (h < 1 || w < 1) *ok = false;
  return {h, w};
}

}  // namespace

void ModelConfig::validate() const {
  if (input_h < 1 || input_w < 1)
    throw std::invalid_argument("model config: input size must be positive");
  if (feature_dim < 1)
    throw std::invalid_argument("model config: feature_dim must be positive");
  for (const ConvBlock& b : conv_blocks)
    if (b.filters < 1 || b.kernel < 1 || b.pool < 1)
      throw std::invalid_argument(
          "model config: conv block fields must be positive");
  bool ok = true;
  auto [h, w] = stack_spatial(*this, &ok);
  if (!ok)
    throw std::invalid_argument(
        "model config: conv stack collapses " + std::to_string(input_h) + "x" +
        std::to_string(input_w) + " below 1x1 (reached " + std::to_string(h) +
        "x" + std::to_string(w) + ")");
  if (head == Head::Regress) {
    if (target.empty())
      throw std::invalid_argument(
          "model config: regression needs a target, one of SCT, TT, STE, TE, "
          "TU, TisE");
    param_index(target);  // throws on unknown name
  } else if (!target.empty()) {
    throw std::invalid_argument(
        "model config: classification takes no target (got \"" + target +
        "\")");
  }
}

std::pair<int, int> ModelConfig::final_spatial() const {
  bool ok = true;
  return stack_spatial(*this, &ok);
}

int ModelConfig::flat_dim() const {
  auto [h, w] = final_spatial();
  int ch = conv_blocks.empty() ? 1 : conv_blocks.back().filters;
  return ch * h * w;
}

ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  if (name == "small") {
    // defaults
  } else if (name == "medium") {
    c.conv_blocks = {{12, 3, 2}, {24, 3, 2}, {48, 3, 2}};
    c.feature_dim = 96;
  } else if (name == "large") {
    c.conv_blocks = {{16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
    c.feature_dim = 128;
  } else {
    throw std::invalid_argument("unknown model preset \"" + name +
                                "\" (small, medium, large)");
  }
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const ConvBlock& b : c.conv_blocks)
    blocks.push_back({b.filters, b.kernel, b.pool});
  j = nlohmann::json{
      {"input", {c.input_h, c.input_w}},
      {"conv_blocks", blocks},
      {"feature_dim", c.feature_dim},
      {"head", c.head == ModelConfig::Head::Classify ? "classify" : "regress"},
      {"plane", plane_name(c.plane)},
  };
  if (c.target.empty())
    j["target"] = nullptr;
  else
    j["target"] = c.target;
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.input_h = j.at("input").at(0).get<int>();
  c.input_w = j.at("input").at(1).get<int>();
  c.conv_blocks.clear();
  for (const auto& b : j.at("conv_blocks"))
    c.conv_blocks.push_back(
        {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>()});
  c.feature_dim = j.at("feature_dim").get<int>();
  const std::string head = j.at("head").get<std::string>();
  if (head == "classify")
    c.head = ModelConfig::Head::Classify;
  else if (head == "regress")
    c.head = ModelConfig::Head::Regress;
  else
    throw std::invalid_argument("model config: unknown head \"" + head + "\"");
  c.plane = plane_from_name(j.at("plane").get<std::string>());
  if (j.contains("target") && !j.at("target").is_null())
    c.target = j.at("target").get<std::string>();
  else
    c.target.clear();
}

std::vector<std::pair<std::string, std::vector<int>>> model_param_shapes(
    const ModelConfig& config) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  int ch = 1;
  for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
    const ConvBlock& b = config.conv_blocks[i];
    const std::string base = "conv" + std::to_string(i + 1);
    shapes.emplace_back(base + ".weight",
                        std::vector<int>{b.filters, ch, b.kernel, b.kernel});
    shapes.emplace_back(base + ".bias", std::vector<int>{b.filters});
    ch = b.filters;
  }
  shapes.emplace_back("fc.weight",
                      std::vector<int>{config.flat_dim(), config.feature_dim});
  shapes.emplace_back("fc.bias", std::vector<int>{config.feature_dim});
  shapes.emplace_back("head.weight", std::vector<int>{config.feature_dim, 1});
  shapes.emplace_back("head.bias", std::vector<int>{1});
  return shapes;
}

Model::Model(ModelConfig config, NamedParams params)
    : config_(std::move(config)), params_(std::move(params)) {}

TensorPtr Model::param(const std::string& name) const {
  for (const auto& [n, t] : params_)
    if (n == name) return t;
  throw std::invalid_argument("model has no parameter \"" + name + "\"");
}

TensorPtr Model::forward_features(Graph& g, const TensorPtr& batch) const {
  if (batch->shape.size() != 4 || batch->shape[1] != 1 ||
      batch->shape[2] != config_.input_h || batch->shape[3] != config_.input_w)
    throw std::invalid_argument(
        "model input must be [N,1," + std::to_string(config_.input_h) + "," +
        std::to_string(config_.input_w) + "]");
  TensorPtr x = batch;
  for (std::size_t i = 0; i < config_.conv_blocks.size(); ++i) {
    const ConvBlock& b = config_.conv_blocks[i];
    const std::string base = "conv" + std::to_string(i + 1);
    x = g.conv2d(x, param(base + ".weight"), param(base + ".bias"), 1, 0);
    x = g.relu(x);
    x = g.maxpool2d(x, b.pool, b.pool);
  }
  x = g.flatten(x);
  x = g.affine(x, param("fc.weight"), param("fc.bias"));
  return g.relu(x);
}

TensorPtr Model::forward_logits(Graph& g, const TensorPtr& batch) const {
  TensorPtr f = forward_features(g, batch);
  return g.affine(f, param("head.weight"), param("head.bias"));
}

std::vector<double> Model::predict_raw(const TensorPtr& batch) const {
  Graph g;
  TensorPtr out = forward_logits(g, batch);
  return out->data;
}

std::vector<double> Model::predict(const TensorPtr& batch) const {
  std::vector<double> raw = predict_raw(batch);
  if (config_.head == ModelConfig::Head::Classify) {
    for (double& v : raw) v = 1.0 / (1.0 + std::exp(-v));
  } else {
    for (double& v : raw) v = v < 1.0 ? 1.0 : (v > 7.0 ? 7.0 : v);
  }
  return raw;
}

void Model::set_trainable(bool on) {
  for (auto& [name, t] : params_) t->requires_grad = on;
}

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  NamedParams params;
  for (const auto& [name, shape] : model_param_shapes(config)) {
    TensorPtr t = make_tensor(shape);
    const bool is_bias = shape.size() == 1;
    if (is_bias) {
      const bool regress_head = name == "head.bias" &&
                                config.head == ModelConfig::Head::Regress;
      std::fill(t->data.begin(), t->data.end(), regress_head ? 4.0 : 0.0);
    } else {
      int fan_in = 1;
      for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
      if (shape.size() == 2) fan_in = shape[0];  // affine weight is [in,out]
      const double bound = std::sqrt(3.0 / fan_in);
      CounterRng rng(derive_seed(seed, name));
      for (double& v : t->data) v = rng.uniform(-bound, bound);
    }
    t->requires_grad = true;
    params.emplace_back(name, t);
  }
  return Model(config, std::move(params));
}

TensorPtr pack_images(const std::vector<const Image*>& slices, int h, int w) {
  if (slices.empty())
    throw std::invalid_argument("pack_images: empty slice list");
  auto x = make_tensor({static_cast<int>(slices.size()), 1, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const Image& img = *slices[i];
    if (img.h != h || img.w != w)
      throw std::invalid_argument(
          "pack_images: slice " + std::to_string(i) + " is " +
          std::to_string(img.h) + "x" + std::to_string(img.w) + ", expected " +
          std::to_string(h) + "x" + std::to_string(w));
    std::copy(img.px.begin(), img.px.end(), x->data.begin() + i * hw);
  }
  return x;
}

}  // namespace tendon
