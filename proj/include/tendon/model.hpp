#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tendon/autodiff.hpp"
#include "tendon/healing.hpp"
#include "tendon/image.hpp"
#include "tendon/optim.hpp"
#include "tendon/tensor.hpp"

namespace tendon {

struct ConvBlock {
  int filters = 8;
  int kernel = 3;  // valid padding, stride 1
  int pool = 2;    // max-pool window and stride
};

struct ModelConfig {
  int input_h = 96;
  int input_w = 96;
  std::vector<ConvBlock> conv_blocks = {{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
  int feature_dim = 64;
  enum class Head { Classify, Regress } head = Head::Classify;
  Plane plane = Plane::Sagittal;
  std::string target;  // regress: one of SCT,TT,STE,TE,TU,TisE; classify: ""

  // Throws invalid_argument on head/target mismatch or when the conv stack
  // collapses the spatial size below 1x1.
  void validate() const;

  // Spatial size after the whole conv stack.
  std::pair<int, int> final_spatial() const;
  int flat_dim() const;
};

// "small" is the default above; medium/large widen every layer.
ModelConfig preset_config(const std::string& name);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Parameter names and shapes are a pure function of the config:
// conv1.weight [F,C,k,k], conv1.bias [F], ..., fc.weight [flat,feature_dim],
// fc.bias, head.weight [feature_dim,1], head.bias [1].
std::vector<std::pair<std::string, std::vector<int>>> model_param_shapes(
    const ModelConfig& config);

class Model {
 public:
  Model(ModelConfig config, NamedParams params);

  const ModelConfig& config() const { return config_; }
  const NamedParams& params() const { return params_; }
  TensorPtr param(const std::string& name) const;

  // Raw head output [N,1] on the tape (training path).
  TensorPtr forward_logits(Graph& g, const TensorPtr& batch) const;
  // Post-ReLU penultimate activations [N,feature_dim].
  TensorPtr forward_features(Graph& g, const TensorPtr& batch) const;

  // Inference: classify -> sigmoid probability in (0,1); regress -> clamped
  // to [1,7]. predict_raw skips the clamp so exam-level aggregation can
  // average raw scores and clamp once.
  std::vector<double> predict(const TensorPtr& batch) const;
  std::vector<double> predict_raw(const TensorPtr& batch) const;

  void set_trainable(bool on);

 private:
  ModelConfig config_;
  NamedParams params_;
};

// Fan-in-scaled uniform init U(+-sqrt(3/fan_in)), one derived stream per
// parameter name; biases zero except the regression head bias, which starts
// at the scale midpoint 4.0. Identical (config, seed) builds bit-identical
// models.
Model build_model(const ModelConfig& config, std::uint64_t seed);

// [N,1,h,w] batch from row-major images; every image must be h x w.
TensorPtr pack_images(const std::vector<const Image*>& slices, int h, int w);

}  // namespace tendon
