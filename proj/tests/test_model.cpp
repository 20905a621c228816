#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tendon/model.hpp"
#include "tendon/rng.hpp"

using namespace tendon;

namespace {

TensorPtr random_batch(int n, int h, int w, std::uint64_t seed) {
  TensorPtr t = make_tensor({n, 1, h, w});
  CounterRng rng(seed);
  for (double& v : t->data) v = rng.next_double();
  return t;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());

  SUBCASE("regress requires a target") {
    c.head = ModelConfig::Head::Regress;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("SCT, TT, STE"),
                         std::invalid_argument);
    c.target = "TT";
    CHECK_NOTHROW(c.validate());
    c.target = "XX";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("classify takes no target") {
    c.target = "TT";
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
  SUBCASE("pooling collapse rejected") {
    c.input_h = c.input_w = 8;  // 8 -> 6 -> 3 -> 1 -> 0 on the second pool
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("below 1x1"),
                         std::invalid_argument);
  }
  SUBCASE("bad block fields rejected") {
    c.conv_blocks[0].pool = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}

TEST_CASE("shape arithmetic matches the stack") {
  ModelConfig c;
  auto [h, w] = c.final_spatial();
  CHECK(h == 10);
  CHECK(w == 10);
  CHECK(c.flat_dim() == 32 * 10 * 10);

  ModelConfig one;
  one.conv_blocks = {{8, 3, 2}};
  auto [h1, w1] = one.final_spatial();
  CHECK(h1 == 47);
  CHECK(w1 == 47);
  CHECK(one.flat_dim() == 8 * 47 * 47);
}

TEST_CASE("param shapes are a pure function of config") {
  ModelConfig c;
  auto shapes = model_param_shapes(c);
  REQUIRE(shapes.size() == 10);
  CHECK(shapes[0].first == "conv1.weight");
  CHECK(shapes[0].second == std::vector<int>{8, 1, 3, 3});
  CHECK(shapes[1].second == std::vector<int>{8});
  CHECK(shapes[2].second == std::vector<int>{16, 8, 3, 3});
  CHECK(shapes[4].second == std::vector<int>{32, 16, 3, 3});
  CHECK(shapes[6].first == "fc.weight");
  CHECK(shapes[6].second == std::vector<int>{3200, 64});
  CHECK(shapes[8].first == "head.weight");
  CHECK(shapes[8].second == std::vector<int>{64, 1});
  CHECK(shapes[9].second == std::vector<int>{1});
}

TEST_CASE("build_model is deterministic and init is fan-in bounded") {
  ModelConfig c;
  Model a = build_model(c, 42);
  Model b = build_model(c, 42);
  REQUIRE(a.params().size() == b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].first == b.params()[i].first);
    CHECK(a.params()[i].second->data == b.params()[i].second->data);
  }
  Model other = build_model(c, 43);
  CHECK(a.param("conv1.weight")->data != other.param("conv1.weight")->data);

  const double bound1 = std::sqrt(3.0 / 9.0);
  for (double v : a.param("conv1.weight")->data) {
    CHECK(v >= -bound1);
    CHECK(v <= bound1);
  }
  const double boundf = std::sqrt(3.0 / 3200.0);
  for (double v : a.param("fc.weight")->data) {
    CHECK(v >= -boundf);
    CHECK(v <= boundf);
  }
  for (double v : a.param("conv2.bias")->data) CHECK(v == 0.0);
}

TEST_CASE("regression head bias starts at the scale midpoint") {
  ModelConfig c;
  c.head = ModelConfig::Head::Regress;
  c.target = "TE";
  Model m = build_model(c, 7);
  CHECK(m.param("head.bias")->data[0] == 4.0);
  ModelConfig cc;
  Model mc = build_model(cc, 7);
  CHECK(mc.param("head.bias")->data[0] == 0.0);
}

TEST_CASE("feature vector length and determinism") {
  ModelConfig c;
  Model m = build_model(c, 1);
  TensorPtr batch = random_batch(2, 96, 96, 5);
  Graph g1, g2;
  TensorPtr f1 = m.forward_features(g1, batch);
  TensorPtr f2 = m.forward_features(g2, batch);
  CHECK(f1->shape == std::vector<int>{2, 64});
  CHECK(f1->data == f2->data);
  for (double v : f1->data) CHECK(v >= 0.0);  // post-ReLU
}

TEST_CASE("zeroed classifier head predicts exactly 0.5") {
  ModelConfig c;
  Model m = build_model(c, 3);
  std::fill(m.param("head.weight")->data.begin(),
            m.param("head.weight")->data.end(), 0.0);
  std::fill(m.param("head.bias")->data.begin(),
            m.param("head.bias")->data.end(), 0.0);
  auto p = m.predict(random_batch(3, 96, 96, 9));
  REQUIRE(p.size() == 3);
  for (double v : p) CHECK(v == 0.5);
}

TEST_CASE("classifier probabilities stay in (0,1) on random inputs") {
  ModelConfig c;
  Model m = build_model(c, 11);
  auto p = m.predict(random_batch(4, 96, 96, 21));
  for (double v : p) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("regressor clamps at inference only") {
  ModelConfig c;
  c.head = ModelConfig::Head::Regress;
  c.target = "TT";
  Model m = build_model(c, 2);
  // force the raw output: zero everything, then drive the bias
  for (auto& [name, t] : m.params())
    std::fill(t->data.begin(), t->data.end(), 0.0);
  TensorPtr batch = random_batch(1, 96, 96, 4);

  m.param("head.bias")->data[0] = 9.3;
  CHECK(m.predict(batch)[0] == 7.0);
  CHECK(m.predict_raw(batch)[0] == doctest::Approx(9.3));

  m.param("head.bias")->data[0] = 4.2;
  CHECK(m.predict(batch)[0] == doctest::Approx(4.2));

  m.param("head.bias")->data[0] = -0.5;
  CHECK(m.predict(batch)[0] == 1.0);
}

TEST_CASE("batch invariance: batched predict equals per-slice predicts") {
  ModelConfig c;
  Model m = build_model(c, 13);
  TensorPtr batch = random_batch(3, 96, 96, 17);
  auto all = m.predict(batch);
  for (int i = 0; i < 3; ++i) {
    TensorPtr one = make_tensor({1, 1, 96, 96});
    std::copy(batch->data.begin() + i * 96 * 96,
              batch->data.begin() + (i + 1) * 96 * 96, one->data.begin());
    CHECK(m.predict(one)[0] == all[i]);
  }
}

TEST_CASE("identical slices in one batch give identical rows") {
  ModelConfig c;
  Model m = build_model(c, 19);
  TensorPtr one = random_batch(1, 96, 96, 23);
  TensorPtr two = make_tensor({2, 1, 96, 96});
  std::copy(one->data.begin(), one->data.end(), two->data.begin());
  std::copy(one->data.begin(), one->data.end(),
            two->data.begin() + 96 * 96);
  Graph g;
  TensorPtr f = m.forward_features(g, two);
  for (int j = 0; j < 64; ++j) CHECK(f->data[j] == f->data[64 + j]);
}

TEST_CASE("wrong input size rejected, no silent resize") {
  ModelConfig c;
  Model m = build_model(c, 23);
  Graph g;
  TensorPtr bad = make_tensor({1, 1, 64, 64});
  CHECK_THROWS_WITH_AS(m.forward_features(g, bad),
                       doctest::Contains("[N,1,96,96]"),
                       std::invalid_argument);
}

TEST_CASE("presets") {
  CHECK(preset_config("small").feature_dim == 64);
  CHECK(preset_config("medium").feature_dim == 96);
  CHECK(preset_config("medium").conv_blocks[2].filters == 48);
  CHECK(preset_config("large").feature_dim == 128);
  CHECK_THROWS_AS(preset_config("huge"), std::invalid_argument);
  for (const char* name : {"small", "medium", "large"})
    CHECK_NOTHROW(preset_config(name).validate());
}

TEST_CASE("config JSON round-trip") {
  ModelConfig c;
  c.head = ModelConfig::Head::Regress;
  c.target = "TisE";
  c.plane = Plane::Axial;
  c.feature_dim = 96;
  c.conv_blocks = {{12, 3, 2}, {24, 5, 3}};
  nlohmann::json j = c;
  ModelConfig back = j.get<ModelConfig>();
  CHECK(back.input_h == 96);
  CHECK(back.conv_blocks.size() == 2);
  CHECK(back.conv_blocks[1].kernel == 5);
  CHECK(back.conv_blocks[1].pool == 3);
  CHECK(back.feature_dim == 96);
  CHECK(back.head == ModelConfig::Head::Regress);
  CHECK(back.target == "TisE");
  CHECK(back.plane == Plane::Axial);

  ModelConfig cls;
  nlohmann::json jc = cls;
  CHECK(jc.at("target").is_null());
  ModelConfig cback = jc.get<ModelConfig>();
  CHECK(cback.target.empty());
  CHECK(cback.head == ModelConfig::Head::Classify);
}

TEST_CASE("logits differ from features head and training reduces loss") {
  // one tiny gradient step on a 2-sample batch lowers the BCE loss
  ModelConfig c;
  c.input_h = c.input_w = 12;
  c.conv_blocks = {{4, 3, 2}};
  c.feature_dim = 8;
  Model m = build_model(c, 31);
  TensorPtr batch = random_batch(2, 12, 12, 37);
  TensorPtr labels = make_tensor({2, 1}, {1.0, 0.0});

  Graph g;
  TensorPtr loss = g.bce_with_logits(m.forward_logits(g, batch), labels);
  const double before = loss->data[0];
  g.backward(loss);
  OptimizerConfig oc;
  oc.lr = 1e-2;
  Optimizer opt(oc);
  opt.step(m.params());

  Graph g2;
  TensorPtr after = g2.bce_with_logits(m.forward_logits(g2, batch), labels);
  CHECK(after->data[0] < before);
}
