#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "tendon/checkpoint.hpp"
#include "tendon/rng.hpp"

using namespace tendon;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) {
  fs::path dir = fs::temp_directory_path() / "tendon_test_ckpt";
  fs::create_directories(dir);
  return dir / name;
}

TensorPtr batch16(std::uint64_t seed) {
  TensorPtr t = make_tensor({16, 1, 96, 96});
  CounterRng rng(seed);
  for (double& v : t->data) v = rng.next_double();
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("round-trip predictions are bit-identical on a 16-slice batch") {
  ModelConfig c;
  c.head = ModelConfig::Head::Regress;
  c.target = "TU";
  Model m = build_model(c, 77);
  const fs::path p = tmp_file("roundtrip.ck");
  save_checkpoint(m, p, {{"init", 77}}, {{"epochs", 0}});

  nlohmann::json meta;
  Model back = load_checkpoint(p, &meta);
  CHECK(meta.at("seeds").at("init") == 77);
  CHECK(back.config().target == "TU");

  TensorPtr b = batch16(5);
  auto before = m.predict(b);
  auto after = back.predict(b);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i] == after[i]);

  // raw parameter arrays as well
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(m.params()[i].first == back.params()[i].first);
    CHECK(m.params()[i].second->data == back.params()[i].second->data);
  }
}

TEST_CASE("truncated payload rejected with a hash error") {
  Model m = build_model(ModelConfig{}, 5);
  const fs::path p = tmp_file("trunc.ck");
  save_checkpoint(m, p);
  std::string bytes = slurp(p);
  spit(p, bytes.substr(0, bytes.size() - 100));
  CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("hash mismatch"),
                       std::runtime_error);
}

TEST_CASE("flipped payload byte rejected") {
  Model m = build_model(ModelConfig{}, 6);
  const fs::path p = tmp_file("flip.ck");
  save_checkpoint(m, p);
  std::string bytes = slurp(p);
  bytes[bytes.size() - 9] ^= 0x40;
  spit(p, bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("hash mismatch"),
                       std::runtime_error);
}

TEST_CASE("wrong format_version refuses with guidance") {
  Model m = build_model(ModelConfig{}, 7);
  const fs::path p = tmp_file("ver.ck");
  save_checkpoint(m, p);
  std::string bytes = slurp(p);
  const std::string needle = "\"format_version\":1";
  auto pos = bytes.find(needle);
  REQUIRE(pos != std::string::npos);
  bytes[pos + needle.size() - 1] = '9';
  spit(p, bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(p),
                       doctest::Contains("format_version 9"),
                       std::runtime_error);
}

TEST_CASE("bad magic rejected") {
  const fs::path p = tmp_file("magic.ck");
  spit(p, "NOTACKPTxxxxxxxxxxxxxxxx");
  CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("bad magic"),
                       std::runtime_error);
}

TEST_CASE("missing file rejected with path") {
  const fs::path p = tmp_file("absent.ck");
  fs::remove(p);
  CHECK_THROWS_WITH_AS(load_checkpoint(p), doctest::Contains("absent.ck"),
                       std::runtime_error);
}
