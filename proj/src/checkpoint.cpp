#include "tendon/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tendon/rng.hpp"

namespace tendon {

namespace {

constexpr char kMagic[8] = {'T', 'E', 'N', 'D', 'O', 'N', 'C', 'K'};

void append_le_doubles(std::string& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int b = 0; b < 8; ++b)
      out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

double read_le_double(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b)
    bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

std::string hash_hex(const std::string& bytes) {
  const std::uint64_t h = fnv1a64(std::string_view(bytes.data(), bytes.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& what) {
  throw std::runtime_error("checkpoint " + path.string() + ": " + what);
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& seeds,
                     const nlohmann::json& training) {
  std::string payload;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : model.params()) {
    params.push_back({{"name", name},
                      {"shape", t->shape},
                      {"bytes", t->data.size() * 8}});
    append_le_doubles(payload, t->data);
  }
  nlohmann::json header{
      {"format_version", kCheckpointVersion},
      {"config", model.config()},
      {"seeds", seeds},
      {"training", training},
      {"params", params},
      {"payload_hash", hash_hex(payload)},
  };
  const std::string head = header.dump();
  if (head.size() > 0xFFFFFFFFull) fail(path, "header too large");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");
  f.write(kMagic, 8);
  const std::uint32_t hlen = static_cast<std::uint32_t>(head.size());
  char lenb[4] = {static_cast<char>(hlen & 0xFF),
                  static_cast<char>((hlen >> 8) & 0xFF),
                  static_cast<char>((hlen >> 16) & 0xFF),
                  static_cast<char>((hlen >> 24) & 0xFF)};
  f.write(lenb, 4);
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) fail(path, "write failed");
}

Model load_checkpoint(const std::filesystem::path& path,
                      nlohmann::json* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    fail(path, "not a checkpoint file (bad magic)");
  std::uint32_t hlen = 0;
  for (int b = 3; b >= 0; --b)
    hlen = (hlen << 8) | static_cast<unsigned char>(bytes[8 + b]);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen))
    fail(path, "truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(path, std::string("bad header JSON: ") + e.what());
  }
  const int version = header.at("format_version").get<int>();
  if (version != kCheckpointVersion)
    fail(path, "format_version " + std::to_string(version) + ", this build " +
                   "reads version " + std::to_string(kCheckpointVersion) +
                   "; re-save the model with a matching build");

  ModelConfig config = header.at("config").get<ModelConfig>();
  config.validate();
  auto expect = model_param_shapes(config);
  const auto& params = header.at("params");
  if (params.size() != expect.size())
    fail(path, "header lists " + std::to_string(params.size()) +
                   " parameters, config implies " +
                   std::to_string(expect.size()));

  const std::string payload = bytes.substr(12 + hlen);
  if (hash_hex(payload) != header.at("payload_hash").get<std::string>())
    fail(path, "payload hash mismatch (file corrupted or truncated)");

  NamedParams loaded;
  std::size_t off = 0;
  for (const auto& p : params) {
    const std::string name = p.at("name").get<std::string>();
    const std::vector<int> shape = p.at("shape").get<std::vector<int>>();
    const std::size_t nbytes = p.at("bytes").get<std::size_t>();
    bool known = false;
    for (const auto& [ename, eshape] : expect)
      if (ename == name) {
        known = true;
        if (eshape != shape)
          fail(path, "parameter " + name + " has shape " + shape_str(shape) +
                         ", config implies " + shape_str(eshape));
      }
    if (!known) fail(path, "parameter " + name + " not implied by config");
    if (nbytes != shape_numel(shape) * 8)
      fail(path, "parameter " + name + " byte length disagrees with shape");
    if (off + nbytes > payload.size()) fail(path, "payload too short");
    TensorPtr t = make_tensor(shape);
    for (std::size_t i = 0; i < t->data.size(); ++i)
      t->data[i] = read_le_double(payload.data() + off + i * 8);
    t->requires_grad = true;
    loaded.emplace_back(name, t);
    off += nbytes;
  }
  if (off != payload.size()) fail(path, "payload has trailing bytes");
  if (meta) *meta = header;
  return Model(std::move(config), std::move(loaded));
}

}  // namespace tendon
