#include "sqzt/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sqzt {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'Z', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const uint32_t n = read_pod<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor<float>& t) {
  if (name.size() > UINT16_MAX) throw std::invalid_argument("checkpoint: tensor name too long");
  write_pod(os, static_cast<uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod(os, static_cast<uint8_t>(DType::f32));
  write_pod(os, static_cast<uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_pod(os, static_cast<uint32_t>(t.extent(i)));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(sizeof(float)) * t.numel());
}

std::pair<std::string, Tensor<float>> read_tensor(std::istream& is) {
  const uint16_t name_len = read_pod<uint16_t>(is);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  const uint8_t dtype = read_pod<uint8_t>(is);
  if (dtype != static_cast<uint8_t>(DType::f32)) {
    throw std::runtime_error("checkpoint: unsupported dtype tag " + std::to_string(dtype));
  }
  const uint8_t rank = read_pod<uint8_t>(is);
  std::vector<int64_t> shape;
  for (int i = 0; i < rank; ++i) shape.push_back(read_pod<uint32_t>(is));
  Tensor<float> t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(sizeof(float)) * t.numel());
  if (!is) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Config& cfg, ModelF& model,
                     const SgdState& opt, int epoch, const std::string& rng_state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_string(os, serialize_config(cfg));
  write_pod(os, static_cast<uint32_t>(epoch));

  auto params = model.params();
  auto state = model.state();
  write_pod(os, static_cast<uint32_t>(params.size() + state.size()));
  for (const auto& p : params) write_tensor(os, p.name, *p.tensor);
  for (const auto& s : state) write_tensor(os, s.name, *s.tensor);

  write_pod(os, static_cast<uint32_t>(opt.velocity.size()));
  for (const auto& [name, v] : opt.velocity) write_tensor(os, name, v);

  write_string(os, rng_state);
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: '" + path + "' is not an SQZT file");
  }
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ck;
  ck.config = parse_config_text(read_string(is));
  ck.epoch = static_cast<int>(read_pod<uint32_t>(is));
  ck.model = ModelF::build(ck.config.model, /*seed=*/0, /*init=*/false);

  std::unordered_map<std::string, Tensor<float>*> by_name;
  for (auto& p : ck.model.params()) by_name.emplace(p.name, p.tensor);
  for (auto& s : ck.model.state()) by_name.emplace(s.name, s.tensor);

  const uint32_t n_tensors = read_pod<uint32_t>(is);
  size_t filled = 0;
  for (uint32_t i = 0; i < n_tensors; ++i) {
    auto [name, t] = read_tensor(is);
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
    }
    if (it->second->shape() != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    }
    *it->second = std::move(t);
    ++filled;
  }
  if (filled != by_name.size()) {
    throw std::runtime_error("checkpoint: file is missing " +
                             std::to_string(by_name.size() - filled) + " model tensors");
  }

  const uint32_t n_vel = read_pod<uint32_t>(is);
  for (uint32_t i = 0; i < n_vel; ++i) {
    auto [name, t] = read_tensor(is);
    ck.opt.velocity.emplace(std::move(name), std::move(t));
  }
  ck.rng_state = read_string(is);
  return ck;
}

}  // namespace sqzt
