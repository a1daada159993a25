#include "navrl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace navrl {

namespace {

const char kMagic[8] = {'N', 'A', 'V', 'R', 'L', 'C', 'P', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_string(std::vector<uint8_t>& out, const std::string& s) {
  put(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

template <typename T>
T take(const std::vector<uint8_t>& in, size_t& off) {
  if (off + sizeof(T) > in.size()) throw IoError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

std::string take_string(const std::vector<uint8_t>& in, size_t& off) {
  const uint32_t n = take<uint32_t>(in, off);
  if (off + n > in.size()) throw IoError("checkpoint truncated");
  std::string s(reinterpret_cast<const char*>(in.data() + off), n);
  off += n;
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put(out, kVersion);
  put(out, ck.global_step);
  put(out, ck.update_count);
  put(out, ck.adam_step);
  put_string(out, serialize_engine_config(ck.config));
  put(out, static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, mat] : ck.tensors) {
    put_string(out, name);
    put(out, static_cast<uint64_t>(mat.rows()));
    put(out, static_cast<uint64_t>(mat.cols()));
    const auto* data = reinterpret_cast<const uint8_t*>(mat.data());
    out.insert(out.end(), data, data + sizeof(float) * static_cast<size_t>(mat.size()));
  }
  put(out, static_cast<uint32_t>(ck.rng_states.size()));
  for (const auto& [name, state] : ck.rng_states) {
    put_string(out, name);
    put(out, state.first);
    put(out, state.second);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<long>(out.size()));
  if (!f) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::vector<uint8_t> in((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  size_t off = 0;
  if (in.size() < 12 || std::memcmp(in.data(), kMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  off = 8;
  const uint32_t version = take<uint32_t>(in, off);
  if (version != kVersion)
    throw IoError("checkpoint version mismatch: file has v" + std::to_string(version) +
                  ", this build reads v" + std::to_string(kVersion));
  Checkpoint ck;
  ck.global_step = take<int64_t>(in, off);
  ck.update_count = take<int64_t>(in, off);
  ck.adam_step = take<int64_t>(in, off);
  const std::string cfg_text = take_string(in, off);
  ck.config = parse_engine_config(KvFile::parse_text(cfg_text, path + "#config"));
  const uint32_t n_tensors = take<uint32_t>(in, off);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = take_string(in, off);
    const auto rows = static_cast<Eigen::Index>(take<uint64_t>(in, off));
    const auto cols = static_cast<Eigen::Index>(take<uint64_t>(in, off));
    MatF m(rows, cols);
    const size_t bytes = sizeof(float) * static_cast<size_t>(m.size());
    if (off + bytes > in.size()) throw IoError("checkpoint truncated");
    std::memcpy(m.data(), in.data() + off, bytes);
    off += bytes;
    ck.tensors.emplace(name, std::move(m));
  }
  const uint32_t n_rngs = take<uint32_t>(in, off);
  for (uint32_t i = 0; i < n_rngs; ++i) {
    const std::string name = take_string(in, off);
    const uint64_t base = take<uint64_t>(in, off);
    const uint64_t counter = take<uint64_t>(in, off);
    ck.rng_states.emplace(name, std::make_pair(base, counter));
  }
  return ck;
}

void checkpoint_from_model(Checkpoint& ck, const PolicyModel<float>& model,
                           const AdamOptimizer<float>* opt) {
  for (const auto* p : model.params().all()) ck.tensors[p->name] = p->value;
  if (opt) {
    auto* mut = const_cast<AdamOptimizer<float>*>(opt);
    const auto& params = model.params().all();
    for (size_t i = 0; i < params.size(); ++i) {
      ck.tensors["adam.m/" + params[i]->name] = mut->moments_m()[i];
      ck.tensors["adam.v/" + params[i]->name] = mut->moments_v()[i];
    }
    ck.adam_step = opt->step_count();
  }
}

void restore_into_model(const Checkpoint& ck, PolicyModel<float>& model,
                        AdamOptimizer<float>* opt) {
  for (auto* p : model.params().all()) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end())
      throw ConfigError("checkpoint is missing tensor '" + p->name +
                        "' (incompatible architecture)");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw ConfigError("checkpoint tensor '" + p->name + "' has shape " +
                        std::to_string(it->second.rows()) + "x" +
                        std::to_string(it->second.cols()) + ", model expects " +
                        std::to_string(p->value.rows()) + "x" +
                        std::to_string(p->value.cols()));
    p->value = it->second;
    p->grad.setZero();
  }
  if (opt) {
    const auto& params = model.params().all();
    for (size_t i = 0; i < params.size(); ++i) {
      const auto mit = ck.tensors.find("adam.m/" + params[i]->name);
      const auto vit = ck.tensors.find("adam.v/" + params[i]->name);
      if (mit == ck.tensors.end() || vit == ck.tensors.end())
        throw ConfigError("checkpoint has no optimizer state for '" + params[i]->name + "'");
      opt->moments_m()[i] = mit->second;
      opt->moments_v()[i] = vit->second;
    }
    opt->set_step_count(ck.adam_step);
  }
}

}  // namespace navrl
