#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachelm/lstm.hpp"

namespace cachelm {

// Checkpoint container: 8-byte magic, a u32-length text header of
// key=value lines (config + vocabulary hash), then named tensors as
// { u32 name_len, name, u32 ndim, u64 dims[], f32 data } in little-endian
// byte order. Parameters are serialized as 32-bit floats regardless of the
// in-memory scalar type.

inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'L', 'M', 'C', 'K', 'P', '1'};

namespace detail {

template <typename V>
void write_pod(std::ostream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in, const std::string& path) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return v;
}

inline void write_tensor(std::ostream& out, const std::string& name,
                         const std::vector<uint64_t>& dims, const float* data) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<uint32_t>(out, static_cast<uint32_t>(dims.size()));
  uint64_t count = 1;
  for (uint64_t d : dims) {
    write_pod<uint64_t>(out, d);
    count *= d;
  }
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(float)));
}

}  // namespace detail

template <typename T>
void save_checkpoint(const LstmModel<T>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));

  const TrainConfig& c = model.config;
  std::ostringstream header;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(model.vocab_hash));
  header << "vocab_hash=" << buf << "\n";
  header << "vocab_size=" << model.vocab_size() << "\n";
  header << "hidden_size=" << model.hidden_size() << "\n";
  header << "embedding_size=" << model.embed_size() << "\n";
  header << "batch_size=" << c.batch_size << "\n";
  header << "unroll_steps=" << c.unroll_steps << "\n";
  std::snprintf(buf, sizeof(buf), "dropout_keep_prob=%.17g\n", c.dropout_keep_prob);
  header << buf;
  std::snprintf(buf, sizeof(buf), "grad_clip_norm=%.17g\n", c.grad_clip_norm);
  header << buf;
  std::snprintf(buf, sizeof(buf), "initial_lr=%.17g\n", c.initial_lr);
  header << buf;
  std::snprintf(buf, sizeof(buf), "lr_decay=%.17g\n", c.lr_decay);
  header << buf;
  header << "constant_lr_epochs=" << c.constant_lr_epochs << "\n";
  header << "patience=" << c.patience << "\n";
  header << "max_epochs=" << c.max_epochs << "\n";
  std::snprintf(buf, sizeof(buf), "init_range=%.17g\n", c.init_range);
  header << buf;
  header << "seed=" << c.seed << "\n";
  header << "tensor_count=5\n";
  const std::string header_str = header.str();
  detail::write_pod<uint32_t>(out, static_cast<uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto dump = [&](const std::string& name, const auto& mat) {
    std::vector<float> data(static_cast<size_t>(mat.size()));
    for (Eigen::Index k = 0; k < mat.size(); ++k) {
      data[static_cast<size_t>(k)] = static_cast<float>(mat.data()[k]);
    }
    std::vector<uint64_t> dims;
    if (mat.cols() == 1) {
      dims = {static_cast<uint64_t>(mat.rows())};
    } else {
      dims = {static_cast<uint64_t>(mat.rows()), static_cast<uint64_t>(mat.cols())};
    }
    detail::write_tensor(out, name, dims, data.data());
  };
  dump("embedding", model.embedding);
  dump("w_gates", model.w_gates);
  dump("b_gates", model.b_gates);
  dump("w_out", model.w_out);
  dump("b_out", model.b_out);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

template <typename T>
LstmModel<T> load_checkpoint(const std::string& path,
                             std::optional<uint64_t> expected_vocab_hash = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  }

  const auto header_len = detail::read_pod<uint32_t>(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);

  std::map<std::string, std::string> kv;
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("load_checkpoint: malformed header line '" + line + "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::runtime_error("load_checkpoint: header missing '" + key + "'");
    }
    return it->second;
  };

  const uint64_t vocab_hash = std::stoull(need("vocab_hash"), nullptr, 16);
  if (expected_vocab_hash && vocab_hash != *expected_vocab_hash) {
    char a[32], b[32];
    std::snprintf(a, sizeof(a), "%016llx", static_cast<unsigned long long>(vocab_hash));
    std::snprintf(b, sizeof(b), "%016llx",
                  static_cast<unsigned long long>(*expected_vocab_hash));
    throw std::runtime_error("load_checkpoint: vocabulary hash mismatch: checkpoint has " +
                             std::string(a) + ", expected " + std::string(b));
  }

  TrainConfig config;
  const int32_t vocab_size = std::stoi(need("vocab_size"));
  config.hidden_size = std::stoi(need("hidden_size"));
  config.embedding_size = std::stoi(need("embedding_size"));
  config.batch_size = std::stoi(need("batch_size"));
  config.unroll_steps = std::stoi(need("unroll_steps"));
  config.dropout_keep_prob = std::stod(need("dropout_keep_prob"));
  config.grad_clip_norm = std::stod(need("grad_clip_norm"));
  config.initial_lr = std::stod(need("initial_lr"));
  config.lr_decay = std::stod(need("lr_decay"));
  config.constant_lr_epochs = std::stoi(need("constant_lr_epochs"));
  config.patience = std::stoi(need("patience"));
  config.max_epochs = std::stoi(need("max_epochs"));
  config.init_range = std::stod(need("init_range"));
  config.seed = std::stoull(need("seed"));
  const int64_t tensor_count = std::stoll(need("tensor_count"));

  LstmModel<T> model;
  model.config = config;
  model.vocab_hash = vocab_hash;
  const int32_t h = config.hidden_size;
  const int32_t e = config.embedding();
  model.embedding.resize(vocab_size, e);
  model.w_gates.resize(4 * h, e + h);
  model.b_gates.resize(4 * h);
  model.w_out.resize(vocab_size, h);
  model.b_out.resize(vocab_size);

  std::map<std::string, bool> loaded;
  for (int64_t k = 0; k < tensor_count; ++k) {
    const auto name_len = detail::read_pod<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
    const auto ndim = detail::read_pod<uint32_t>(in, path);
    std::vector<uint64_t> dims(ndim);
    uint64_t count = 1;
    for (auto& d : dims) {
      d = detail::read_pod<uint64_t>(in, path);
      count *= d;
    }
    std::vector<float> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);

    auto fill = [&](auto& mat) {
      std::vector<uint64_t> expect;
      if (mat.cols() == 1 && ndim == 1) {
        expect = {static_cast<uint64_t>(mat.rows())};
      } else {
        expect = {static_cast<uint64_t>(mat.rows()), static_cast<uint64_t>(mat.cols())};
      }
      if (dims != expect) {
        throw std::runtime_error("load_checkpoint: tensor '" + name +
                                 "' has an unexpected shape in " + path);
      }
      for (Eigen::Index i = 0; i < mat.size(); ++i) {
        mat.data()[i] = static_cast<T>(data[static_cast<size_t>(i)]);
      }
    };
    if (name == "embedding") {
      fill(model.embedding);
    } else if (name == "w_gates") {
      fill(model.w_gates);
    } else if (name == "b_gates") {
      fill(model.b_gates);
    } else if (name == "w_out") {
      fill(model.w_out);
    } else if (name == "b_out") {
      fill(model.b_out);
    } else {
      throw std::runtime_error("load_checkpoint: unknown tensor '" + name + "' in " + path);
    }
    loaded[name] = true;
  }
  for (const char* name : {"embedding", "w_gates", "b_gates", "w_out", "b_out"}) {
    if (!loaded.count(name)) {
      throw std::runtime_error("load_checkpoint: tensor '" + std::string(name) +
                               "' missing from " + path);
    }
  }
  return model;
}

}  // namespace cachelm
