#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "cachelm/rng.hpp"

namespace cachelm {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Whether the recurrent state (and the cache, when so configured) runs
/// across sentence boundaries or is reset at each <eos>.
enum class SequenceMode { kDiscourse, kSentence };

inline SequenceMode parse_sequence_mode(const std::string& s) {
  if (s == "discourse") return SequenceMode::kDiscourse;
  if (s == "sentence") return SequenceMode::kSentence;
  throw std::invalid_argument("mode must be 'discourse' or 'sentence', got '" + s + "'");
}

struct TrainConfig {
  int32_t hidden_size = 512;
  int32_t embedding_size = 0;  // 0 means same as hidden_size
  int32_t batch_size = 20;
  int32_t unroll_steps = 35;
  double dropout_keep_prob = 0.5;
  double grad_clip_norm = 5.0;
  double initial_lr = 1.0;
  double lr_decay = 0.8;
  int32_t constant_lr_epochs = 6;
  int32_t patience = 3;
  int32_t max_epochs = 39;
  double init_range = 0.05;
  uint64_t seed = 1;

  int32_t embedding() const { return embedding_size > 0 ? embedding_size : hidden_size; }

  void validate() const {
    if (hidden_size < 1) throw std::invalid_argument("config: hidden_size must be >= 1");
    if (embedding_size < 0) throw std::invalid_argument("config: embedding_size must be >= 0");
    if (batch_size < 1 || unroll_steps < 1) {
      throw std::invalid_argument("config: batch_size and unroll_steps must be >= 1");
    }
    if (dropout_keep_prob <= 0.0 || dropout_keep_prob > 1.0) {
      throw std::invalid_argument("config: dropout_keep_prob must be in (0,1]");
    }
    if (grad_clip_norm <= 0.0) throw std::invalid_argument("config: grad_clip_norm must be > 0");
    if (initial_lr <= 0.0) throw std::invalid_argument("config: initial_lr must be > 0");
    if (lr_decay <= 0.0 || lr_decay > 1.0) {
      throw std::invalid_argument("config: lr_decay must be in (0,1]");
    }
    if (constant_lr_epochs < 0) throw std::invalid_argument("config: constant_lr_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("config: patience must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("config: max_epochs must be >= 1");
    if (init_range <= 0.0) throw std::invalid_argument("config: init_range must be > 0");
  }
};

/// Single-layer LSTM language model. Gate weights are packed row-wise as
/// [input; forget; candidate; output], each block hidden_size rows, acting
/// on the concatenated [embedded input; previous hidden] vector.
template <typename T>
struct LstmModel {
  MatrixX<T> embedding;  // V x E
  MatrixX<T> w_gates;    // 4H x (E+H)
  VectorX<T> b_gates;    // 4H
  MatrixX<T> w_out;      // V x H
  VectorX<T> b_out;      // V
  TrainConfig config;
  uint64_t vocab_hash = 0;

  int32_t vocab_size() const { return static_cast<int32_t>(embedding.rows()); }
  int32_t embed_size() const { return static_cast<int32_t>(embedding.cols()); }
  int32_t hidden_size() const { return static_cast<int32_t>(w_out.cols()); }

  int64_t parameter_count() const {
    return embedding.size() + w_gates.size() + b_gates.size() + w_out.size() + b_out.size();
  }

  /// All parameters drawn uniform(-init_range, init_range) from config.seed.
  static LstmModel random_init(int32_t vocab_size, const TrainConfig& config,
                               uint64_t vocab_hash = 0) {
    config.validate();
    if (vocab_size < 2) throw std::invalid_argument("model: vocabulary too small");
    const int32_t h = config.hidden_size;
    const int32_t e = config.embedding();
    LstmModel m;
    m.config = config;
    m.vocab_hash = vocab_hash;
    m.embedding.resize(vocab_size, e);
    m.w_gates.resize(4 * h, e + h);
    m.b_gates.resize(4 * h);
    m.w_out.resize(vocab_size, h);
    m.b_out.resize(vocab_size);
    std::mt19937_64 gen(config.seed);
    auto fill = [&](auto& mat) {
      for (Eigen::Index i = 0; i < mat.size(); ++i) {
        mat.data()[i] = static_cast<T>(uniform_real(gen, -config.init_range, config.init_range));
      }
    };
    fill(m.embedding);
    fill(m.w_gates);
    fill(m.b_gates);
    fill(m.w_out);
    fill(m.b_out);
    return m;
  }
};

template <typename T>
struct LstmState {
  VectorX<T> h;
  VectorX<T> c;

  static LstmState zero(int32_t hidden_size) {
    LstmState s;
    s.h = VectorX<T>::Zero(hidden_size);
    s.c = VectorX<T>::Zero(hidden_size);
    return s;
  }
};

/// One evaluation step: the hidden state that produced the prediction
/// (what the neural cache stores and queries) plus the full next-word
/// distribution, in double regardless of the model scalar.
struct LmStep {
  Eigen::VectorXd hidden;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

namespace detail {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

inline Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace detail

/// Deterministic single-token forward pass (no dropout). Advances the
/// state in place and returns the step outputs.
template <typename T>
LmStep forward_step(const LstmModel<T>& model, int32_t word_id, LstmState<T>& state) {
  const int32_t h_size = model.hidden_size();
  const int32_t e_size = model.embed_size();
  if (word_id < 0 || word_id >= model.vocab_size()) {
    throw std::out_of_range("forward_step: word id " + std::to_string(word_id) +
                            " outside vocabulary of " + std::to_string(model.vocab_size()));
  }
  if (state.h.size() != h_size || state.c.size() != h_size) {
    throw std::invalid_argument("forward_step: state dimension mismatch");
  }

  VectorX<T> xh(e_size + h_size);
  xh.head(e_size) = model.embedding.row(word_id).transpose();
  xh.tail(h_size) = state.h;
  VectorX<T> z = model.w_gates * xh + model.b_gates;

  VectorX<T> c_new(h_size), h_new(h_size);
  for (int32_t k = 0; k < h_size; ++k) {
    const T i = detail::sigmoid(z[k]);
    const T f = detail::sigmoid(z[h_size + k]);
    const T g = std::tanh(z[2 * h_size + k]);
    const T o = detail::sigmoid(z[3 * h_size + k]);
    c_new[k] = f * state.c[k] + i * g;
    h_new[k] = o * std::tanh(c_new[k]);
  }
  state.c = c_new;
  state.h = h_new;

  VectorX<T> logits = model.w_out * h_new + model.b_out;

  LmStep step;
  step.hidden = h_new.template cast<double>();
  step.logits = logits.template cast<double>();
  step.probs = detail::stable_softmax(step.logits);
  return step;
}

}  // namespace cachelm
