#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachelm/corpus.hpp"
#include "cachelm/evaluator.hpp"
#include "cachelm/lstm.hpp"
#include "cachelm/rng.hpp"

namespace cachelm {

template <typename T>
struct Gradients {
  MatrixX<T> embedding;
  MatrixX<T> w_gates;
  VectorX<T> b_gates;
  MatrixX<T> w_out;
  VectorX<T> b_out;

  static Gradients zero_like(const LstmModel<T>& m) {
    Gradients g;
    g.embedding = MatrixX<T>::Zero(m.embedding.rows(), m.embedding.cols());
    g.w_gates = MatrixX<T>::Zero(m.w_gates.rows(), m.w_gates.cols());
    g.b_gates = VectorX<T>::Zero(m.b_gates.size());
    g.w_out = MatrixX<T>::Zero(m.w_out.rows(), m.w_out.cols());
    g.b_out = VectorX<T>::Zero(m.b_out.size());
    return g;
  }

  void set_zero() {
    embedding.setZero();
    w_gates.setZero();
    b_gates.setZero();
    w_out.setZero();
    b_out.setZero();
  }

  double squared_norm() const {
    return embedding.template cast<double>().squaredNorm() +
           w_gates.template cast<double>().squaredNorm() +
           b_gates.template cast<double>().squaredNorm() +
           w_out.template cast<double>().squaredNorm() +
           b_out.template cast<double>().squaredNorm();
  }

  void scale(T s) {
    embedding *= s;
    w_gates *= s;
    b_gates *= s;
    w_out *= s;
    b_out *= s;
  }
};

template <typename T, typename F>
void for_each_parameter(LstmModel<T>& m, F&& f) {
  f("embedding", m.embedding);
  f("w_gates", m.w_gates);
  f("b_gates", m.b_gates);
  f("w_out", m.w_out);
  f("b_out", m.b_out);
}

template <typename T, typename F>
void for_each_gradient(Gradients<T>& g, F&& f) {
  f("embedding", g.embedding);
  f("w_gates", g.w_gates);
  f("b_gates", g.b_gates);
  f("w_out", g.w_out);
  f("b_out", g.b_out);
}

namespace detail {

template <typename T>
struct StepTrace {
  std::vector<int32_t> ids;      // inputs for this step, per lane
  std::vector<uint8_t> reset;    // lanes whose state was zeroed before the step
  MatrixX<T> xh;                 // (E+H) x B, post-dropout input over previous hidden
  MatrixX<T> mask_in;            // E x B dropout mask (empty when keep == 1)
  MatrixX<T> mask_out;           // H x B dropout mask (empty when keep == 1)
  MatrixX<T> acts;               // 4H x B gate activations i,f,g,o
  MatrixX<T> c_prev;             // H x B (post-reset)
  MatrixX<T> tanh_c;             // H x B
  MatrixX<T> dh_out;             // H x B, dLoss/d(dropped h) from the softmax layer
};

template <typename T>
MatrixX<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double keep,
                        std::mt19937_64& gen) {
  MatrixX<T> mask(rows, cols);
  const T scale = static_cast<T>(1.0 / keep);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      mask(i, j) = bernoulli(gen, keep) ? scale : T(0);
    }
  }
  return mask;
}

}  // namespace detail

/// Runs one truncated-BPTT block: forward pass accumulating the summed
/// cross entropy over all batch.steps * batch.size targets, and, when
/// grads is non-null, the backward pass for the loss scaled by 1/batch
/// (gradients sum over time, averaged over lanes). The state carries in
/// and out; gradients never flow across block boundaries. Sentence mode
/// zeroes a lane's state whenever its input token is <eos>, and stops
/// gradients there. Dropout (inverted, non-recurrent connections only) is
/// applied when dropout_rng is non-null and keep_prob < 1.
template <typename T>
double run_bptt_block(const LstmModel<T>& model, const Batch& batch, MatrixX<T>& h,
                      MatrixX<T>& c, SequenceMode mode, int32_t eos_id,
                      double keep_prob = 1.0, std::mt19937_64* dropout_rng = nullptr,
                      Gradients<T>* grads = nullptr) {
  const int32_t hs = model.hidden_size();
  const int32_t es = model.embed_size();
  const int32_t bs = batch.batch_size;
  const int32_t steps = batch.steps;
  if (bs < 1 || steps < 1 || batch.input.empty()) {
    throw std::invalid_argument("run_bptt_block: empty batch");
  }
  if (h.rows() != hs || h.cols() != bs || c.rows() != hs || c.cols() != bs) {
    throw std::invalid_argument("run_bptt_block: state dimension mismatch");
  }
  const bool dropout = dropout_rng != nullptr && keep_prob < 1.0;
  const bool backward = grads != nullptr;

  std::vector<detail::StepTrace<T>> trace;
  if (backward) trace.resize(static_cast<size_t>(steps));

  double loss_sum = 0.0;
  MatrixX<T> xh(es + hs, bs), z(4 * hs, bs), c_new, tanh_c, h_new, hd;
  MatrixX<T> logits(model.vocab_size(), bs), dlogits;

  for (int32_t t = 0; t < steps; ++t) {
    detail::StepTrace<T>* tr = backward ? &trace[static_cast<size_t>(t)] : nullptr;
    if (tr) {
      tr->ids.resize(static_cast<size_t>(bs));
      tr->reset.assign(static_cast<size_t>(bs), 0);
    }
    for (int32_t b = 0; b < bs; ++b) {
      const int32_t id = batch.in(b, t);
      if (id < 0 || id >= model.vocab_size()) {
        throw std::out_of_range("run_bptt_block: token id outside vocabulary");
      }
      if (mode == SequenceMode::kSentence && id == eos_id) {
        h.col(b).setZero();
        c.col(b).setZero();
        if (tr) tr->reset[static_cast<size_t>(b)] = 1;
      }
      xh.col(b).head(es) = model.embedding.row(id).transpose();
      if (tr) tr->ids[static_cast<size_t>(b)] = id;
    }
    if (dropout) {
      MatrixX<T> mask = detail::dropout_mask<T>(es, bs, keep_prob, *dropout_rng);
      xh.topRows(es).array() *= mask.array();
      if (tr) tr->mask_in = std::move(mask);
    }
    xh.bottomRows(hs) = h;

    z.noalias() = model.w_gates * xh;
    z.colwise() += model.b_gates;
    MatrixX<T> acts(4 * hs, bs);
    acts.topRows(hs) = z.topRows(hs).array().logistic();                    // i
    acts.middleRows(hs, hs) = z.middleRows(hs, hs).array().logistic();      // f
    acts.middleRows(2 * hs, hs) = z.middleRows(2 * hs, hs).array().tanh();  // g
    acts.bottomRows(hs) = z.bottomRows(hs).array().logistic();              // o

    c_new = acts.middleRows(hs, hs).cwiseProduct(c) +
            acts.topRows(hs).cwiseProduct(acts.middleRows(2 * hs, hs));
    tanh_c = c_new.array().tanh();
    h_new = acts.bottomRows(hs).cwiseProduct(tanh_c);

    hd = h_new;
    if (dropout) {
      MatrixX<T> mask = detail::dropout_mask<T>(hs, bs, keep_prob, *dropout_rng);
      hd.array() *= mask.array();
      if (tr) tr->mask_out = std::move(mask);
    }

    logits.noalias() = model.w_out * hd;
    logits.colwise() += model.b_out;

    // Stable softmax cross entropy; dlogits is computed immediately so the
    // V x B probability matrix never has to be stored per step.
    Eigen::Matrix<T, 1, Eigen::Dynamic> colmax = logits.colwise().maxCoeff();
    dlogits = (logits.rowwise() - colmax).array().exp();
    Eigen::Matrix<T, 1, Eigen::Dynamic> sums = dlogits.colwise().sum();
    for (int32_t b = 0; b < bs; ++b) {
      const int32_t target = batch.out(b, t);
      if (target < 0 || target >= model.vocab_size()) {
        throw std::out_of_range("run_bptt_block: target id outside vocabulary");
      }
      loss_sum += std::log(static_cast<double>(sums[b])) -
                  static_cast<double>(logits(target, b) - colmax[b]);
    }

    if (backward) {
      dlogits.array().rowwise() /= sums.array();
      for (int32_t b = 0; b < bs; ++b) dlogits(batch.out(b, t), b) -= T(1);
      dlogits *= static_cast<T>(1.0 / bs);

      grads->w_out.noalias() += dlogits * hd.transpose();
      grads->b_out += dlogits.rowwise().sum();
      tr->dh_out = model.w_out.transpose() * dlogits;
      tr->xh = xh;
      tr->acts = std::move(acts);
      tr->c_prev = c;
      tr->tanh_c = tanh_c;
    }

    c = c_new;
    h = h_new;
  }

  if (backward) {
    MatrixX<T> dh_rec = MatrixX<T>::Zero(hs, bs);
    MatrixX<T> dc_rec = MatrixX<T>::Zero(hs, bs);
    MatrixX<T> dh, dc, dz(4 * hs, bs), dxh(es + hs, bs);
    for (int32_t t = steps - 1; t >= 0; --t) {
      auto& tr = trace[static_cast<size_t>(t)];
      dh = tr.dh_out;
      if (tr.mask_out.size() > 0) dh.array() *= tr.mask_out.array();
      dh += dh_rec;

      auto i = tr.acts.topRows(hs).array();
      auto f = tr.acts.middleRows(hs, hs).array();
      auto g = tr.acts.middleRows(2 * hs, hs).array();
      auto o = tr.acts.bottomRows(hs).array();
      auto tc = tr.tanh_c.array();

      dc = (dh.array() * o * (T(1) - tc * tc)).matrix() + dc_rec;
      dz.bottomRows(hs) = (dh.array() * tc * o * (T(1) - o)).matrix();          // o
      dz.topRows(hs) = (dc.array() * g * i * (T(1) - i)).matrix();              // i
      dz.middleRows(hs, hs) =
          (dc.array() * tr.c_prev.array() * f * (T(1) - f)).matrix();           // f
      dz.middleRows(2 * hs, hs) = (dc.array() * i * (T(1) - g * g)).matrix();   // g

      grads->w_gates.noalias() += dz * tr.xh.transpose();
      grads->b_gates += dz.rowwise().sum();

      dxh.noalias() = model.w_gates.transpose() * dz;
      dh_rec = dxh.bottomRows(hs);
      dc_rec = dc.cwiseProduct(tr.acts.middleRows(hs, hs));
      for (int32_t b = 0; b < bs; ++b) {
        if (tr.reset[static_cast<size_t>(b)]) {
          dh_rec.col(b).setZero();
          dc_rec.col(b).setZero();
        }
      }

      if (tr.mask_in.size() > 0) {
        dxh.topRows(es).array() *= tr.mask_in.array();
      }
      for (int32_t b = 0; b < bs; ++b) {
        grads->embedding.row(tr.ids[static_cast<size_t>(b)]) +=
            dxh.col(b).head(es).transpose();
      }
    }
  }

  return loss_sum;
}

/// Loss used by the gradient routines: mean over lanes of the summed
/// cross entropy across the block, from a zero initial state, no dropout.
template <typename T>
double block_loss(const LstmModel<T>& model, const Batch& batch, SequenceMode mode,
                  int32_t eos_id) {
  MatrixX<T> h = MatrixX<T>::Zero(model.hidden_size(), batch.batch_size);
  MatrixX<T> c = MatrixX<T>::Zero(model.hidden_size(), batch.batch_size);
  return run_bptt_block<T>(model, batch, h, c, mode, eos_id) / batch.batch_size;
}

template <typename T>
Gradients<T> analytic_gradients(const LstmModel<T>& model, const Batch& batch,
                                SequenceMode mode, int32_t eos_id) {
  Gradients<T> g = Gradients<T>::zero_like(model);
  MatrixX<T> h = MatrixX<T>::Zero(model.hidden_size(), batch.batch_size);
  MatrixX<T> c = MatrixX<T>::Zero(model.hidden_size(), batch.batch_size);
  run_bptt_block<T>(model, batch, h, c, mode, eos_id, 1.0, nullptr, &g);
  return g;
}

/// Central finite differences over every parameter. Only meaningful for
/// small models; cost is two full forward passes per parameter.
template <typename T>
Gradients<T> numeric_gradients(LstmModel<T>& model, const Batch& batch, SequenceMode mode,
                               int32_t eos_id, double step = 1e-5) {
  Gradients<T> g = Gradients<T>::zero_like(model);
  for_each_parameter(model, [&](const char* name, auto& param) {
    auto grad_field = [&]() -> T* {
      if (std::string(name) == "embedding") return g.embedding.data();
      if (std::string(name) == "w_gates") return g.w_gates.data();
      if (std::string(name) == "b_gates") return g.b_gates.data();
      if (std::string(name) == "w_out") return g.w_out.data();
      return g.b_out.data();
    }();
    for (Eigen::Index k = 0; k < param.size(); ++k) {
      const T saved = param.data()[k];
      param.data()[k] = saved + static_cast<T>(step);
      const double up = block_loss(model, batch, mode, eos_id);
      param.data()[k] = saved - static_cast<T>(step);
      const double down = block_loss(model, batch, mode, eos_id);
      param.data()[k] = saved;
      grad_field[k] = static_cast<T>((up - down) / (2.0 * step));
    }
  });
  return g;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::map<std::string, double> per_tensor;
};

/// Per-coefficient relative error |a-n| / max(1e-4, |a| + |n|): an
/// absolute floor keeps finite-difference noise on near-zero gradients
/// from registering as disagreement.
template <typename T>
GradCheckReport compare_gradients(Gradients<T>& analytic, Gradients<T>& numeric) {
  GradCheckReport report;
  auto compare = [&](const char* name, const auto& a, const auto& n) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double av = static_cast<double>(a.data()[k]);
      const double nv = static_cast<double>(n.data()[k]);
      const double rel = std::abs(av - nv) / std::max(1e-4, std::abs(av) + std::abs(nv));
      worst = std::max(worst, rel);
    }
    report.per_tensor[name] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  };
  compare("embedding", analytic.embedding, numeric.embedding);
  compare("w_gates", analytic.w_gates, numeric.w_gates);
  compare("b_gates", analytic.b_gates, numeric.b_gates);
  compare("w_out", analytic.w_out, numeric.w_out);
  compare("b_out", analytic.b_out, numeric.b_out);
  return report;
}

/// Validates the BPTT implementation against central finite differences.
template <typename T>
GradCheckReport gradient_check(LstmModel<T>& model, const Batch& batch,
                               SequenceMode mode = SequenceMode::kDiscourse,
                               int32_t eos_id = -1, double step = 1e-5) {
  if (batch.batch_size < 1 || batch.steps < 1 || batch.input.empty()) {
    throw std::invalid_argument("gradient_check: zero-length batch");
  }
  Gradients<T> analytic = analytic_gradients(model, batch, mode, eos_id);
  Gradients<T> numeric = numeric_gradients(model, batch, mode, eos_id, step);
  return compare_gradients(analytic, numeric);
}

/// Stop rule: count how often validation perplexity has failed to improve
/// on the best seen so far (cumulatively, not consecutively) and stop once
/// that count reaches patience.
class EarlyStopping {
 public:
  explicit EarlyStopping(int32_t patience) : patience_(patience) {}

  /// Returns true when training should stop.
  bool observe(double valid_ppl) {
    if (valid_ppl < best_) {
      best_ = valid_ppl;
      improved_ = true;
      return false;
    }
    improved_ = false;
    return ++bad_count_ >= patience_;
  }

  bool improved_last() const { return improved_; }
  double best() const { return best_; }
  int32_t bad_count() const { return bad_count_; }

 private:
  int32_t patience_;
  int32_t bad_count_ = 0;
  bool improved_ = false;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochLog {
  int32_t epoch = 0;
  double lr = 0.0;
  double train_ppl = 0.0;
  double valid_ppl = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int32_t best_epoch = 0;
  double best_valid_ppl = 0.0;
};

/// SGD with truncated BPTT and global-norm gradient clipping, following a
/// constant-then-exponential learning-rate schedule. Validation perplexity
/// is checked after each epoch; training stops once it has failed to
/// improve `patience` times (or at max_epochs) and the parameters of the
/// best-validation epoch are restored.
template <typename T>
TrainResult train(LstmModel<T>& model, const TokenStream& train_stream,
                  const TokenStream& valid_stream, const TrainConfig& config,
                  SequenceMode mode, std::ostream* progress = nullptr) {
  config.validate();
  if (train_stream.vocab_size != model.vocab_size() ||
      valid_stream.vocab_size != model.vocab_size()) {
    throw std::runtime_error("train: stream vocabulary does not match the model");
  }
  const int32_t eos = train_stream.eos_id;
  std::mt19937_64 dropout_rng(config.seed);

  TrainResult result;
  result.best_valid_ppl = std::numeric_limits<double>::infinity();
  LstmModel<T> best = model;
  EarlyStopping stopper(config.patience);
  double lr = config.initial_lr;
  Gradients<T> grads = Gradients<T>::zero_like(model);

  for (int32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (epoch > config.constant_lr_epochs && epoch > 1) lr *= config.lr_decay;

    BatchIterator it(train_stream, config.batch_size, config.unroll_steps);
    MatrixX<T> h = MatrixX<T>::Zero(config.hidden_size, config.batch_size);
    MatrixX<T> c = MatrixX<T>::Zero(config.hidden_size, config.batch_size);
    double loss_sum = 0.0;
    int64_t token_count = 0;
    while (it.has_next()) {
      Batch batch = it.next();
      grads.set_zero();
      const double block = run_bptt_block<T>(model, batch, h, c, mode, eos,
                                             config.dropout_keep_prob,
                                             config.dropout_keep_prob < 1.0 ? &dropout_rng : nullptr,
                                             &grads);
      if (!std::isfinite(block)) {
        throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += block;
      token_count += static_cast<int64_t>(batch.batch_size) * batch.steps;

      const double norm = std::sqrt(grads.squared_norm());
      if (norm > config.grad_clip_norm) {
        grads.scale(static_cast<T>(config.grad_clip_norm / norm));
      }
      const T step = static_cast<T>(lr);
      model.embedding -= step * grads.embedding;
      model.w_gates -= step * grads.w_gates;
      model.b_gates -= step * grads.b_gates;
      model.w_out -= step * grads.w_out;
      model.b_out -= step * grads.b_out;
    }

    const double train_ppl = std::exp(loss_sum / static_cast<double>(token_count));
    const double valid_ppl =
        evaluate_perplexity(model, valid_stream, EvalConfig::baseline(mode)).perplexity;

    result.log.push_back(EpochLog{epoch, lr, train_ppl, valid_ppl});
    if (progress) {
      *progress << "epoch " << epoch << "\tlr " << lr << "\ttrain_ppl " << train_ppl
                << "\tvalid_ppl " << valid_ppl << "\n";
    }

    const bool stop = stopper.observe(valid_ppl);
    if (stopper.improved_last()) {
      result.best_valid_ppl = valid_ppl;
      result.best_epoch = epoch;
      best = model;
    }
    if (stop) break;
  }

  model = best;
  return result;
}

inline void write_train_log(const TrainResult& result, std::ostream& out) {
  out << "epoch\tlr\ttrain_ppl\tvalid_ppl\n";
  char buf[128];
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.17g\t%.17g\n", e.epoch, e.lr, e.train_ppl,
                  e.valid_ppl);
    out << buf;
  }
}

}  // namespace cachelm
