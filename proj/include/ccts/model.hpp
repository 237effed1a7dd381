#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/errors.hpp"
#include "ccts/params.hpp"
#include "ccts/rng.hpp"
#include "ccts/tlstm.hpp"

namespace ccts {

struct ModelConfig {
  int input_dim = 1;
  int hidden = 8;
  std::vector<int> mlp_hidden = {16};  // hidden widths; empty = linear head
  int class_count = 2;
  CombineMode combine = CombineMode::Add;

  // widths of the classification head including its input (h) and the logits
  std::vector<int> head_widths() const {
    std::vector<int> w;
    w.push_back(hidden);
    for (int v : mlp_hidden) w.push_back(v);
    w.push_back(class_count);
    return w;
  }
};

// Classification head: tanh hidden layers, linear logits.
struct MlpParams {
  std::vector<Eigen::MatrixXd> W;  // W[l]: widths[l+1] x widths[l]
  std::vector<Eigen::VectorXd> b;
};

using MlpGrads = MlpParams;

struct ForwardCache {
  std::vector<TLstmStepCache> steps;
  std::vector<Eigen::VectorXd> acts;  // acts[0] = final h, then post-activation per hidden layer
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

// One batch element: a record index and the prefix length to classify.
struct BatchItem {
  int record = 0;
  int prefix_len = 0;
};

namespace detail {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

// Canonical traversal order of all parameter blocks; the index map, pack()
// and unpack() follow it.
template <typename Cell, typename Mlp, typename MatFn, typename VecFn>
void visit_params(Cell& cell, Mlp& mlp, MatFn mat, VecFn vec) {
  mat(cell.W_d);
  vec(cell.b_d);
  mat(cell.W_f);
  mat(cell.U_f);
  vec(cell.b_f);
  mat(cell.W_i);
  mat(cell.U_i);
  vec(cell.b_i);
  mat(cell.W_c);
  mat(cell.U_c);
  vec(cell.b_c);
  mat(cell.W_o);
  mat(cell.U_o);
  vec(cell.b_o);
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    mat(mlp.W[l]);
    vec(mlp.b[l]);
  }
}

inline void zero_cell(TLstmParams& p) {
  for (auto* w : {&p.W_d, &p.W_f, &p.U_f, &p.W_i, &p.U_i, &p.W_c, &p.U_c, &p.W_o, &p.U_o})
    w->setZero();
  for (auto* b : {&p.b_d, &p.b_f, &p.b_i, &p.b_c, &p.b_o}) b->setZero();
}

inline ParamVector pack_params(const TLstmParams& cell, const MlpParams& mlp, long total) {
  ParamVector flat(total);
  long off = 0;
  visit_params(cell, mlp,
               [&](const Eigen::MatrixXd& m) {
                 Eigen::Map<Eigen::VectorXd>(flat.data() + off, m.size()) =
                     Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
                 off += m.size();
               },
               [&](const Eigen::VectorXd& v) {
                 flat.segment(off, v.size()) = v;
                 off += v.size();
               });
  return flat;
}

}  // namespace detail

// T-LSTM encoder plus MLP head over the final hidden state. Parameters are
// owned here; pack()/unpack() expose the flat view the strategy layer uses.
class Model {
 public:
  Model() = default;

  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    cell_.resize(cfg.input_dim, cfg.hidden);
    detail::zero_cell(cell_);
    auto widths = cfg.head_widths();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      mlp_.W.push_back(Eigen::MatrixXd::Zero(widths[l + 1], widths[l]));
      mlp_.b.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
    }
    build_index_map();
  }

  static Model init(const ModelConfig& cfg, std::uint64_t seed) {
    Model m(cfg);
    Rng rng(derive_seed(seed, "init"));
    const double r = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    for (auto* w : {&m.cell_.W_d, &m.cell_.W_f, &m.cell_.U_f, &m.cell_.W_i, &m.cell_.U_i,
                    &m.cell_.W_c, &m.cell_.U_c, &m.cell_.W_o, &m.cell_.U_o})
      fill_uniform(*w, rng, r);
    m.cell_.b_f.setOnes();  // open forget gates at the start of training
    for (std::size_t l = 0; l < m.mlp_.W.size(); ++l)
      fill_uniform(m.mlp_.W[l], rng, 1.0 / std::sqrt(static_cast<double>(m.mlp_.W[l].cols())));
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  const TLstmParams& cell() const { return cell_; }
  TLstmParams& cell() { return cell_; }
  const MlpParams& mlp() const { return mlp_; }
  MlpParams& mlp() { return mlp_; }
  const IndexMap& index_map() const { return map_; }
  long param_count() const { return map_.total; }

  ParamVector pack() const { return detail::pack_params(cell_, mlp_, map_.total); }

  void unpack(const ParamVector& flat) {
    if (flat.size() != map_.total) throw ArgumentError("unpack: parameter vector length mismatch");
    long off = 0;
    detail::visit_params(cell_, mlp_,
                         [&](Eigen::MatrixXd& m) {
                           Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) =
                               Eigen::Map<const Eigen::VectorXd>(flat.data() + off, m.size());
                           off += m.size();
                         },
                         [&](Eigen::VectorXd& v) {
                           v = flat.segment(off, v.size());
                           off += v.size();
                         });
  }

  // Class probabilities for one prefix; delta_1 = 0 (the first observation has
  // no predecessor).
  Eigen::VectorXd forward(const TimeSeriesRecord& rec, int prefix_len,
                          ForwardCache* cache = nullptr) const {
    if (prefix_len < 1 || prefix_len > rec.length())
      throw ArgumentError("forward: prefix length out of range");
    if (cache) cache->steps.resize(static_cast<std::size_t>(prefix_len));
    TLstmState state = TLstmState::zero(cfg_.hidden);
    for (int m = 0; m < prefix_len; ++m) {
      double dt = m == 0 ? 0.0
                         : rec.timestamps[static_cast<std::size_t>(m)] -
                               rec.timestamps[static_cast<std::size_t>(m - 1)];
      state = tlstm_step(cell_, rec.values.row(m).transpose(), dt, state, cfg_.combine,
                         cache ? &cache->steps[static_cast<std::size_t>(m)] : nullptr);
      if (!state.h.allFinite() || !state.C.allFinite())
        throw NumericError("forward: non-finite cell state", m);
    }
    std::vector<Eigen::VectorXd> acts;
    acts.push_back(state.h);
    Eigen::VectorXd a = state.h;
    for (std::size_t l = 0; l < mlp_.W.size(); ++l) {
      Eigen::VectorXd z = mlp_.W[l] * a + mlp_.b[l];
      if (l + 1 < mlp_.W.size()) {
        a = z.array().tanh().matrix();
        acts.push_back(a);
      } else {
        a = std::move(z);
      }
    }
    if (!a.allFinite()) throw NumericError("forward: non-finite logits", prefix_len);
    Eigen::VectorXd probs = detail::softmax(a);
    if (cache) {
      cache->acts = std::move(acts);
      cache->logits = a;
      cache->probs = probs;
    }
    return probs;
  }

  // Mean cross-entropy over the batch and its exact gradient. Per-sample
  // contributions are combined with a fixed pairwise reduction tree, so the
  // result is independent of evaluation order and a duplicated batch yields
  // the identical mean.
  double loss_and_grad(const Dataset& data, std::span<const BatchItem> batch,
                       ParamVector& grad) const {
    if (batch.empty()) throw ArgumentError("loss_and_grad: empty batch");
    std::vector<double> losses(batch.size());
    std::vector<ParamVector> grads(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k)
      losses[k] = sample_grad(data.records[static_cast<std::size_t>(batch[k].record)],
                              batch[k].prefix_len, grads[k], false);
    pairwise_reduce(losses, grads);
    const double inv = 1.0 / static_cast<double>(batch.size());
    grad = grads[0] * inv;
    return losses[0] * inv;
  }

  double batch_loss(const Dataset& data, std::span<const BatchItem> batch) const {
    if (batch.empty()) throw ArgumentError("batch_loss: empty batch");
    double sum = 0.0;
    for (const auto& item : batch) {
      const auto& rec = data.records[static_cast<std::size_t>(item.record)];
      Eigen::VectorXd p = forward(rec, item.prefix_len);
      sum += -std::log(std::max(p[rec.label], 1e-300));
    }
    return sum / static_cast<double>(batch.size());
  }

  // Cross-entropy of one sample and its exact gradient via backpropagation
  // through time; with loglik=true the gradient of log p(true label) is
  // produced instead (the Fisher estimator squares it, so only the sign
  // differs).
  double sample_grad(const TimeSeriesRecord& rec, int prefix_len, ParamVector& grad,
                     bool loglik) const {
    ForwardCache cache;
    forward(rec, prefix_len, &cache);
    const int label = rec.label;
    double loss = -std::log(std::max(cache.probs[label], 1e-300));

    Eigen::VectorXd dlogits = cache.probs;
    dlogits[label] -= 1.0;
    if (loglik) dlogits = -dlogits;

    TLstmGrads cg;
    cg.resize(cfg_.input_dim, cfg_.hidden);
    detail::zero_cell(cg);
    MlpGrads mg;
    for (std::size_t l = 0; l < mlp_.W.size(); ++l) {
      mg.W.push_back(Eigen::MatrixXd::Zero(mlp_.W[l].rows(), mlp_.W[l].cols()));
      mg.b.push_back(Eigen::VectorXd::Zero(mlp_.b[l].size()));
    }

    Eigen::VectorXd dz = dlogits;
    for (std::size_t l = mlp_.W.size(); l-- > 0;) {
      mg.W[l].noalias() += dz * cache.acts[l].transpose();
      mg.b[l] += dz;
      Eigen::VectorXd da = mlp_.W[l].transpose() * dz;
      if (l > 0)
        dz = (da.array() * (1.0 - cache.acts[l].array().square())).matrix();
      else
        dz = std::move(da);  // gradient w.r.t. the final hidden state
    }

    Eigen::VectorXd dh = std::move(dz);
    Eigen::VectorXd dC = Eigen::VectorXd::Zero(cfg_.hidden);
    for (std::size_t m = cache.steps.size(); m-- > 0;) {
      Eigen::VectorXd dh_prev, dC_prev;
      tlstm_step_backward(cell_, cache.steps[m], cfg_.combine, dh, dC, cg, dh_prev, dC_prev);
      dh = std::move(dh_prev);
      dC = std::move(dC_prev);
    }

    grad = detail::pack_params(cg, mg, map_.total);
    return loss;
  }

 private:
  static void fill_uniform(Eigen::MatrixXd& m, Rng& rng, double r) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-r, r);
  }

  void build_index_map() {
    map_.slices.clear();
    long off = 0;
    auto add = [&](std::string name, SliceKind kind, Gate gate, int layer, int rows, int cols) {
      ParamSlice s;
      s.name = std::move(name);
      s.kind = kind;
      s.gate = gate;
      s.mlp_layer = layer;
      s.offset = off;
      s.rows = rows;
      s.cols = cols;
      off += s.size();
      map_.slices.push_back(std::move(s));
    };
    const int H = cfg_.hidden, d = cfg_.input_dim;
    add("W_d", SliceKind::RecurrentWeight, Gate::Decomposition, -1, H, H);
    add("b_d", SliceKind::CellBias, Gate::Decomposition, -1, H, 1);
    const char* gate_names[] = {"f", "i", "c", "o"};
    const Gate gates[] = {Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output};
    for (int k = 0; k < 4; ++k) {
      add(std::string("W_") + gate_names[k], SliceKind::InputWeight, gates[k], -1, H, d);
      add(std::string("U_") + gate_names[k], SliceKind::RecurrentWeight, gates[k], -1, H, H);
      add(std::string("b_") + gate_names[k], SliceKind::CellBias, gates[k], -1, H, 1);
    }
    auto widths = cfg_.head_widths();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      add("mlp_W" + std::to_string(l), SliceKind::MlpWeight, Gate::None, static_cast<int>(l),
          widths[l + 1], widths[l]);
      add("mlp_b" + std::to_string(l), SliceKind::MlpBias, Gate::None, static_cast<int>(l),
          widths[l + 1], 1);
    }
    map_.total = off;
  }

  static void pairwise_reduce(std::vector<double>& losses, std::vector<ParamVector>& grads) {
    std::size_t n = losses.size();
    while (n > 1) {
      std::size_t half = (n + 1) / 2;
      for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        losses[k] = losses[2 * k] + losses[2 * k + 1];
        grads[k] = grads[2 * k] + grads[2 * k + 1];
      }
      if (n % 2 == 1) {
        losses[half - 1] = losses[n - 1];
        grads[half - 1] = std::move(grads[n - 1]);
      }
      n = half;
    }
  }

  ModelConfig cfg_;
  TLstmParams cell_;
  MlpParams mlp_;
  IndexMap map_;
};

}  // namespace ccts
