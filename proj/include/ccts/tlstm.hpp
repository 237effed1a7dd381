#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ccts/errors.hpp"

namespace ccts {

// Elapsed-time discount g(dt) = 1/ln(e + dt); equals 1 at dt = 0 and decays
// monotonically, so short-term memory fades across long sampling gaps.
inline double elapsed_discount(double delta_t) {
  if (!(delta_t >= 0.0)) throw ArgumentError("elapsed_discount: negative elapsed time");
  return 1.0 / std::log(std::exp(1.0) + delta_t);
}

// How the long-term memory is recombined with the discounted short-term
// component. Add is the default; Subtract reproduces the sign as printed in
// some writeups of the cell.
enum class CombineMode { Add, Subtract };

// Time-aware LSTM cell parameters. Gate weights W_* act on the input (H x d),
// U_* on the previous hidden state (H x H); W_d/b_d decompose the previous
// memory cell into its short-term component.
struct TLstmParams {
  Eigen::MatrixXd W_d;
  Eigen::VectorXd b_d;
  Eigen::MatrixXd W_f, U_f;
  Eigen::VectorXd b_f;
  Eigen::MatrixXd W_i, U_i;
  Eigen::VectorXd b_i;
  Eigen::MatrixXd W_c, U_c;
  Eigen::VectorXd b_c;
  Eigen::MatrixXd W_o, U_o;
  Eigen::VectorXd b_o;

  int hidden() const { return static_cast<int>(W_d.rows()); }
  int input_dim() const { return static_cast<int>(W_f.cols()); }

  void resize(int input_dim, int hidden) {
    W_d.resize(hidden, hidden);
    b_d.resize(hidden);
    for (auto* w : {&W_f, &W_i, &W_c, &W_o}) w->resize(hidden, input_dim);
    for (auto* u : {&U_f, &U_i, &U_c, &U_o}) u->resize(hidden, hidden);
    for (auto* b : {&b_f, &b_i, &b_c, &b_o}) b->resize(hidden);
  }
};

// Gradients accumulate in a mirror of the parameter struct.
using TLstmGrads = TLstmParams;

struct TLstmState {
  Eigen::VectorXd h, C;

  static TLstmState zero(int hidden) {
    TLstmState s;
    s.h = Eigen::VectorXd::Zero(hidden);
    s.C = Eigen::VectorXd::Zero(hidden);
    return s;
  }
};

// Everything the backward pass needs about one forward step.
struct TLstmStepCache {
  Eigen::VectorXd x;
  double discount = 1.0;
  Eigen::VectorXd h_prev, C_prev;
  Eigen::VectorXd CS, Cstar, f, i, Ct, o, C, tanhC, h;
};

namespace detail {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace detail

// One cell step with a precomputed discount. The previous memory is split into
// short-term (learned via W_d) and long-term parts; only the short-term part
// is discounted before the gates run.
inline TLstmState tlstm_step_discounted(const TLstmParams& p, const Eigen::VectorXd& x,
                                        double discount, const TLstmState& state,
                                        CombineMode combine, TLstmStepCache* cache = nullptr) {
  const double s = combine == CombineMode::Add ? 1.0 : -1.0;
  Eigen::VectorXd CS = (p.W_d * state.C + p.b_d).array().tanh().matrix();
  Eigen::VectorXd Cstar = state.C + (s * discount - 1.0) * CS;
  Eigen::VectorXd f = detail::sigmoid(p.W_f * x + p.U_f * state.h + p.b_f);
  Eigen::VectorXd i = detail::sigmoid(p.W_i * x + p.U_i * state.h + p.b_i);
  Eigen::VectorXd Ct = (p.W_c * x + p.U_c * state.h + p.b_c).array().tanh().matrix();
  Eigen::VectorXd C = (f.array() * Cstar.array() + i.array() * Ct.array()).matrix();
  Eigen::VectorXd o = detail::sigmoid(p.W_o * x + p.U_o * state.h + p.b_o);
  Eigen::VectorXd tanhC = C.array().tanh().matrix();
  TLstmState next;
  next.C = C;
  next.h = (o.array() * tanhC.array()).matrix();
  if (cache) {
    cache->x = x;
    cache->discount = discount;
    cache->h_prev = state.h;
    cache->C_prev = state.C;
    cache->CS = std::move(CS);
    cache->Cstar = std::move(Cstar);
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->Ct = std::move(Ct);
    cache->o = std::move(o);
    cache->C = next.C;
    cache->tanhC = std::move(tanhC);
    cache->h = next.h;
  }
  return next;
}

inline TLstmState tlstm_step(const TLstmParams& p, const Eigen::VectorXd& x, double delta_t,
                             const TLstmState& state, CombineMode combine,
                             TLstmStepCache* cache = nullptr) {
  return tlstm_step_discounted(p, x, elapsed_discount(delta_t), state, combine, cache);
}

// Reverse-mode step: consumes d(h_m), d(C_m), produces d(h_{m-1}), d(C_{m-1})
// and accumulates parameter gradients.
inline void tlstm_step_backward(const TLstmParams& p, const TLstmStepCache& c, CombineMode combine,
                                const Eigen::VectorXd& dh, const Eigen::VectorXd& dC_in,
                                TLstmGrads& g, Eigen::VectorXd& dh_prev, Eigen::VectorXd& dC_prev) {
  const double s = combine == CombineMode::Add ? 1.0 : -1.0;
  Eigen::ArrayXd dao = dh.array() * c.tanhC.array() * c.o.array() * (1.0 - c.o.array());
  Eigen::ArrayXd dC = dC_in.array() + dh.array() * c.o.array() * (1.0 - c.tanhC.array().square());
  Eigen::ArrayXd daf = dC * c.Cstar.array() * c.f.array() * (1.0 - c.f.array());
  Eigen::ArrayXd dai = dC * c.Ct.array() * c.i.array() * (1.0 - c.i.array());
  Eigen::ArrayXd dac = dC * c.i.array() * (1.0 - c.Ct.array().square());
  Eigen::ArrayXd dCstar = dC * c.f.array();
  Eigen::ArrayXd dpre_d =
      (s * c.discount - 1.0) * dCstar * (1.0 - c.CS.array().square());

  g.W_f.noalias() += daf.matrix() * c.x.transpose();
  g.U_f.noalias() += daf.matrix() * c.h_prev.transpose();
  g.b_f += daf.matrix();
  g.W_i.noalias() += dai.matrix() * c.x.transpose();
  g.U_i.noalias() += dai.matrix() * c.h_prev.transpose();
  g.b_i += dai.matrix();
  g.W_c.noalias() += dac.matrix() * c.x.transpose();
  g.U_c.noalias() += dac.matrix() * c.h_prev.transpose();
  g.b_c += dac.matrix();
  g.W_o.noalias() += dao.matrix() * c.x.transpose();
  g.U_o.noalias() += dao.matrix() * c.h_prev.transpose();
  g.b_o += dao.matrix();
  g.W_d.noalias() += dpre_d.matrix() * c.C_prev.transpose();
  g.b_d += dpre_d.matrix();

  dh_prev = p.U_f.transpose() * daf.matrix() + p.U_i.transpose() * dai.matrix() +
            p.U_c.transpose() * dac.matrix() + p.U_o.transpose() * dao.matrix();
  dC_prev = dCstar.matrix() + p.W_d.transpose() * dpre_d.matrix();
}

}  // namespace ccts
