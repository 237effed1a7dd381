#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ccts/errors.hpp"
#include "ccts/model.hpp"
#include "ccts/params.hpp"

namespace ccts {

// Per-parameter importance coefficients: the diagonal of the (empirical)
// Fisher information, estimated from squared log-likelihood gradients.
struct FisherDiag {
  Eigen::VectorXd F;
  int task = -1;
  long sample_count = 0;
};

// Post-task snapshot the limitation penalty anchors to: the parameters at
// task completion and the importance estimated there.
struct TaskAnchor {
  ParamVector theta;
  FisherDiag fisher;
};

// Where the acute-angle projection is applied: to the recursive estimate
// before the linear-minimization step, or to the resulting step direction.
enum class ProjectTarget { Estimator, Direction };

struct RuConfig {
  double lambda = 0.1;           // penalty strength; 0 disables the penalty exactly
  double schedule_exponent = 1.0;  // a in (0,1]; rho_t = eta_t = 1/(t+1)^a
  double radius = 0.0;           // constraint-ball radius; <= 0 picks 10*sqrt(param count)
  int gem_memory = 8;            // max stored per-task reference gradients
  int gem_snapshot = 64;         // samples used for each reference gradient
  bool lm_on = true;
  bool pm_on = true;
  bool gem_on = true;
  ProjectTarget project = ProjectTarget::Estimator;
  double fixed_rho = -1.0;       // > 0 pins rho_t (used by the reduction checks)
  double fixed_eta = -1.0;       // > 0 pins eta_t
  bool reset_state_per_task = false;

  void validate() const {
    if (lambda < 0) throw ArgumentError("ru config: lambda must be >= 0");
    if (!(schedule_exponent > 0.0) || schedule_exponent > 1.0)
      throw ArgumentError("ru config: schedule exponent must be in (0,1]");
    if (gem_memory < 1) throw ArgumentError("ru config: gem_memory must be >= 1");
    if (fixed_rho > 1.0 || fixed_eta > 1.0)
      throw ArgumentError("ru config: fixed rho/eta must be <= 1");
  }

  double ball_radius(long param_count) const {
    return radius > 0 ? radius : 10.0 * std::sqrt(static_cast<double>(param_count));
  }
};

inline std::pair<double, double> schedule(long t, double a) {
  if (t < 0) throw ArgumentError("schedule: negative step index");
  if (!(a > 0.0) || a > 1.0) throw ArgumentError("schedule: exponent must be in (0,1]");
  double v = 1.0 / std::pow(static_cast<double>(t + 1), a);
  return {v, v};
}

// One quadratic penalty term, lambda * sum_i F_i (theta_i - anchor_i)^2, and
// its gradient contribution 2 lambda F .* (theta - anchor).
inline double lm_penalty(const ParamVector& theta, const ParamVector& anchor,
                         const Eigen::VectorXd& fisher, double lambda, ParamVector& grad_out) {
  if (theta.size() != anchor.size() || theta.size() != fisher.size() ||
      theta.size() != grad_out.size())
    throw ArgumentError("lm_penalty: length mismatch");
  Eigen::ArrayXd diff = theta.array() - anchor.array();
  grad_out.array() += 2.0 * lambda * fisher.array() * diff;
  return lambda * (fisher.array() * diff.square()).sum();
}

// Regularized objective O = L + lambda * sum over completed tasks of the
// anchored quadratic penalty. lambda == 0 and an empty anchor set both leave
// (L, grad) exactly untouched.
inline double regularized_loss_and_grad(double loss, const ParamVector& grad_loss,
                                        const ParamVector& theta,
                                        const std::vector<TaskAnchor>& anchors, double lambda,
                                        ParamVector& grad_out) {
  grad_out = grad_loss;
  if (lambda == 0.0 || anchors.empty()) return loss;
  double total = loss;
  for (const auto& a : anchors) total += lm_penalty(theta, a.theta, a.fisher.F, lambda, grad_out);
  return total;
}

// Diagonal Fisher estimate: mean over samples of the squared gradient of the
// log-probability assigned to the true label. Squares are combined with the
// same pairwise tree as batch gradients, so duplicating a sample set leaves
// the estimate unchanged.
inline FisherDiag estimate_fisher_diag(const Model& model, const Dataset& data,
                                       std::span<const BatchItem> samples) {
  if (samples.empty()) throw ArgumentError("estimate_fisher_diag: no samples");
  std::vector<Eigen::VectorXd> sq(samples.size());
  ParamVector g;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& rec = data.records[static_cast<std::size_t>(samples[k].record)];
    model.sample_grad(rec, samples[k].prefix_len, g, true);
    sq[k] = g.array().square();
  }
  std::size_t n = sq.size();
  while (n > 1) {
    std::size_t half = (n + 1) / 2;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) sq[k] = sq[2 * k] + sq[2 * k + 1];
    if (n % 2 == 1) sq[half - 1] = std::move(sq[n - 1]);
    n = half;
  }
  FisherDiag f;
  f.F = sq[0] / static_cast<double>(samples.size());
  f.sample_count = static_cast<long>(samples.size());
  return f;
}

// Recursive gradient estimate d_t = grad_now + (1-rho)(d_{t-1} - grad_prev),
// where grad_prev is the same objective evaluated at the previous parameters
// on the same mini-batch. rho == 1 short-circuits to grad_now exactly.
struct EstimatorState {
  Eigen::VectorXd d;
  ParamVector theta_prev;  // evaluation point for grad_prev
  long t = 0;

  void reset(const ParamVector& theta) {
    d = Eigen::VectorXd::Zero(theta.size());
    theta_prev = theta;
    t = 0;
  }
};

inline const Eigen::VectorXd& update_recursive_estimator(EstimatorState& state,
                                                         const ParamVector& grad_now,
                                                         const ParamVector& grad_prev, double rho) {
  if (!(rho > 0.0) || rho > 1.0)
    throw ArgumentError("update_recursive_estimator: rho must be in (0,1]");
  if (grad_now.size() != grad_prev.size() || grad_now.size() != state.d.size())
    throw ArgumentError("update_recursive_estimator: length mismatch");
  if (rho == 1.0)
    state.d = grad_now;
  else
    state.d = grad_now + (1.0 - rho) * (state.d - grad_prev);
  ++state.t;
  return state.d;
}

// Linear-minimization update over an L2 ball: v = argmin_{v in ball} <d, v>
// has the closed form center - radius * d/||d||, and the convex step
// theta + eta (v - theta) stays inside the ball whenever theta was inside.
inline ParamVector fw_step(const ParamVector& theta, const Eigen::VectorXd& d, double eta,
                           const ParamVector& center, double radius) {
  if (!(eta > 0.0) || eta > 1.0) throw ArgumentError("fw_step: eta must be in (0,1]");
  if (!(radius > 0.0)) throw ArgumentError("fw_step: radius must be positive");
  if (theta.size() != d.size() || theta.size() != center.size())
    throw ArgumentError("fw_step: length mismatch");
  const double norm = d.norm();
  ParamVector v = norm > 0.0 ? ParamVector(center - (radius / norm) * d) : center;
  return theta + eta * (v - theta);
}

// Reference gradients of completed tasks, one averaged gradient per task,
// capped at the configured memory size (oldest dropped first).
struct GradientMemory {
  std::vector<Eigen::VectorXd> grads;
  std::vector<int> tasks;

  void add(int task, Eigen::VectorXd grad, int cap) {
    grads.push_back(std::move(grad));
    tasks.push_back(task);
    while (static_cast<int>(grads.size()) > cap) {
      grads.erase(grads.begin());
      tasks.erase(tasks.begin());
    }
  }
};

// Euclidean projection of g onto {g' : <g_k, g'> >= 0 for all stored g_k}.
// Solved through the dual quadratic program min_{v>=0} 1/2 v^T G G^T v + v^T G g
// with an active-set method (Lawson-Hanson style, finite termination);
// g' = g + G^T v. All-zero memory entries are skipped.
inline Eigen::VectorXd gem_project(const Eigen::VectorXd& g,
                                   const std::vector<Eigen::VectorXd>& memory) {
  std::vector<const Eigen::VectorXd*> refs;
  for (const auto& m : memory) {
    if (m.size() != g.size()) throw ArgumentError("gem_project: length mismatch");
    if (!m.allFinite()) throw ArgumentError("gem_project: non-finite memory gradient");
    if (m.squaredNorm() > 0.0) refs.push_back(&m);
  }
  if (refs.empty()) return g;
  const int k = static_cast<int>(refs.size());
  bool feasible = true;
  Eigen::VectorXd q(k);
  for (int i = 0; i < k; ++i) {
    q[i] = refs[static_cast<std::size_t>(i)]->dot(g);
    feasible &= q[i] >= 0.0;
  }
  if (feasible) return g;

  Eigen::MatrixXd A(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j)
      A(i, j) = A(j, i) = refs[static_cast<std::size_t>(i)]->dot(*refs[static_cast<std::size_t>(j)]);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  std::vector<bool> free_set(static_cast<std::size_t>(k), false);
  const double tol = 1e-12 * std::max(1.0, std::max(q.cwiseAbs().maxCoeff(),
                                                    A.diagonal().maxCoeff()));
  auto solve_free = [&](std::vector<int>& idx) {
    idx.clear();
    for (int i = 0; i < k; ++i)
      if (free_set[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Ap(n, n);
    Eigen::VectorXd qp(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      qp[r] = q[idx[static_cast<std::size_t>(r)]];
      for (Eigen::Index c = 0; c < n; ++c)
        Ap(r, c) = A(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
    }
    return Eigen::VectorXd(Ap.completeOrthogonalDecomposition().solve(-qp));
  };

  std::vector<int> idx;
  for (int outer = 0; outer < 32 * k + 32; ++outer) {
    Eigen::VectorXd w = -(q + A * v);  // negative dual gradient
    int pick = -1;
    double best = tol;
    for (int i = 0; i < k; ++i)
      if (!free_set[static_cast<std::size_t>(i)] && w[i] > best) {
        best = w[i];
        pick = i;
      }
    if (pick < 0) break;  // KKT satisfied
    free_set[static_cast<std::size_t>(pick)] = true;
    for (int inner = 0; inner < 32 * k + 32; ++inner) {
      Eigen::VectorXd z = solve_free(idx);
      bool nonneg = true;
      for (Eigen::Index r = 0; r < z.size(); ++r) nonneg &= z[r] >= -tol;
      if (nonneg) {
        v.setZero();
        for (std::size_t r = 0; r < idx.size(); ++r)
          v[idx[r]] = std::max(0.0, z[static_cast<Eigen::Index>(r)]);
        break;
      }
      // step toward z until the first free variable hits zero, then bind it
      double alpha = 1.0;
      int drop = -1;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double zr = z[static_cast<Eigen::Index>(r)];
        if (zr < 0.0) {
          const double vr = v[idx[r]];
          const double a = vr / (vr - zr);
          if (a < alpha) {
            alpha = a;
            drop = idx[r];
          }
        }
      }
      for (std::size_t r = 0; r < idx.size(); ++r)
        v[idx[r]] += alpha * (z[static_cast<Eigen::Index>(r)] - v[idx[r]]);
      if (drop < 0) break;
      v[drop] = 0.0;
      free_set[static_cast<std::size_t>(drop)] = false;
    }
  }
  Eigen::VectorXd out = g;
  for (int i = 0; i < k; ++i) out += v[i] * *refs[static_cast<std::size_t>(i)];
  return out;
}

struct RuStepDiagnostics {
  double loss = 0.0;            // raw mean cross-entropy of the batch
  double objective = 0.0;       // regularized objective O
  double rho = 0.0, eta = 0.0;
  double estimator_norm = 0.0;  // ||d|| (0 when the estimator is off)
  double grad_mean = 0.0;       // mean over parameters of the raw loss gradient
  bool in_ball = true;
  std::vector<double> memory_cosines;  // cosine of the applied direction to each g_k
};

// One restricted-update optimizer step, composing the limitation penalty, the
// recursive estimator, the acute-angle projection and the linear-minimization
// update. `theta` is updated in place and the model is left holding it.
inline RuStepDiagnostics ru_step(Model& model, const Dataset& data,
                                 std::span<const BatchItem> batch, ParamVector& theta,
                                 EstimatorState& state, const std::vector<TaskAnchor>& anchors,
                                 const GradientMemory& memory, const ParamVector& ball_center,
                                 const RuConfig& cfg) {
  cfg.validate();
  RuStepDiagnostics diag;
  const double lambda = cfg.lm_on ? cfg.lambda : 0.0;

  ParamVector grad_loss;
  diag.loss = model.loss_and_grad(data, batch, grad_loss);
  diag.grad_mean = grad_loss.mean();

  ParamVector grad_obj;
  diag.objective = regularized_loss_and_grad(diag.loss, grad_loss, theta, anchors, lambda, grad_obj);
  if (!std::isfinite(diag.objective) || !grad_obj.allFinite())
    throw NumericError("ru_step: non-finite objective", state.t);

  auto sched = schedule(state.t, cfg.schedule_exponent);
  diag.rho = cfg.fixed_rho > 0 ? cfg.fixed_rho : sched.first;
  diag.eta = cfg.fixed_eta > 0 ? cfg.fixed_eta : sched.second;

  Eigen::VectorXd applied;  // the direction whose memory angles are reported
  if (cfg.pm_on) {
    // grad_prev: same objective, same mini-batch, previous parameters
    ParamVector grad_prev_loss;
    model.unpack(state.theta_prev);
    double loss_prev = model.loss_and_grad(data, batch, grad_prev_loss);
    ParamVector grad_prev;
    regularized_loss_and_grad(loss_prev, grad_prev_loss, state.theta_prev, anchors, lambda,
                              grad_prev);
    model.unpack(theta);

    Eigen::VectorXd d = update_recursive_estimator(state, grad_obj, grad_prev, diag.rho);
    diag.estimator_norm = d.norm();
    const double radius = cfg.ball_radius(theta.size());
    if (cfg.gem_on && cfg.project == ProjectTarget::Estimator) {
      d = gem_project(d, memory.grads);
      applied = d;
      state.theta_prev = theta;
      theta = fw_step(theta, d, diag.eta, ball_center, radius);
    } else {
      state.theta_prev = theta;
      if (cfg.gem_on && cfg.project == ProjectTarget::Direction) {
        const double norm = d.norm();
        ParamVector v = norm > 0.0 ? ParamVector(ball_center - (radius / norm) * d) : ball_center;
        Eigen::VectorXd step_dir = gem_project(v - theta, memory.grads);
        applied = step_dir;
        theta = theta + diag.eta * step_dir;
      } else {
        applied = d;
        theta = fw_step(theta, d, diag.eta, ball_center, radius);
      }
    }
    diag.in_ball = (theta - ball_center).norm() <= radius * (1.0 + 1e-12);
  } else {
    // plain descent on the (possibly regularized) objective
    Eigen::VectorXd update = cfg.gem_on ? gem_project(grad_obj, memory.grads) : grad_obj;
    applied = update;
    state.theta_prev = theta;
    theta = theta - diag.eta * update;
    ++state.t;
  }
  model.unpack(theta);
  if (!theta.allFinite()) throw NumericError("ru_step: non-finite parameters", state.t);

  const double applied_norm = applied.norm();
  for (const auto& gk : memory.grads) {
    const double denom = applied_norm * gk.norm();
    diag.memory_cosines.push_back(denom > 0.0 ? applied.dot(gk) / denom : 0.0);
  }
  return diag;
}

}  // namespace ccts
