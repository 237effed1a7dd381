// Independent reference implementations used only by tests: finite-difference
// gradients, exhaustive pair counting, brute-force projections and exhaustive
// segmentation. None of them share code paths with the library routines they
// check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/metrics.hpp"
#include "ccts/model.hpp"

namespace oracle {

// central finite differences of the mean batch cross-entropy
inline ccts::ParamVector fd_gradient(const ccts::Model& model_in, const ccts::Dataset& data,
                                     std::span<const ccts::BatchItem> batch, double h = 1e-5) {
  ccts::Model model = model_in;
  ccts::ParamVector theta = model.pack();
  ccts::ParamVector g(theta.size());
  ccts::ParamVector probe = theta;
  for (long i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    model.unpack(probe);
    double lp = model.batch_loss(data, batch);
    probe[i] = theta[i] - h;
    model.unpack(probe);
    double lm = model.batch_loss(data, batch);
    probe[i] = theta[i];
    g[i] = (lp - lm) / (2.0 * h);
  }
  return g;
}

inline bool grad_close(const ccts::ParamVector& a, const ccts::ParamVector& b,
                       double rel = 1e-4, double abs_floor = 1e-8) {
  for (long i = 0; i < a.size(); ++i) {
    double diff = std::abs(a[i] - b[i]);
    double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (diff > rel * scale + abs_floor) return false;
  }
  return true;
}

// exhaustive Mann-Whitney pair counting
inline double auc_pairs(const ccts::ScoredSet& set) {
  double wins = 0.0;
  long n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    if (set.labels[i] == 0) continue;
    ++n_pos;
    for (std::size_t j = 0; j < set.labels.size(); ++j) {
      if (set.labels[j] != 0) continue;
      if (set.scores[i] > set.scores[j])
        wins += 1.0;
      else if (set.scores[i] == set.scores[j])
        wins += 0.5;
    }
  }
  for (int l : set.labels) n_neg += (l == 0);
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Exact minimizer of ||g' - g|| subject to <g_k, g'> >= 0, by enumerating
// active sets: for each subset A, project g onto {x : G_A x = 0} and keep the
// closest candidate that satisfies every constraint.
inline Eigen::VectorXd gem_bruteforce_active_sets(const Eigen::VectorXd& g,
                                                  const std::vector<Eigen::VectorXd>& memory) {
  std::vector<const Eigen::VectorXd*> refs;
  for (const auto& m : memory)
    if (m.squaredNorm() > 0.0) refs.push_back(&m);
  const int k = static_cast<int>(refs.size());
  auto feasible = [&](const Eigen::VectorXd& x) {
    for (const auto* r : refs)
      if (r->dot(x) < -1e-9 * std::max(1.0, r->norm() * x.norm())) return false;
    return true;
  };
  Eigen::VectorXd best = g;
  double best_dist = feasible(g) ? 0.0 : std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < k; ++i)
      if (mask & (1 << i)) act.push_back(i);
    Eigen::MatrixXd G(static_cast<Eigen::Index>(act.size()), g.size());
    for (std::size_t r = 0; r < act.size(); ++r)
      G.row(static_cast<Eigen::Index>(r)) = refs[static_cast<std::size_t>(act[r])]->transpose();
    Eigen::MatrixXd gram = G * G.transpose();
    Eigen::VectorXd coef = gram.completeOrthogonalDecomposition().solve(G * g);
    Eigen::VectorXd cand = g - G.transpose() * coef;
    if (!feasible(cand)) continue;
    double dist = (cand - g).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

// Dense grid search over the dual variables v >= 0 (g' = g + G^T v), refined
// around the incumbent every round, then polished by an exact solve on the
// active set the grid identified.
inline Eigen::VectorXd gem_bruteforce_dual_grid(const Eigen::VectorXd& g,
                                                const std::vector<Eigen::VectorXd>& memory,
                                                int rounds = 18, int points = 11) {
  std::vector<const Eigen::VectorXd*> refs;
  for (const auto& m : memory)
    if (m.squaredNorm() > 0.0) refs.push_back(&m);
  const int k = static_cast<int>(refs.size());
  if (k == 0) return g;

  Eigen::MatrixXd G(k, g.size());
  for (int i = 0; i < k; ++i) G.row(i) = refs[static_cast<std::size_t>(i)]->transpose();
  Eigen::MatrixXd A = G * G.transpose();
  Eigen::VectorXd q = G * g;
  auto dual_obj = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(A * v) + q.dot(v); };

  Eigen::VectorXd lo = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd hi(k);
  for (int i = 0; i < k; ++i)
    hi[i] = 2.0 * g.norm() / refs[static_cast<std::size_t>(i)]->norm() + 1.0;

  Eigen::VectorXd best_v = Eigen::VectorXd::Zero(k);
  for (int round = 0; round < rounds; ++round) {
    Eigen::VectorXd v(k), step(k);
    for (int i = 0; i < k; ++i) step[i] = (hi[i] - lo[i]) / (points - 1);
    std::vector<int> digit(static_cast<std::size_t>(k), 0);
    double best_obj = std::numeric_limits<double>::infinity();
    bool done = false;
    while (!done) {
      for (int i = 0; i < k; ++i) v[i] = lo[i] + step[i] * digit[static_cast<std::size_t>(i)];
      double obj = dual_obj(v);
      if (obj < best_obj) {
        best_obj = obj;
        best_v = v;
      }
      int pos = 0;
      while (pos < k && ++digit[static_cast<std::size_t>(pos)] == points) {
        digit[static_cast<std::size_t>(pos)] = 0;
        ++pos;
      }
      done = pos == k;
    }
    for (int i = 0; i < k; ++i) {
      double w = 2.0 * step[i];
      lo[i] = std::max(0.0, best_v[i] - w);
      hi[i] = best_v[i] + w;
    }
  }

  // exact solve on the active set the grid suggests, trying several
  // thresholds in case a variable sits near the boundary
  double cell = 0.0;
  for (int i = 0; i < k; ++i) cell = std::max(cell, (hi[i] - lo[i]));
  for (double factor : {0.5, 1.0, 2.0, 4.0, 16.0}) {
    std::vector<int> act;
    for (int i = 0; i < k; ++i)
      if (best_v[i] > factor * cell) act.push_back(i);
    if (act.empty()) continue;
    Eigen::MatrixXd Aa(static_cast<Eigen::Index>(act.size()), static_cast<Eigen::Index>(act.size()));
    Eigen::VectorXd qa(static_cast<Eigen::Index>(act.size()));
    for (std::size_t r = 0; r < act.size(); ++r) {
      qa[static_cast<Eigen::Index>(r)] = q[act[r]];
      for (std::size_t c = 0; c < act.size(); ++c)
        Aa(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = A(act[r], act[c]);
    }
    Eigen::VectorXd va = Aa.completeOrthogonalDecomposition().solve(-qa);
    bool ok = true;
    for (Eigen::Index r = 0; r < va.size(); ++r) ok &= va[r] >= -1e-12;
    if (!ok) continue;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    for (std::size_t r = 0; r < act.size(); ++r)
      v[act[r]] = std::max(0.0, va[static_cast<Eigen::Index>(r)]);
    if (dual_obj(v) <= dual_obj(best_v)) best_v = v;
  }
  return g + G.transpose() * best_v;
}

// all contiguous partitions of n snapshots into k segments, scored with an
// independently coded within-segment scatter of the unit-normalized vectors
struct BruteSegmentation {
  double cost = 0.0;
  std::vector<int> ends;  // 1-based segment ends
};

inline double brute_segment_cost(const std::vector<Eigen::VectorXd>& u, int a, int b) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(u.front().size());
  for (int t = a; t <= b; ++t) mean += u[static_cast<std::size_t>(t)];
  mean /= static_cast<double>(b - a + 1);
  double c = 0.0;
  for (int t = a; t <= b; ++t) c += (u[static_cast<std::size_t>(t)] - mean).squaredNorm();
  return c;
}

inline BruteSegmentation brute_best_partition(const std::vector<Eigen::VectorXd>& u, int k) {
  const int n = static_cast<int>(u.size());
  BruteSegmentation best;
  best.cost = std::numeric_limits<double>::infinity();
  // choose k-1 boundaries out of positions 1..n-1, in lexicographic order
  std::vector<int> bounds(static_cast<std::size_t>(k - 1));
  for (int i = 0; i < k - 1; ++i) bounds[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    double cost = 0.0;
    int begin = 0;
    for (int i = 0; i < k - 1; ++i) {
      cost += brute_segment_cost(u, begin, bounds[static_cast<std::size_t>(i)] - 1);
      begin = bounds[static_cast<std::size_t>(i)];
    }
    cost += brute_segment_cost(u, begin, n - 1);
    if (cost < best.cost) {
      best.cost = cost;
      best.ends = bounds;
      best.ends.push_back(n);
    }
    // next combination
    int i = k - 2;
    while (i >= 0 && bounds[static_cast<std::size_t>(i)] == n - (k - 1) + i) --i;
    if (i < 0) break;
    ++bounds[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k - 1; ++j)
      bounds[static_cast<std::size_t>(j)] = bounds[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

}  // namespace oracle
