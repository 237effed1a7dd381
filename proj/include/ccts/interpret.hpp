#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ccts/errors.hpp"
#include "ccts/params.hpp"
#include "ccts/ru.hpp"

namespace ccts {

// Ordered per-task importance snapshots (the coefficients are the Fisher
// diagonal recorded after each task).
using ImportanceTrail = std::vector<FisherDiag>;

// Sum of importance over the first-layer weights attached to each input
// feature: column j of every cell input matrix W_f, W_i, W_c, W_o.
inline Eigen::VectorXd input_importance(const Eigen::VectorXd& alpha, const IndexMap& map) {
  if (alpha.size() != map.total) throw ArgumentError("input_importance: alpha length mismatch");
  int d = 0;
  for (const auto& s : map.slices)
    if (s.kind == SliceKind::InputWeight) d = std::max(d, s.cols);
  if (d == 0) throw ArgumentError("input_importance: no input-weight slices in map");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (const auto& s : map.slices) {
    if (s.kind != SliceKind::InputWeight) continue;
    for (int j = 0; j < s.cols; ++j)
      out[j] += alpha.segment(s.offset + static_cast<long>(j) * s.rows, s.rows).sum();
  }
  return out;
}

struct GateImportance {
  double forget = 0, input = 0, candidate = 0, output = 0, decomposition = 0;

  double& of(Gate g) {
    switch (g) {
      case Gate::Forget: return forget;
      case Gate::Input: return input;
      case Gate::Candidate: return candidate;
      case Gate::Output: return output;
      case Gate::Decomposition: return decomposition;
      default: throw ArgumentError("gate_importance: slice without a gate tag");
    }
  }

  double total() const { return forget + input + candidate + output + decomposition; }
};

// Sum of importance over every parameter of each gate (its input weights,
// recurrent weights and bias; the decomposition block counts W_d and b_d).
inline GateImportance gate_importance(const Eigen::VectorXd& alpha, const IndexMap& map) {
  if (alpha.size() != map.total) throw ArgumentError("gate_importance: alpha length mismatch");
  GateImportance gi;
  for (const auto& s : map.slices) {
    if (s.gate == Gate::None) continue;
    gi.of(s.gate) += alpha.segment(s.offset, s.size()).sum();
  }
  return gi;
}

// Sum of importance over the outgoing weights of each head neuron: neuron j
// of head layer l owns column j of the layer-(l) weight matrix mapping it
// forward. Logit neurons have no outgoing weights and are not listed.
inline std::vector<Eigen::VectorXd> neuron_importance(const Eigen::VectorXd& alpha,
                                                      const IndexMap& map) {
  if (alpha.size() != map.total) throw ArgumentError("neuron_importance: alpha length mismatch");
  int layers = 0;
  for (const auto& s : map.slices)
    if (s.kind == SliceKind::MlpWeight) layers = std::max(layers, s.mlp_layer + 1);
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(layers));
  for (const auto& s : map.slices) {
    if (s.kind != SliceKind::MlpWeight) continue;
    Eigen::VectorXd sums(s.cols);
    for (int j = 0; j < s.cols; ++j)
      sums[j] = alpha.segment(s.offset + static_cast<long>(j) * s.rows, s.rows).sum();
    out[static_cast<std::size_t>(s.mlp_layer)] = std::move(sums);
  }
  return out;
}

// Indices sorted by descending importance; equal values keep ascending index
// order so rankings are deterministic.
inline std::vector<int> importance_ranking(const Eigen::VectorXd& values) {
  std::vector<int> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return values[a] > values[b]; });
  return idx;
}

// Contiguous segmentation of the task axis; `segment_ends` holds the 1-based
// last task position of each stage.
struct StageSegmentation {
  std::vector<int> segment_ends;
  std::vector<Eigen::VectorXd> centroids;  // mean normalized importance per stage

  int stage_count() const { return static_cast<int>(segment_ends.size()); }

  // stage containing a 1-based task position
  int stage_of_task(int task_pos) const {
    for (int s = 0; s < stage_count(); ++s)
      if (task_pos <= segment_ends[static_cast<std::size_t>(s)]) return s;
    return stage_count() - 1;
  }
};

namespace detail {

// within-segment scatter of unit-normalized snapshots, from prefix sums
struct SegmentCost {
  std::vector<Eigen::VectorXd> prefix_sum;  // prefix_sum[t] = sum of u_0..u_{t-1}
  std::vector<double> prefix_sq;

  explicit SegmentCost(const std::vector<Eigen::VectorXd>& u) {
    const std::size_t n = u.size();
    const Eigen::Index dim = u.front().size();
    prefix_sum.resize(n + 1, Eigen::VectorXd::Zero(dim));
    prefix_sq.resize(n + 1, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      prefix_sum[t + 1] = prefix_sum[t] + u[t];
      prefix_sq[t + 1] = prefix_sq[t] + u[t].squaredNorm();
    }
  }

  // cost of snapshots a..b inclusive (0-based)
  double operator()(int a, int b) const {
    const double len = static_cast<double>(b - a + 1);
    const double sq = prefix_sq[static_cast<std::size_t>(b + 1)] - prefix_sq[static_cast<std::size_t>(a)];
    const double s2 = (prefix_sum[static_cast<std::size_t>(b + 1)] - prefix_sum[static_cast<std::size_t>(a)]).squaredNorm();
    return std::max(0.0, sq - s2 / len);
  }
};

inline std::vector<Eigen::VectorXd> normalize_trail(const ImportanceTrail& trail) {
  std::vector<Eigen::VectorXd> u;
  u.reserve(trail.size());
  for (const auto& snap : trail) {
    double n = snap.F.norm();
    u.push_back(n > 0.0 ? Eigen::VectorXd(snap.F / n) : Eigen::VectorXd::Zero(snap.F.size()));
  }
  return u;
}

}  // namespace detail

// Offline change-point segmentation of the importance trail: dynamic program
// minimizing within-segment scatter of the L2-normalized snapshots (scale
// drift across tasks must not masquerade as a change point), with the stage
// count chosen by an explained-scatter elbow rule capped at max_stages.
inline StageSegmentation stage_detect(const ImportanceTrail& trail, int max_stages,
                                      double elbow_fraction = 0.05) {
  const int n = static_cast<int>(trail.size());
  if (n < 2) throw ArgumentError("stage_detect: trail must have >= 2 snapshots");
  if (max_stages < 1) throw ArgumentError("stage_detect: max_stages must be >= 1");
  for (const auto& s : trail)
    if (s.F.size() != trail.front().F.size())
      throw ArgumentError("stage_detect: snapshot length mismatch");

  auto u = detail::normalize_trail(trail);
  detail::SegmentCost cost(u);
  const int kmax = std::min(max_stages, n);

  // dp[k][t]: best cost of the first t snapshots in k segments
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(static_cast<std::size_t>(kmax + 1),
                                      std::vector<double>(static_cast<std::size_t>(n + 1), inf));
  std::vector<std::vector<int>> arg(static_cast<std::size_t>(kmax + 1),
                                    std::vector<int>(static_cast<std::size_t>(n + 1), 0));
  for (int t = 1; t <= n; ++t) dp[1][static_cast<std::size_t>(t)] = cost(0, t - 1);
  for (int k = 2; k <= kmax; ++k)
    for (int t = k; t <= n; ++t)
      for (int s = k - 1; s <= t - 1; ++s) {
        double c = dp[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(s)] + cost(s, t - 1);
        if (c < dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]) {
          dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = c;
          arg[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] = s;
        }
      }

  const double total = dp[1][static_cast<std::size_t>(n)];
  int best_k = kmax;
  if (total <= 1e-12) {
    best_k = 1;
  } else {
    for (int k = 1; k <= kmax; ++k)
      if (dp[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] <= elbow_fraction * total) {
        best_k = k;
        break;
      }
  }

  StageSegmentation seg;
  seg.segment_ends.resize(static_cast<std::size_t>(best_k));
  int t = n;
  for (int k = best_k; k >= 1; --k) {
    seg.segment_ends[static_cast<std::size_t>(k - 1)] = t;
    t = k > 1 ? arg[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] : 0;
  }
  int begin = 0;
  for (int s = 0; s < best_k; ++s) {
    int end = seg.segment_ends[static_cast<std::size_t>(s)];
    Eigen::VectorXd c = Eigen::VectorXd::Zero(u.front().size());
    for (int i = begin; i < end; ++i) c += u[static_cast<std::size_t>(i)];
    seg.centroids.push_back(c / static_cast<double>(end - begin));
    begin = end;
  }
  return seg;
}

// Fraction (as a percentage) of samples whose stage-assignment sequence never
// decreases over time.
inline double time_consistency(const std::vector<std::vector<int>>& assignments) {
  if (assignments.empty()) throw ArgumentError("time_consistency: empty input");
  long monotone = 0;
  for (const auto& seq : assignments) {
    if (seq.size() < 2)
      throw ArgumentError("time_consistency: every sample needs >= 2 assignments");
    bool ok = true;
    for (std::size_t i = 1; i < seq.size(); ++i) ok &= seq[i] >= seq[i - 1];
    monotone += ok;
  }
  return 100.0 * static_cast<double>(monotone) / static_cast<double>(assignments.size());
}

}  // namespace ccts
