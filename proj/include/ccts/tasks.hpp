#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/errors.hpp"

namespace ccts {

enum class TaskOrder { Time, Similarity };

// Which observations feed the per-stage summary Gaussian used by similarity
// ordering: the stage's new observations only, or its whole prefix.
enum class StageStat { Increment, Prefix };

// Hellinger-style similarity of two Gaussians, in [0,1]; 1 for identical
// distributions, 0 in the limit of infinitely distant means.
inline double task_similarity(double mu_i, double sigma_i, double mu_j, double sigma_j) {
  if (!(sigma_i > 0.0) || !(sigma_j > 0.0))
    throw ArgumentError("task_similarity: sigma must be positive");
  const double s2 = sigma_i * sigma_i + sigma_j * sigma_j;
  const double bc = (2.0 * sigma_i * sigma_j / s2) * std::exp(-(mu_i - mu_j) * (mu_i - mu_j) / (4.0 * s2));
  const double inner = std::max(0.0, 1.0 - std::sqrt(bc));
  return 1.0 - std::sqrt(inner);
}

// The prefix-task sequence: task k (0-based) is the classification problem
// over per-series prefixes of length ceil((k+1)*M_n/stage_count).
// `processing_order` is the order tasks are trained in; identity for time
// order, a similarity-chained permutation otherwise.
struct PrefixTaskSequence {
  int stage_count = 0;
  TaskOrder order = TaskOrder::Time;
  std::vector<double> stage_fractions;      // (k+1)/stage_count
  std::vector<int> processing_order;        // permutation of stage ids
  std::vector<std::vector<int>> tasks;      // per stage: participating record indices
  std::vector<double> stage_mean, stage_std;  // summary Gaussians (similarity order)

  // proportional per-series prefix length, computed in integer arithmetic
  int prefix_length(int series_length, int stage) const {
    return static_cast<int>((static_cast<long long>(stage + 1) * series_length + stage_count - 1) /
                            stage_count);
  }

  // 0-based stage whose task interval contains a prefix of length `len`
  int stage_of_length(int series_length, int len) const {
    for (int k = 0; k < stage_count; ++k)
      if (len <= prefix_length(series_length, k)) return k;
    return stage_count - 1;
  }
};

namespace detail {

inline void stage_window(const PrefixTaskSequence& seq, int series_length, int stage,
                         StageStat stat, int& begin, int& end) {
  end = seq.prefix_length(series_length, stage);
  begin = (stat == StageStat::Increment && stage > 0) ? seq.prefix_length(series_length, stage - 1) : 0;
}

}  // namespace detail

inline PrefixTaskSequence make_prefix_tasks(const Dataset& data, int stage_count,
                                            TaskOrder order, StageStat stat = StageStat::Increment) {
  if (stage_count < 2) throw ArgumentError("make_prefix_tasks: stage_count must be >= 2");
  if (data.records.empty()) throw ArgumentError("make_prefix_tasks: empty dataset");
  if (data.min_length() < stage_count)
    throw ArgumentError("make_prefix_tasks: stage_count exceeds shortest series length");

  PrefixTaskSequence seq;
  seq.stage_count = stage_count;
  seq.order = order;
  const int n = static_cast<int>(data.records.size());
  for (int k = 0; k < stage_count; ++k) {
    seq.stage_fractions.push_back(static_cast<double>(k + 1) / stage_count);
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    seq.tasks.push_back(std::move(idx));
  }

  seq.processing_order.resize(static_cast<std::size_t>(stage_count));
  std::iota(seq.processing_order.begin(), seq.processing_order.end(), 0);
  if (order == TaskOrder::Time) return seq;

  // pooled per-stage summary Gaussians over every feature of every series
  seq.stage_mean.resize(static_cast<std::size_t>(stage_count));
  seq.stage_std.resize(static_cast<std::size_t>(stage_count));
  for (int k = 0; k < stage_count; ++k) {
    double sum = 0, sumsq = 0;
    long cnt = 0;
    for (const auto& rec : data.records) {
      int b, e;
      detail::stage_window(seq, rec.length(), k, stat, b, e);
      for (int m = b; m < e; ++m)
        for (Eigen::Index j = 0; j < rec.values.cols(); ++j) {
          double v = rec.values(m, j);
          sum += v;
          sumsq += v * v;
          ++cnt;
        }
    }
    double mean = sum / static_cast<double>(cnt);
    double var = cnt > 1 ? (sumsq - sum * mean) / static_cast<double>(cnt - 1) : 0.0;
    seq.stage_mean[static_cast<std::size_t>(k)] = mean;
    // a degenerate (constant) window still needs a valid Gaussian
    seq.stage_std[static_cast<std::size_t>(k)] = std::max(std::sqrt(std::max(0.0, var)), 1e-12);
  }

  // greedy chain: start at the earliest stage, then repeatedly hop to the most
  // similar unvisited stage; ties resolve to ascending time order
  std::vector<bool> used(static_cast<std::size_t>(stage_count), false);
  seq.processing_order.clear();
  int cur = 0;
  used[0] = true;
  seq.processing_order.push_back(0);
  for (int step = 1; step < stage_count; ++step) {
    int best = -1;
    double best_sim = -1.0;
    for (int j = 0; j < stage_count; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      double s = task_similarity(seq.stage_mean[static_cast<std::size_t>(cur)],
                                 seq.stage_std[static_cast<std::size_t>(cur)],
                                 seq.stage_mean[static_cast<std::size_t>(j)],
                                 seq.stage_std[static_cast<std::size_t>(j)]);
      if (s > best_sim) {
        best_sim = s;
        best = j;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    seq.processing_order.push_back(best);
    cur = best;
  }
  return seq;
}

}  // namespace ccts
