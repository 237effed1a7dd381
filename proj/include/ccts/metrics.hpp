#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ccts/errors.hpp"

namespace ccts {

// Scores (probability of the positive class) with binary labels.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

// AUC-ROC as the Mann-Whitney statistic P(score_pos > score_neg) + 0.5 P(tie),
// computed from average ranks.
inline double auc_roc(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) throw ArgumentError("auc_roc: length mismatch");
  const std::size_t n = set.scores.size();
  long n_pos = 0;
  for (int l : set.labels) n_pos += (l != 0);
  const long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ArgumentError("auc_roc: needs both classes");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && set.scores[idx[j + 1]] == set.scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (set.labels[idx[k]] != 0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Second algebraic route to the same quantity: build the ROC curve over all
// score thresholds and integrate it with the trapezoid rule. Ties are handled
// by moving along both axes at once, which reproduces the 0.5-per-tie
// convention of the rank form.
inline double auc_roc_trapezoid(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) throw ArgumentError("auc_roc: length mismatch");
  const std::size_t n = set.scores.size();
  long n_pos = 0;
  for (int l : set.labels) n_pos += (l != 0);
  const long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ArgumentError("auc_roc: needs both classes");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });
  double area = 0.0;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    long d_tp = 0, d_fp = 0;
    while (j < n && set.scores[idx[j]] == set.scores[idx[i]]) {
      if (set.labels[idx[j]] != 0)
        ++d_tp;
      else
        ++d_fp;
      ++j;
    }
    const double tp2 = tp + static_cast<double>(d_tp);
    const double fp2 = fp + static_cast<double>(d_fp);
    area += (fp2 - fp) * 0.5 * (tp + tp2);
    tp = tp2;
    fp = fp2;
    i = j;
  }
  return area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// One-vs-rest macro average over the classes present with both positives and
// negatives; `scores` holds one per-class probability row per sample.
inline double auc_roc_macro(const std::vector<Eigen::VectorXd>& scores,
                            const std::vector<int>& labels, int class_count) {
  if (scores.size() != labels.size() || scores.empty())
    throw ArgumentError("auc_roc_macro: bad input lengths");
  if (class_count == 2) {
    ScoredSet set;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      set.scores.push_back(scores[i][1]);
      set.labels.push_back(labels[i] == 1 ? 1 : 0);
    }
    return auc_roc(set);
  }
  double sum = 0.0;
  int used = 0;
  for (int c = 0; c < class_count; ++c) {
    ScoredSet set;
    long pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      set.scores.push_back(scores[i][c]);
      int y = labels[i] == c ? 1 : 0;
      pos += y;
      set.labels.push_back(y);
    }
    if (pos == 0 || pos == static_cast<long>(set.labels.size())) continue;
    sum += auc_roc(set);
    ++used;
  }
  if (used == 0) throw ArgumentError("auc_roc_macro: no class has both positives and negatives");
  return sum / used;
}

// Backward transfer: mean change, after finishing all tasks, of the accuracy
// on each earlier task relative to the accuracy right after learning it.
inline double bwt(const Eigen::MatrixXd& R) {
  const auto M = R.rows();
  if (R.cols() != M || M < 2) throw ArgumentError("bwt: matrix must be square with side >= 2");
  double sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < M; ++i) sum += R(M - 1, i) - R(i, i);
  return sum / static_cast<double>(M - 1);
}

// Forward transfer: mean zero-shot accuracy on each task before training it,
// relative to the random-initialization baseline.
inline double fwt(const Eigen::MatrixXd& R, const Eigen::VectorXd& baseline) {
  const auto M = R.rows();
  if (R.cols() != M || M < 2) throw ArgumentError("fwt: matrix must be square with side >= 2");
  if (baseline.size() != M) throw ArgumentError("fwt: baseline length mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 1; i < M; ++i) sum += R(i - 1, i) - baseline(i);
  return sum / static_cast<double>(M - 1);
}

// Learning-stability fluctuation of a gradient history: signs of successive
// per-step aggregate gradients, R = sqrt(sum of squared sign changes)/(n-1).
// sign(0) counts as +1.
inline double gradient_fluctuation(const std::vector<double>& grad_history) {
  const std::size_t n = grad_history.size();
  if (n < 2) throw ArgumentError("gradient_fluctuation: history must have >= 2 entries");
  auto sgn = [](double g) { return g < 0.0 ? -1.0 : 1.0; };
  double sum = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double diff = sgn(grad_history[i]) - sgn(grad_history[i - 1]);
    sum += diff * diff;
  }
  return std::sqrt(sum) / static_cast<double>(n - 1);
}

}  // namespace ccts
