#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "ccts/errors.hpp"
#include "ccts/rng.hpp"

namespace ccts {

// One labeled, possibly irregularly sampled multivariate series. The label is
// the class assigned at the final observation time.
struct TimeSeriesRecord {
  std::string id;
  std::vector<double> timestamps;  // strictly increasing
  Eigen::MatrixXd values;          // rows = observations, cols = features
  int label = 0;

  int length() const { return static_cast<int>(timestamps.size()); }

  void validate(int feature_count, int class_count) const {
    if (values.rows() != static_cast<Eigen::Index>(timestamps.size()))
      throw ValidationError("series " + id + ": value rows != timestamp count");
    if (values.cols() != feature_count)
      throw ValidationError("series " + id + ": feature count mismatch");
    if (timestamps.empty()) throw ValidationError("series " + id + ": empty");
    for (std::size_t m = 1; m < timestamps.size(); ++m)
      if (!(timestamps[m] > timestamps[m - 1]))
        throw ValidationError("series " + id + ": timestamps not strictly increasing");
    if (label < 0 || label >= class_count)
      throw ValidationError("series " + id + ": label outside class count");
    if (!values.allFinite()) throw ValidationError("series " + id + ": non-finite value");
  }
};

// Per-feature affine transform x -> (x - shift) * scale. Identity when fitted()
// is false. A zero-variance feature gets scale 0 so it maps to zero.
struct Normalization {
  Eigen::VectorXd shift;  // empty when identity
  Eigen::VectorXd scale;

  bool fitted() const { return shift.size() > 0; }
};

struct Dataset {
  std::vector<TimeSeriesRecord> records;
  std::vector<std::string> feature_names;
  int class_count = 2;
  Normalization normalization;

  int feature_count() const { return static_cast<int>(feature_names.size()); }

  void validate() const {
    if (class_count < 2) throw ValidationError("class_count must be >= 2");
    for (const auto& r : records) r.validate(feature_count(), class_count);
  }

  int min_length() const {
    int m = records.empty() ? 0 : records.front().length();
    for (const auto& r : records) m = std::min(m, r.length());
    return m;
  }
};

// Z-score normalization fitted on `fit_indices` only and applied to every
// record. Fitting on a subset and applying to the rest keeps held-out records
// out of the statistics.
inline Dataset normalize(const Dataset& in, const std::vector<int>& fit_indices) {
  if (fit_indices.empty()) throw ArgumentError("normalize: empty fit index set");
  const int d = in.feature_count();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
  long n = 0;
  for (int idx : fit_indices) {
    if (idx < 0 || idx >= static_cast<int>(in.records.size()))
      throw ArgumentError("normalize: fit index out of range");
    const auto& v = in.records[static_cast<std::size_t>(idx)].values;
    sum += v.colwise().sum().transpose();
    sumsq += v.array().square().colwise().sum().matrix().transpose();
    n += v.rows();
  }
  Eigen::VectorXd mean = sum / static_cast<double>(n);
  Eigen::VectorXd var = sumsq / static_cast<double>(n) - mean.array().square().matrix();

  Dataset out = in;
  out.normalization.shift = mean;
  out.normalization.scale.resize(d);
  for (int j = 0; j < d; ++j) {
    double sd = std::sqrt(std::max(0.0, var[j]));
    out.normalization.scale[j] = sd > 0.0 ? 1.0 / sd : 0.0;
  }
  for (auto& r : out.records)
    r.values = (r.values.rowwise() - mean.transpose()).array().rowwise() *
               out.normalization.scale.transpose().array();
  return out;
}

// Disjoint train/test/validation index sets, stratified by label so every
// split sees every class.
struct Splits {
  std::vector<int> train, test, valid;
};

inline Splits split_dataset(const Dataset& data, std::uint64_t seed,
                            double train_frac = 0.6, double test_frac = 0.2) {
  if (train_frac <= 0 || test_frac < 0 || train_frac + test_frac > 1.0)
    throw ArgumentError("split_dataset: bad fractions");
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.class_count));
  for (int i = 0; i < static_cast<int>(data.records.size()); ++i)
    by_class[static_cast<std::size_t>(data.records[static_cast<std::size_t>(i)].label)].push_back(i);
  Rng rng(derive_seed(seed, "split"));
  Splits s;
  for (auto& bucket : by_class) {
    rng.shuffle(bucket);
    const std::size_t n = bucket.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        s.train.push_back(bucket[i]);
      else if (i < n_train + n_test)
        s.test.push_back(bucket[i]);
      else
        s.valid.push_back(bucket[i]);
    }
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.valid.begin(), s.valid.end());
  return s;
}

}  // namespace ccts
