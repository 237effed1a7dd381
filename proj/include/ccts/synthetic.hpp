#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/errors.hpp"
#include "ccts/rng.hpp"

namespace ccts {

// AR(1) parameters for one (class, stage) cell: the process relaxes toward
// `mean` with lag-1 coefficient `coeff` and innovation stddev `noise`.
struct DriftStageParams {
  double mean = 0.0;
  double coeff = 0.0;
  double noise = 0.0;
};

// Piecewise-AR(1) generator: stage boundaries partition 1..M, and each class
// follows its own stage means, so the distribution of prefixes shifts across
// stages by construction.
struct DriftSpec {
  int class_count = 2;
  int series_count = 200;
  int series_length = 30;
  int feature_count = 2;
  std::vector<int> stage_ends;                        // 1-based inclusive ends, last == series_length
  std::vector<std::vector<DriftStageParams>> params;  // [class][stage]
  double gap_min = 1.0;                               // timestamp increments, uniform
  double gap_max = 1.0;

  int stage_count() const { return static_cast<int>(stage_ends.size()); }

  int stage_of(int m) const {  // m is a 1-based observation index
    for (int s = 0; s < stage_count(); ++s)
      if (m <= stage_ends[static_cast<std::size_t>(s)]) return s;
    return stage_count() - 1;
  }

  void validate() const {
    if (class_count < 2) throw ArgumentError("drift spec: class_count must be >= 2");
    if (series_count < 1 || series_length < 1) throw ArgumentError("drift spec: empty dataset");
    if (feature_count < 1) throw ArgumentError("drift spec: feature_count must be >= 1");
    if (stage_ends.empty() || stage_ends.front() < 1 || stage_ends.back() != series_length)
      throw ArgumentError("drift spec: stage boundaries do not cover 1..M");
    for (std::size_t s = 1; s < stage_ends.size(); ++s)
      if (stage_ends[s] <= stage_ends[s - 1])
        throw ArgumentError("drift spec: stage boundaries do not cover 1..M");
    if (static_cast<int>(params.size()) != class_count)
      throw ArgumentError("drift spec: params must have one row per class");
    for (const auto& row : params) {
      if (row.size() != stage_ends.size())
        throw ArgumentError("drift spec: params must have one cell per stage");
      for (const auto& p : row)
        if (p.noise < 0) throw ArgumentError("drift spec: negative noise");
    }
    if (gap_min <= 0 || gap_max < gap_min) throw ArgumentError("drift spec: bad gap range");
  }
};

inline Dataset generate_synthetic_drift(const DriftSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset data;
  data.class_count = spec.class_count;
  for (int j = 0; j < spec.feature_count; ++j) data.feature_names.push_back("f" + std::to_string(j));
  data.records.reserve(static_cast<std::size_t>(spec.series_count));
  for (int n = 0; n < spec.series_count; ++n) {
    // per-series substream: series are reproducible independently of each other
    Rng rng(derive_seed(seed, "synth", static_cast<std::uint64_t>(n)));
    const int cls = n % spec.class_count;
    TimeSeriesRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05d", n);
    rec.id = id;
    rec.label = cls;
    rec.timestamps.resize(static_cast<std::size_t>(spec.series_length));
    rec.values.resize(spec.series_length, spec.feature_count);
    double t = 0.0;
    for (int m = 0; m < spec.series_length; ++m) {
      if (m > 0) t += rng.uniform(spec.gap_min, spec.gap_max);
      rec.timestamps[static_cast<std::size_t>(m)] = t;
      const auto& p = spec.params[static_cast<std::size_t>(cls)][static_cast<std::size_t>(spec.stage_of(m + 1))];
      for (int j = 0; j < spec.feature_count; ++j) {
        double prev_dev = m > 0 ? rec.values(m - 1, j) - p.mean : 0.0;
        rec.values(m, j) = p.mean + p.coeff * prev_dev + p.noise * rng.normal();
      }
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

// The 3-stage benchmark generator shipped with the CLI configs: the early
// stage separates the classes, the middle stage is uninformative, and the
// late stage reverses the early polarity so that unconstrained training on
// long prefixes actively overwrites what the early prefixes taught.
inline DriftSpec default_benchmark_spec() {
  DriftSpec spec;
  spec.class_count = 2;
  spec.series_count = 240;
  spec.series_length = 30;
  spec.feature_count = 2;
  spec.stage_ends = {10, 20, 30};
  spec.params = {
      {{+1.0, 0.3, 0.5}, {0.0, 0.3, 0.5}, {-1.0, 0.3, 0.5}},
      {{-1.0, 0.3, 0.5}, {0.0, 0.3, 0.5}, {+1.0, 0.3, 0.5}},
  };
  spec.gap_min = 0.5;
  spec.gap_max = 1.5;
  return spec;
}

}  // namespace ccts
