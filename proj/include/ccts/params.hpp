#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ccts/errors.hpp"

namespace ccts {

// Flat view of all model parameters; every strategy-layer operation (penalty,
// Fisher, estimator, projection, update) works on this.
using ParamVector = Eigen::VectorXd;

enum class Gate { Forget, Input, Candidate, Output, Decomposition, None };

enum class SliceKind {
  InputWeight,      // recurrent-cell W_* (columns indexed by input feature)
  RecurrentWeight,  // recurrent-cell U_* and the memory-decomposition W_d
  CellBias,
  MlpWeight,        // columns indexed by source neuron, rows by target neuron
  MlpBias,
};

// One named contiguous block of the flat vector. Matrices are flattened
// column-major, so column j of a slice occupies [offset + j*rows, ... + rows).
struct ParamSlice {
  std::string name;
  SliceKind kind = SliceKind::CellBias;
  Gate gate = Gate::None;
  int mlp_layer = -1;  // 0-based for MLP slices
  long offset = 0;
  int rows = 0;
  int cols = 1;

  long size() const { return static_cast<long>(rows) * cols; }
};

struct IndexMap {
  std::vector<ParamSlice> slices;
  long total = 0;

  const ParamSlice& find(const std::string& name) const {
    for (const auto& s : slices)
      if (s.name == name) return s;
    throw ArgumentError("index map: unknown slice '" + name + "'");
  }
};

namespace detail {

inline void pack_matrix(ParamVector& flat, long& off, const Eigen::MatrixXd& m) {
  Eigen::Map<Eigen::VectorXd>(flat.data() + off, m.size()) =
      Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  off += m.size();
}

inline void unpack_matrix(const ParamVector& flat, long& off, Eigen::MatrixXd& m) {
  Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) =
      Eigen::Map<const Eigen::VectorXd>(flat.data() + off, m.size());
  off += m.size();
}

inline void pack_vector(ParamVector& flat, long& off, const Eigen::VectorXd& v) {
  flat.segment(off, v.size()) = v;
  off += v.size();
}

inline void unpack_vector(const ParamVector& flat, long& off, Eigen::VectorXd& v) {
  v = flat.segment(off, v.size());
  off += v.size();
}

}  // namespace detail

}  // namespace ccts
