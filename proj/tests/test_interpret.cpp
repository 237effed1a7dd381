#include <catch2/catch_amalgamated.hpp>

#include "ccts/interpret.hpp"
#include "ccts/model.hpp"
#include "ccts/rng.hpp"
#include "oracles.hpp"

using namespace ccts;

namespace {

ModelConfig tagged_cfg() {
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = 2;
  cfg.mlp_hidden = {3};
  cfg.class_count = 2;
  return cfg;
}

Eigen::VectorXd random_alpha(const IndexMap& map, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd a(map.total);
  for (long i = 0; i < map.total; ++i) a[i] = rng.uniform();
  return a;
}

}  // namespace

TEST_CASE("input importance counts and sums") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(map.total);
  REQUIRE(input_importance(zeros, map).isZero(0.0));
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(map.total);
  Eigen::VectorXd per_feature = input_importance(ones, map);
  REQUIRE(per_feature.size() == 2);
  // four cell input matrices, H rows each
  REQUIRE(per_feature[0] == 4.0 * 2.0);
  REQUIRE(per_feature[1] == 4.0 * 2.0);
}

TEST_CASE("input importance matches a hand enumeration of the index map") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  Eigen::VectorXd alpha = random_alpha(map, 5);
  Eigen::VectorXd got = input_importance(alpha, map);
  // manual: walk every input-weight slice and add column j entries
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
  for (const auto& name : {"W_f", "W_i", "W_c", "W_o"}) {
    const auto& s = map.find(name);
    for (int j = 0; j < s.cols; ++j)
      for (int r = 0; r < s.rows; ++r)
        expect[j] += alpha[s.offset + static_cast<long>(j) * s.rows + r];
  }
  REQUIRE((got - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gate importance parameter counts") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  const int H = 2, d = 2;
  GateImportance gi = gate_importance(Eigen::VectorXd::Ones(map.total), map);
  REQUIRE(gi.forget == H * d + H * H + H);
  REQUIRE(gi.input == H * d + H * H + H);
  REQUIRE(gi.candidate == H * d + H * H + H);
  REQUIRE(gi.output == H * d + H * H + H);
  REQUIRE(gi.decomposition == H * H + H);
  REQUIRE(gate_importance(Eigen::VectorXd::Zero(map.total), map).total() == 0.0);
}

TEST_CASE("gate importance matches a brute-force slice sum") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  Eigen::VectorXd alpha = random_alpha(map, 7);
  GateImportance gi = gate_importance(alpha, map);
  double forget = 0;
  for (const auto& name : {"W_f", "U_f", "b_f"}) {
    const auto& s = map.find(name);
    forget += alpha.segment(s.offset, s.size()).sum();
  }
  REQUIRE(gi.forget == Catch::Approx(forget).margin(1e-14));
  double decomp = 0;
  for (const auto& name : {"W_d", "b_d"}) {
    const auto& s = map.find(name);
    decomp += alpha.segment(s.offset, s.size()).sum();
  }
  REQUIRE(gi.decomposition == Catch::Approx(decomp).margin(1e-14));
}

TEST_CASE("neuron importance counts, zeros and slice sums") {
  Model model(tagged_cfg());  // head widths 2 -> 3 -> 2
  const auto& map = model.index_map();
  auto zero = neuron_importance(Eigen::VectorXd::Zero(map.total), map);
  REQUIRE(zero.size() == 2);
  REQUIRE(zero[0].isZero(0.0));
  auto ones = neuron_importance(Eigen::VectorXd::Ones(map.total), map);
  REQUIRE(ones[0].size() == 2);  // h neurons, outgoing into 3 targets
  REQUIRE(ones[0][0] == 3.0);
  REQUIRE(ones[1].size() == 3);  // hidden neurons, outgoing into 2 logits
  REQUIRE(ones[1][2] == 2.0);

  Eigen::VectorXd alpha = random_alpha(map, 9);
  auto got = neuron_importance(alpha, map);
  const auto& w1 = map.find("mlp_W1");
  double expect = 0;
  for (int r = 0; r < w1.rows; ++r) expect += alpha[w1.offset + 1 * w1.rows + r];
  REQUIRE(got[1][1] == Catch::Approx(expect).margin(1e-14));
}

TEST_CASE("aggregation completeness identities") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  Eigen::VectorXd alpha = random_alpha(map, 11);
  // features: the per-feature sums add up to everything in input-weight slices
  double input_total = 0;
  for (const auto& s : map.slices)
    if (s.kind == SliceKind::InputWeight) input_total += alpha.segment(s.offset, s.size()).sum();
  REQUIRE(input_importance(alpha, map).sum() == Catch::Approx(input_total).epsilon(1e-14));
  // gates: everything carrying a gate tag, exactly once
  double cell_total = 0;
  for (const auto& s : map.slices)
    if (s.gate != Gate::None) cell_total += alpha.segment(s.offset, s.size()).sum();
  REQUIRE(gate_importance(alpha, map).total() == Catch::Approx(cell_total).epsilon(1e-14));
  // neurons: per-layer sums equal their weight-matrix totals
  auto per_layer = neuron_importance(alpha, map);
  for (int l = 0; l < 2; ++l) {
    const auto& s = map.find("mlp_W" + std::to_string(l));
    REQUIRE(per_layer[static_cast<std::size_t>(l)].sum() ==
            Catch::Approx(alpha.segment(s.offset, s.size()).sum()).epsilon(1e-14));
  }
}

TEST_CASE("positive rescaling preserves rankings") {
  Model model(tagged_cfg());
  const auto& map = model.index_map();
  Eigen::VectorXd alpha = random_alpha(map, 13);
  Eigen::VectorXd scaled = 37.5 * alpha;
  REQUIRE(importance_ranking(input_importance(alpha, map)) ==
          importance_ranking(input_importance(scaled, map)));
  auto a = neuron_importance(alpha, map);
  auto b = neuron_importance(scaled, map);
  for (std::size_t l = 0; l < a.size(); ++l)
    REQUIRE(importance_ranking(a[l]) == importance_ranking(b[l]));
}

TEST_CASE("stage detection: constant trail is one stage") {
  ImportanceTrail trail;
  Eigen::VectorXd f(3);
  f << 1.0, 2.0, 3.0;
  for (int m = 0; m < 6; ++m) trail.push_back({f, m, 10});
  StageSegmentation seg = stage_detect(trail, 4);
  REQUIRE(seg.stage_count() == 1);
  REQUIRE(seg.segment_ends == std::vector<int>{6});
  REQUIRE_THROWS_AS(stage_detect({trail[0]}, 4), ArgumentError);
  REQUIRE_THROWS_AS(stage_detect(trail, 0), ArgumentError);
}

TEST_CASE("stage detection: orthogonal blocks split at the boundary") {
  ImportanceTrail trail;
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4), e2 = Eigen::VectorXd::Zero(4);
  e1[0] = 2.0;
  e2[1] = 5.0;  // different scales; normalization must not care
  for (int m = 0; m < 3; ++m) trail.push_back({e1, m, 10});
  for (int m = 3; m < 7; ++m) trail.push_back({e2, m, 10});
  StageSegmentation seg = stage_detect(trail, 5);
  REQUIRE(seg.segment_ends == std::vector<int>{3, 7});
  REQUIRE(seg.centroids[0][0] == Catch::Approx(1.0));
  REQUIRE(seg.centroids[1][1] == Catch::Approx(1.0));
  REQUIRE(seg.stage_of_task(1) == 0);
  REQUIRE(seg.stage_of_task(3) == 0);
  REQUIRE(seg.stage_of_task(4) == 1);
}

TEST_CASE("stage detection matches exhaustive partitioning on short trails") {
  Rng rng(17);
  for (int it = 0; it < 40; ++it) {
    const int n = 3 + static_cast<int>(rng.below(6));  // up to 8 snapshots
    const int dim = 3;
    ImportanceTrail trail;
    std::vector<Eigen::VectorXd> u;
    for (int m = 0; m < n; ++m) {
      Eigen::VectorXd f(dim);
      for (int j = 0; j < dim; ++j) f[j] = rng.uniform(0.0, 1.0) + 0.05;
      trail.push_back({f, m, 10});
      u.push_back(f / f.norm());
    }
    const int kmax = std::min(4, n);
    // reference: exhaustive best partition per k, same elbow rule
    std::vector<double> best_cost(static_cast<std::size_t>(kmax + 1), 0.0);
    std::vector<oracle::BruteSegmentation> best(static_cast<std::size_t>(kmax + 1));
    for (int k = 1; k <= kmax; ++k) {
      best[static_cast<std::size_t>(k)] = oracle::brute_best_partition(u, k);
      best_cost[static_cast<std::size_t>(k)] = best[static_cast<std::size_t>(k)].cost;
    }
    int expect_k = kmax;
    if (best_cost[1] <= 1e-12) {
      expect_k = 1;
    } else {
      for (int k = 1; k <= kmax; ++k)
        if (best_cost[static_cast<std::size_t>(k)] <= 0.05 * best_cost[1]) {
          expect_k = k;
          break;
        }
    }
    StageSegmentation seg = stage_detect(trail, 4);
    REQUIRE(seg.stage_count() == expect_k);
    REQUIRE(seg.segment_ends == best[static_cast<std::size_t>(expect_k)].ends);
  }
}

TEST_CASE("stage boundaries are invariant to positive rescaling of the trail") {
  Rng rng(19);
  ImportanceTrail a, b;
  for (int m = 0; m < 7; ++m) {
    Eigen::VectorXd f(4);
    for (int j = 0; j < 4; ++j) f[j] = rng.uniform(0.1, 1.0) + (m < 4 ? 0.0 : 2.0 * (j == 2));
    a.push_back({f, m, 10});
    b.push_back({Eigen::VectorXd(123.0 * f), m, 10});
  }
  REQUIRE(stage_detect(a, 4).segment_ends == stage_detect(b, 4).segment_ends);
}

TEST_CASE("time consistency percentages") {
  std::vector<std::vector<int>> all_mono = {{0, 0, 1, 2}, {1, 1, 1}, {0, 2}};
  REQUIRE(time_consistency(all_mono) == 100.0);
  std::vector<std::vector<int>> half = {{0, 1, 2}, {1, 0, 2}};
  REQUIRE(time_consistency(half) == 50.0);
  REQUIRE_THROWS_AS(time_consistency({}), ArgumentError);
  REQUIRE_THROWS_AS(time_consistency({{1}}), ArgumentError);

  // randomized instance against a direct recount
  Rng rng(23);
  std::vector<std::vector<int>> seqs;
  long mono = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> s;
    int len = 2 + static_cast<int>(rng.below(5));
    for (int j = 0; j < len; ++j) s.push_back(static_cast<int>(rng.below(3)));
    bool ok = true;
    for (int j = 1; j < len; ++j)
      ok &= s[static_cast<std::size_t>(j)] >= s[static_cast<std::size_t>(j - 1)];
    mono += ok;
    seqs.push_back(std::move(s));
  }
  REQUIRE(time_consistency(seqs) == Catch::Approx(100.0 * mono / 200.0).margin(1e-12));
}
