#include <catch2/catch_amalgamated.hpp>

#include "ccts/metrics.hpp"
#include "ccts/rng.hpp"
#include "oracles.hpp"

using namespace ccts;

TEST_CASE("auc closed forms") {
  REQUIRE(auc_roc({{0.9, 0.1}, {1, 0}}) == 1.0);
  REQUIRE(auc_roc({{0.4, 0.4, 0.4}, {1, 0, 1}}) == 0.5);  // all ties
  // frozen from exhaustive pair counting: pairs (0.8>0.6)=1, (0.4<0.6)=0
  REQUIRE(auc_roc({{0.8, 0.6, 0.4}, {1, 0, 1}}) == 0.5);
  REQUIRE_THROWS_AS(auc_roc({{0.2, 0.3}, {1, 1}}), ArgumentError);
  REQUIRE_THROWS_AS(auc_roc({{0.2}, {1, 0}}), ArgumentError);
}

TEST_CASE("auc equals exhaustive pair counting and the trapezoidal route") {
  Rng rng(101);
  for (int it = 0; it < 300; ++it) {
    ScoredSet set;
    const int n = 2 + static_cast<int>(rng.below(40));
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      // quantized scores force plenty of ties
      set.scores.push_back(std::round(rng.uniform() * 8.0) / 8.0);
      int label = rng.uniform() < 0.5 ? 0 : 1;
      (label ? pos : neg) = true;
      set.labels.push_back(label);
    }
    if (!pos || !neg) continue;
    const double a = auc_roc(set);
    REQUIRE(a == Catch::Approx(oracle::auc_pairs(set)).margin(1e-12));
    REQUIRE(a == Catch::Approx(auc_roc_trapezoid(set)).margin(1e-12));
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  Rng rng(55);
  ScoredSet set;
  for (int i = 0; i < 60; ++i) {
    set.scores.push_back(rng.normal());
    set.labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
  }
  ScoredSet mapped = set;
  for (auto& s : mapped.scores) s = std::atan(3.0 * s) + 7.0;
  REQUIRE(auc_roc(set) == auc_roc(mapped));
}

TEST_CASE("macro auc reduces to the binary case and skips absent classes") {
  std::vector<Eigen::VectorXd> probs;
  std::vector<int> labels = {0, 1, 0, 1};
  for (double p : {0.2, 0.9, 0.4, 0.6}) {
    Eigen::VectorXd v(2);
    v << 1 - p, p;
    probs.push_back(v);
  }
  ScoredSet direct{{0.2, 0.9, 0.4, 0.6}, {0, 1, 0, 1}};
  REQUIRE(auc_roc_macro(probs, labels, 2) == auc_roc(direct));

  std::vector<Eigen::VectorXd> probs3;
  std::vector<int> labels3 = {0, 1, 0, 1};
  for (const auto& p : probs) {
    Eigen::VectorXd v(3);
    v << p[0], p[1], 0.0;
    probs3.push_back(v);
  }
  REQUIRE(auc_roc_macro(probs3, labels3, 3) ==
          Catch::Approx(auc_roc(direct)));  // class 2 has no positives
}

TEST_CASE("bwt hand-evaluated matrices") {
  Eigen::MatrixXd r2(2, 2);
  r2 << 0.8, 0.0, 0.7, 0.9;
  REQUIRE(bwt(r2) == Catch::Approx(-0.1).margin(1e-15));
  Eigen::MatrixXd rc = Eigen::MatrixXd::Constant(3, 3, 0.42);
  REQUIRE(bwt(rc) == 0.0);
  Eigen::MatrixXd r3(3, 3);
  r3 << 0.8, 0.1, 0.2, 0.3, 0.9, 0.4, 0.9, 0.7, 0.6;
  REQUIRE(bwt(r3) == Catch::Approx(-0.05).margin(1e-15));
  Eigen::MatrixXd r1(1, 1);
  REQUIRE_THROWS_AS(bwt(r1), ArgumentError);
}

TEST_CASE("fwt hand-evaluated matrices") {
  Eigen::MatrixXd r2(2, 2);
  r2 << 0.5, 0.6, 0.0, 0.0;
  Eigen::VectorXd b2(2);
  b2 << 0.5, 0.5;
  REQUIRE(fwt(r2, b2) == Catch::Approx(0.1).margin(1e-15));
  Eigen::MatrixXd r3(3, 3);
  r3 << 0.0, 0.7, 0.0, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0;
  Eigen::VectorXd b3(3);
  b3 << 0.9, 0.5, 0.6;
  REQUIRE(fwt(r3, b3) == Catch::Approx(0.2).margin(1e-15));
  // zero transfer when the zero-shot accuracy equals the baseline
  Eigen::VectorXd bb(3);
  bb << 0.0, 0.7, 0.8;
  REQUIRE(fwt(r3, bb) == 0.0);
  Eigen::VectorXd bad(2);
  REQUIRE_THROWS_AS(fwt(r3, bad), ArgumentError);
}

TEST_CASE("bwt/fwt shift behaviour under a constant offset") {
  Rng rng(9);
  Eigen::MatrixXd R = Eigen::MatrixXd::NullaryExpr(4, 4, [&]() { return rng.uniform(); });
  Eigen::VectorXd base = Eigen::VectorXd::NullaryExpr(4, [&]() { return rng.uniform(); });
  const double c = 0.173;
  Eigen::MatrixXd Rc = R.array() + c;
  REQUIRE(bwt(Rc) == Catch::Approx(bwt(R)).margin(1e-12));
  REQUIRE(fwt(Rc, base) == Catch::Approx(fwt(R, base) + c).margin(1e-12));
}

TEST_CASE("gradient fluctuation closed forms and bounds") {
  REQUIRE(gradient_fluctuation({0.5, 0.2, 0.9, 0.1}) == 0.0);  // constant sign
  REQUIRE(gradient_fluctuation({1.0, -1.0, 1.0}) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-15));
  // sign(0) counts as +1
  REQUIRE(gradient_fluctuation({0.0, 1.0, 0.0}) == 0.0);
  REQUIRE_THROWS_AS(gradient_fluctuation({1.0}), ArgumentError);

  Rng rng(31);
  for (int it = 0; it < 100; ++it) {
    const int n = 2 + static_cast<int>(rng.below(30));
    std::vector<double> h;
    for (int i = 0; i < n; ++i) h.push_back(rng.normal());
    // independent evaluator
    double sum = 0;
    for (int i = 1; i < n; ++i) {
      double a = h[static_cast<std::size_t>(i)] < 0 ? -1 : 1;
      double b = h[static_cast<std::size_t>(i - 1)] < 0 ? -1 : 1;
      sum += (a - b) * (a - b);
    }
    double expect = std::sqrt(sum) / (n - 1);
    double got = gradient_fluctuation(h);
    REQUIRE(got == Catch::Approx(expect).margin(1e-14));
    REQUIRE(got >= 0.0);
    REQUIRE(got <= 2.0 * std::sqrt(static_cast<double>(n - 1)) / (n - 1) + 1e-12);
  }
}
