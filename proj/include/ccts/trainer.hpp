#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ccts/dataset.hpp"
#include "ccts/errors.hpp"
#include "ccts/metrics.hpp"
#include "ccts/model.hpp"
#include "ccts/rng.hpp"
#include "ccts/ru.hpp"
#include "ccts/tasks.hpp"

namespace ccts {

enum class Strategy { Ru, LmOnly, PmOnly, Plain };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Ru: return "ru";
    case Strategy::LmOnly: return "lm_only";
    case Strategy::PmOnly: return "pm_only";
    case Strategy::Plain: return "plain";
  }
  return "?";
}

// Strategy selector plus tuning. The ablation presets pin the mechanism
// toggles: lm_only turns the estimator/projection off, pm_only removes the
// penalty, plain is the unconstrained descent baseline.
struct StrategyChoice {
  Strategy kind = Strategy::Ru;
  RuConfig ru;

  RuConfig effective() const {
    RuConfig cfg = ru;
    switch (kind) {
      case Strategy::Ru:
        cfg.lm_on = true;
        cfg.pm_on = true;
        break;
      case Strategy::LmOnly:
        cfg.lm_on = true;
        cfg.pm_on = false;
        cfg.gem_on = false;
        break;
      case Strategy::PmOnly:
        cfg.lm_on = false;
        cfg.lambda = 0.0;
        cfg.pm_on = true;
        break;
      case Strategy::Plain:
        cfg.lm_on = false;
        cfg.lambda = 0.0;
        cfg.pm_on = false;
        cfg.gem_on = false;
        break;
    }
    return cfg;
  }
};

struct TrainOptions {
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int fisher_samples = 256;
  int threads = 1;
  bool dry_run = false;  // epochs = 0: bookkeeping only, parameters untouched

  void validate() const {
    if (!dry_run && epochs < 1) throw ArgumentError("train options: epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("train options: batch size must be >= 1");
    if (threads < 1) throw ArgumentError("train options: threads must be >= 1");
  }
};

struct StepTrace {
  int task = 0;   // processing position
  int epoch = 0;
  int step = 0;   // global optimizer step
  RuStepDiagnostics diag;
};

struct TrainReport {
  Eigen::MatrixXd R;             // R(i,j): AUC on task j after completing task i
  Eigen::VectorXd baseline;      // random-initialization AUC per task
  std::vector<int> task_order;   // stage ids in processing order
  std::vector<std::vector<double>> epoch_loss;  // mean objective per (task, epoch)
  std::vector<double> grad_mean_history;        // per-step mean raw gradient
  std::vector<double> cumulative_loss;          // running sum of per-step objective
  std::vector<double> task_test_loss;           // L(f^i, M^i) on the test split
  std::vector<double> nondegradation;           // running-mean inequality value, tasks 2..M
  std::vector<FisherDiag> importance_trail;     // one snapshot per completed task
  std::vector<ParamVector> checkpoints;         // parameters after each task
  ParamVector initial_theta;
  std::vector<StepTrace> steps;
  double bwt = 0.0;
  double fwt = 0.0;
  double fluctuation = 0.0;
  double final_average_auc = 0.0;  // mean of the last R row
  double wall_clock_sec = 0.0;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<BatchItem> stage_items(const Dataset& data, const PrefixTaskSequence& seq,
                                          int stage, const std::vector<int>& indices) {
  std::vector<BatchItem> items;
  items.reserve(indices.size());
  for (int idx : indices) {
    const auto& task_members = seq.tasks[static_cast<std::size_t>(stage)];
    if (!std::binary_search(task_members.begin(), task_members.end(), idx)) continue;
    items.push_back({idx, seq.prefix_length(data.records[static_cast<std::size_t>(idx)].length(), stage)});
  }
  return items;
}

inline double stage_auc(const Model& model, const Dataset& data,
                        std::span<const BatchItem> items) {
  std::vector<Eigen::VectorXd> probs;
  std::vector<int> labels;
  probs.reserve(items.size());
  for (const auto& it : items) {
    const auto& rec = data.records[static_cast<std::size_t>(it.record)];
    probs.push_back(model.forward(rec, it.prefix_len));
    labels.push_back(rec.label);
  }
  return auc_roc_macro(probs, labels, data.class_count);
}

inline void parallel_over(int n, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int workers = std::min(threads, n);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

// AUC of each checkpoint on each task's held-out prefixes. Rows may be
// evaluated on worker threads; every cell lands in a fixed slot, so the
// result does not depend on the thread count.
inline Eigen::MatrixXd evaluate_matrix(const std::vector<ParamVector>& checkpoints,
                                       const ModelConfig& cfg, const Dataset& data,
                                       const PrefixTaskSequence& seq,
                                       const std::vector<int>& test_indices, int threads = 1) {
  const int rows = static_cast<int>(checkpoints.size());
  const int cols = static_cast<int>(seq.processing_order.size());
  Eigen::MatrixXd R(rows, cols);
  detail::parallel_over(rows, threads, [&](int i) {
    Model model(cfg);
    if (checkpoints[static_cast<std::size_t>(i)].size() != model.param_count())
      throw ArgumentError("evaluate_matrix: checkpoint " + std::to_string(i) +
                          " does not match the model config");
    model.unpack(checkpoints[static_cast<std::size_t>(i)]);
    for (int j = 0; j < cols; ++j) {
      const int stage = seq.processing_order[static_cast<std::size_t>(j)];
      auto items = detail::stage_items(data, seq, stage, test_indices);
      R(i, j) = detail::stage_auc(model, data, items);
    }
  });
  return R;
}

// The continual-training loop: iterate tasks in the chosen order, run the
// selected strategy for the configured epochs, then refresh the importance
// anchor, the reference-gradient memory and the accuracy matrix row.
// Deterministic for equal (config, seed): every random choice draws from a
// named substream of the root seed.
inline TrainReport train_continual(const Dataset& data, const PrefixTaskSequence& seq,
                                   const Splits& splits, const ModelConfig& model_cfg,
                                   const StrategyChoice& strategy, const TrainOptions& options) {
  options.validate();
  const RuConfig cfg = strategy.effective();
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  TrainReport report;
  report.seed = options.seed;
  report.task_order = seq.processing_order;
  const int n_tasks = static_cast<int>(seq.processing_order.size());
  report.R.resize(n_tasks, n_tasks);
  report.R.setZero();

  Model model = Model::init(model_cfg, options.seed);
  ParamVector theta = model.pack();
  report.initial_theta = theta;
  const ParamVector ball_center = theta;

  // zero-shot row of the untouched model = the random-init baseline for FWT
  report.baseline.resize(n_tasks);
  for (int j = 0; j < n_tasks; ++j) {
    const int stage = seq.processing_order[static_cast<std::size_t>(j)];
    auto items = detail::stage_items(data, seq, stage, splits.test);
    report.baseline[j] = detail::stage_auc(model, data, items);
  }

  EstimatorState state;
  state.reset(theta);
  GradientMemory memory;
  std::vector<TaskAnchor> anchors;
  const int epochs = options.dry_run ? 0 : options.epochs;
  int global_step = 0;
  double loss_cumsum = 0.0;

  for (int pos = 0; pos < n_tasks && !report.aborted; ++pos) {
    const int stage = seq.processing_order[static_cast<std::size_t>(pos)];
    auto train_items = detail::stage_items(data, seq, stage, splits.train);
    report.epoch_loss.emplace_back();
    if (cfg.reset_state_per_task) state.reset(theta);

    if (train_items.empty()) {
      report.warnings.push_back("task " + std::to_string(pos) + " (stage " +
                                std::to_string(stage) + ") has no training samples; skipped");
    } else {
      for (int epoch = 0; epoch < epochs && !report.aborted; ++epoch) {
        std::vector<BatchItem> order = train_items;
        Rng rng(derive_seed(options.seed, "batch",
                            static_cast<std::uint64_t>(pos) * 1000003ull +
                                static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double epoch_obj = 0.0;
        int batches = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(options.batch_size)) {
          std::span<const BatchItem> batch(order.data() + b,
                                           std::min(order.size() - b,
                                                    static_cast<std::size_t>(options.batch_size)));
          ParamVector theta_before = theta;
          try {
            RuStepDiagnostics diag =
                ru_step(model, data, batch, theta, state, anchors, memory, ball_center, cfg);
            report.grad_mean_history.push_back(diag.grad_mean);
            loss_cumsum += diag.objective;
            report.cumulative_loss.push_back(loss_cumsum);
            epoch_obj += diag.objective;
            ++batches;
            report.steps.push_back({pos, epoch, global_step, std::move(diag)});
            ++global_step;
          } catch (const NumericError& err) {
            theta = theta_before;  // last finite state
            model.unpack(theta);
            report.aborted = true;
            report.abort_reason = err.what();
            break;
          }
        }
        report.epoch_loss.back().push_back(batches > 0 ? epoch_obj / batches : 0.0);
      }
    }

    // post-task bookkeeping: importance snapshot, anchor, reference gradient
    if (!train_items.empty()) {
      Rng fisher_rng(derive_seed(options.seed, "fisher", static_cast<std::uint64_t>(pos)));
      std::vector<BatchItem> pool = train_items;
      fisher_rng.shuffle(pool);
      const std::size_t n_fisher =
          std::min(pool.size(), static_cast<std::size_t>(std::max(1, options.fisher_samples)));
      FisherDiag fisher =
          estimate_fisher_diag(model, data, std::span<const BatchItem>(pool.data(), n_fisher));
      fisher.task = pos;
      anchors.push_back({theta, fisher});
      report.importance_trail.push_back(std::move(fisher));

      Rng gem_rng(derive_seed(options.seed, "gem", static_cast<std::uint64_t>(pos)));
      std::vector<BatchItem> snap = train_items;
      gem_rng.shuffle(snap);
      const std::size_t n_snap =
          std::min(snap.size(), static_cast<std::size_t>(std::max(1, cfg.gem_snapshot)));
      ParamVector ref_grad;
      model.loss_and_grad(data, std::span<const BatchItem>(snap.data(), n_snap), ref_grad);
      memory.add(pos, std::move(ref_grad), cfg.gem_memory);
    }

    report.checkpoints.push_back(theta);
    for (int j = 0; j < n_tasks; ++j) {
      const int stage_j = seq.processing_order[static_cast<std::size_t>(j)];
      auto items = detail::stage_items(data, seq, stage_j, splits.test);
      report.R(pos, j) = detail::stage_auc(model, data, items);
    }

    auto test_items = detail::stage_items(data, seq, stage, splits.test);
    report.task_test_loss.push_back(
        test_items.empty() ? 0.0 : model.batch_loss(data, test_items));
    if (pos >= 1) {
      double mean_m = 0.0, mean_prev = 0.0;
      for (int i = 0; i <= pos; ++i) mean_m += report.task_test_loss[static_cast<std::size_t>(i)];
      for (int i = 0; i < pos; ++i) mean_prev += report.task_test_loss[static_cast<std::size_t>(i)];
      mean_m /= static_cast<double>(pos + 1);
      mean_prev /= static_cast<double>(pos);
      report.nondegradation.push_back(mean_m - mean_prev);
    }
  }

  if (n_tasks >= 2 && static_cast<int>(report.checkpoints.size()) == n_tasks) {
    report.bwt = bwt(report.R);
    report.fwt = fwt(report.R, report.baseline);
    report.final_average_auc = report.R.row(n_tasks - 1).mean();
  }
  if (report.grad_mean_history.size() >= 2)
    report.fluctuation = gradient_fluctuation(report.grad_mean_history);
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace ccts
