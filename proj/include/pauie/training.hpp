#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pauie/losses.hpp"

namespace pauie::training {

enum class Phase { kWarmup, kSup, kUnsup };
std::string phase_name(Phase p);

struct TrainSchedule {
  std::size_t warmup_iters = 3000;
  std::size_t total_iters = 150000;  // optimizer steps, warm-up included
  std::size_t sup_block = 120;
  std::size_t unsup_block = 30;  // 0 disables the unsupervised scheme
  double lr = 1e-4;
  std::size_t batch = 6;
  double alpha_min = 0.5;
  double alpha_max = 0.9;

  void validate() const;
  /// Phase of the zero-based optimizer step `iteration`.
  Phase phase(std::size_t iteration) const;
  bool uses_unlabeled() const { return unsup_block > 0 && total_iters > warmup_iters; }
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  explicit AdamW(Options opt) : opt_(opt) {}
  void step(net::ParameterStore& store);
  std::size_t steps() const { return t_; }

 private:
  Options opt_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct LabeledPair {
  Image degraded;
  Image reference;
};

struct LossRow {
  std::size_t iteration = 0;
  Phase phase = Phase::kWarmup;
  // Components not computed in the row's phase stay empty.
  std::optional<double> l_fwd, l_bwd, l_a_sup, l_t, l_a_unsup, l_gw;
  double total = 0.0;  // the objective minimized at this step
};

std::string loss_log_header();
std::string loss_log_row(const LossRow& row);

struct TrainOptions {
  TrainSchedule schedule;
  LossWeights weights;
  std::uint64_t seed = 0;
  std::size_t checkpoint_interval = 0;  // 0: only the final checkpoint
  std::optional<std::filesystem::path> checkpoint_dir;
  std::optional<std::filesystem::path> loss_log;
  std::function<void(const LossRow&)> on_iteration;
};

struct TrainResult {
  std::vector<LossRow> log;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the warm-up / interleaved schedule. Images must already be at the
/// model's input size. Deterministic for a fixed seed.
TrainResult train(net::PaUieNet& model, const std::vector<LabeledPair>& labeled,
                  const std::vector<Image>& unlabeled, const TrainOptions& options);

}  // namespace pauie::training
