#include "pauie/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "pauie/checkpoint.hpp"
#include "pauie/nn/ops.hpp"

namespace pauie::training {

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::kWarmup: return "warmup";
    case Phase::kSup: return "sup";
    case Phase::kUnsup: return "unsup";
  }
  return "?";
}

void TrainSchedule::validate() const {
  if (total_iters == 0 || sup_block == 0 || batch == 0) {
    throw ConfigError("TrainSchedule: total_iters, sup_block and batch must be >= 1");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("TrainSchedule: lr must be finite and > 0");
  if (!(alpha_min > 0.0 && alpha_max < 1.0 && alpha_min <= alpha_max)) {
    throw ConfigError("TrainSchedule: alpha range must lie within (0,1)");
  }
  if (batch < 2) throw ConfigError("TrainSchedule: batch normalization needs batch >= 2");
}

Phase TrainSchedule::phase(std::size_t iteration) const {
  if (iteration < warmup_iters) return Phase::kWarmup;
  if (unsup_block == 0) return Phase::kSup;
  const std::size_t j = (iteration - warmup_iters) % (sup_block + unsup_block);
  return j < sup_block ? Phase::kSup : Phase::kUnsup;
}

void AdamW::step(net::ParameterStore& store) {
  auto& params = store.parameters();
  if (m_.empty()) {
    for (const auto& e : params) {
      m_.emplace_back(e.var.shape());
      v_.emplace_back(e.var.shape());
    }
  }
  if (m_.size() != params.size()) throw ParameterError("AdamW: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].var.mutable_value();
    const auto& g = params[k].var.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      value[i] -= opt_.lr * opt_.weight_decay * value[i];
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
      value[i] -= opt_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
    }
  }
}

std::string loss_log_header() { return "iteration,phase,l_fwd,l_bwd,l_a_sup,l_t,l_a_unsup,l_gw,total"; }

std::string loss_log_row(const LossRow& row) {
  std::ostringstream os;
  os << std::setprecision(17) << row.iteration << ',' << phase_name(row.phase);
  for (const auto& v : {row.l_fwd, row.l_bwd, row.l_a_sup, row.l_t, row.l_a_unsup, row.l_gw}) {
    os << ',';
    if (v) os << *v;
  }
  os << ',' << row.total;
  return os.str();
}

namespace {

// Shuffled passes over an index range; short sets repeat within a batch.
class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::mt19937_64& rng) : order_(size), rng_(rng) { reshuffle(); }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t cursor_ = 0;
};

void check_size(const Image& img, std::size_t s, const char* what) {
  if (img.height() != s || img.width() != s) {
    throw DimensionError(std::string("train: ") + what + " image is " + std::to_string(img.height()) + "x" +
                         std::to_string(img.width()) + ", model expects " + std::to_string(s));
  }
}

}  // namespace

TrainResult train(net::PaUieNet& model, const std::vector<LabeledPair>& labeled,
                  const std::vector<Image>& unlabeled, const TrainOptions& options) {
  const auto& sched = options.schedule;
  sched.validate();
  options.weights.validate();
  if (labeled.empty()) throw ConfigError("train: the labeled set is empty");
  if (sched.uses_unlabeled() && unlabeled.empty()) {
    throw ConfigError("train: unsupervised blocks are enabled but the unlabeled set is empty");
  }
  const std::size_t s = model.config().input_size;
  for (const auto& p : labeled) {
    check_size(p.degraded, s, "labeled");
    check_size(p.reference, s, "reference");
  }
  for (const auto& u : unlabeled) check_size(u, s, "unlabeled");

  std::mt19937_64 rng(options.seed);
  BatchSampler sup_sampler(labeled.size(), rng);
  std::optional<BatchSampler> unsup_sampler;
  if (!unlabeled.empty()) unsup_sampler.emplace(unlabeled.size(), rng);
  std::uniform_real_distribution<double> alpha_dist(sched.alpha_min, sched.alpha_max);

  std::ofstream log;
  if (options.loss_log) {
    log.open(*options.loss_log);
    if (!log) throw IoError("cannot open loss log " + options.loss_log->string());
    log << loss_log_header() << '\n';
  }
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  AdamW opt({.lr = sched.lr});
  model.set_mode(net::Mode::kTrain);
  TrainResult result;
  result.log.reserve(sched.total_iters);

  for (std::size_t it = 0; it < sched.total_iters; ++it) {
    LossRow row;
    row.iteration = it;
    row.phase = sched.phase(it);
    model.store().zero_grad();
    if (row.phase == Phase::kUnsup) {
      std::vector<Image> batch;
      for (auto i : unsup_sampler->next(sched.batch)) batch.push_back(unlabeled[i]);
      const double alpha = alpha_dist(rng);
      auto l = unsupervised_losses(model, net::to_batch(batch), alpha, options.weights);
      auto objective = nn::ops::scale(l.total, options.weights.lambda_unsup);
      nn::backward(objective);
      row.l_t = l.l_t.item();
      row.l_a_unsup = l.l_a_unsup.item();
      row.l_gw = l.l_gw.item();
      row.total = objective.item();
    } else {
      std::vector<Image> degraded, reference;
      for (auto i : sup_sampler.next(sched.batch)) {
        degraded.push_back(labeled[i].degraded);
        reference.push_back(labeled[i].reference);
      }
      auto l = supervised_losses(model, net::to_batch(degraded), net::to_batch(reference), options.weights);
      nn::backward(l.total);
      row.l_fwd = l.l_fwd.item();
      row.l_bwd = l.l_bwd.item();
      row.l_a_sup = l.l_a_sup.item();
      row.total = l.total.item();
    }
    opt.step(model.store());

    if (log) log << loss_log_row(row) << '\n';
    if (options.on_iteration) options.on_iteration(row);
    result.log.push_back(row);

    const std::size_t done = it + 1;
    if (options.checkpoint_dir && options.checkpoint_interval && done % options.checkpoint_interval == 0 &&
        done != sched.total_iters) {
      std::ostringstream name;
      name << "iter_" << std::setw(7) << std::setfill('0') << done << ".ckpt";
      auto path = *options.checkpoint_dir / name.str();
      checkpoint::save(path, model, done);
      result.checkpoints.push_back(path);
    }
  }
  model.store().zero_grad();
  if (options.checkpoint_dir) {
    auto path = *options.checkpoint_dir / "final.ckpt";
    checkpoint::save(path, model, sched.total_iters);
    result.checkpoints.push_back(path);
  }
  return result;
}

}  // namespace pauie::training
