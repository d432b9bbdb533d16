#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pauie/dataset.hpp"
#include "pauie/metrics.hpp"
#include "pauie/net.hpp"
#include "pauie/priors.hpp"
#include "pauie/training.hpp"

// Batch commands behind the command-line tool.
namespace pauie::harness {

namespace fs = std::filesystem;

enum class Method { kDcp, kUdcp, kHe, kRetinex, kGrayWorld, kPauieNet };

Method parse_method(const std::string& name);
std::string method_name(Method m);
/// Whether the method yields transmission and ambient light (and so goes
/// through the image formation model).
bool estimates_parameters(Method m);

struct MethodConfig {
  Method method = Method::kDcp;
  priors::DcpParams dcp;
  priors::RetinexParams retinex;
  std::size_t he_bins = 256;
  std::optional<fs::path> checkpoint;
  double t_floor = 0.05;

  /// Throws ConfigError; called before anything is written.
  void validate() const;
};

struct Estimate {
  TransmissionMaps t;
  AmbientLight a;
};

struct Enhancement {
  Image image;
  std::optional<Estimate> estimate;
};

/// A configured method, ready to run on many images concurrently.
class Enhancer {
 public:
  explicit Enhancer(MethodConfig cfg);
  const MethodConfig& config() const { return cfg_; }
  Enhancement run(const Image& img) const;
  Estimate estimate(const Image& img) const;

 private:
  MethodConfig cfg_;
  std::shared_ptr<net::PaUieNet> model_;
};

struct RunSummary {
  std::vector<metrics::MetricReport> rows;
  std::vector<std::string> warnings;
  std::size_t failures() const;
};

struct EnhanceOptions {
  MethodConfig method;
  fs::path output_dir;
  std::optional<fs::path> csv;  // default: <output_dir>/metrics.csv
  bool metrics = true;
  double depth_scale = 1.0;
  std::size_t pcc_channel = 0;
};

/// Enhances every entry, writes <id>.png and the metric CSV (rows in manifest order).
RunSummary run_enhance(const EnhanceOptions& opt, const dataset::Manifest& manifest);

/// Writes <id>_t.png, <id>_A.png and ambient.csv for parameter-estimating methods.
RunSummary run_estimate(const EnhanceOptions& opt, const dataset::Manifest& manifest);

struct SynthOptions {
  fs::path clean_dir;
  fs::path depth_dir;
  fs::path out_dir;
  AttenuationCoefficients beta{{0.45, 0.12, 0.08}};
  AmbientLight ambient{{0.1, 0.55, 0.7}};
  double depth_scale = 1.0;
  // Relative per-image perturbation of beta and ambient, uniform in [-j, j].
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

struct SynthPair {
  Image degraded;
  TransmissionMaps t;
};

SynthPair synthesize(const Image& clean, const DepthMap& depth, const AttenuationCoefficients& beta,
                     const AmbientLight& a);

/// Writes raw/, reference/, depth/, manifest.json and ground_truth.json.
RunSummary run_synth(const SynthOptions& opt);

struct TrainRunOptions {
  net::NetConfig net;
  training::TrainOptions train;
  fs::path out_dir;
  std::optional<fs::path> init_checkpoint;
};

struct TrainRunResult {
  training::TrainResult train;
  fs::path loss_log;
  std::shared_ptr<net::PaUieNet> model;
};

/// Resizes everything to the training resolution and runs the schedule.
/// Unlabeled entries of `labeled` join the unlabeled pool.
TrainRunResult run_train(const TrainRunOptions& opt, const dataset::Manifest& labeled,
                         const std::optional<dataset::Manifest>& unlabeled);

struct EvalOptions {
  fs::path enhanced_dir;
  std::optional<fs::path> reference_dir;
  std::optional<fs::path> depth_dir;
  std::optional<fs::path> transmission_dir;  // <id>_t.png or <id>.png, needed for pcc
  fs::path out_csv;
  double depth_scale = 1.0;
  std::size_t pcc_channel = 0;
};

RunSummary run_eval(const EvalOptions& opt);

metrics::MetricReport score(const std::string& id, const Image& out, const Image* reference,
                            const TransmissionMaps* t, const DepthMap* depth, std::size_t pcc_channel);

}  // namespace pauie::harness
