// pauie: underwater image enhancement toolkit.
//
//   pauie enhance --input DIR|manifest.json --output DIR --method dcp
//   pauie estimate --input DIR --output DIR --method pauienet --checkpoint final.ckpt
//   pauie synth --clean DIR --depth DIR --output DIR --beta 0.45,0.12,0.08
//   pauie train --labeled DIR --unlabeled DIR --output DIR --preset toy
//   pauie eval --enhanced DIR --reference DIR --output report.csv
//   pauie ingest-check --input DIR
//
// Every flag can also come from a config file (--config run.toml) using one
// section per subcommand. Exit status: 0 ok, 1 some items failed, 2 bad config.

#include <omp.h>

#include <array>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pauie/checkpoint.hpp"
#include "pauie/dataset.hpp"
#include "pauie/harness.hpp"

namespace {

using namespace pauie;
namespace fs = std::filesystem;

constexpr int kExitItems = 1;
constexpr int kExitConfig = 2;

struct MethodFlags {
  std::string method = "dcp";
  harness::MethodConfig cfg;
  std::string checkpoint;
};

void add_method_flags(CLI::App* app, MethodFlags& f) {
  app->add_option("--method", f.method, "dcp|udcp|he|retinex|grayworld|pauienet")->capture_default_str();
  app->add_option("--checkpoint", f.checkpoint, "Network checkpoint (pauienet)");
  app->add_option("--dcp-patch", f.cfg.dcp.patch, "Dark channel patch size (odd)")->capture_default_str();
  app->add_option("--dcp-omega", f.cfg.dcp.omega, "Haze retention factor")->capture_default_str();
  app->add_option("--dcp-top-frac", f.cfg.dcp.top_frac, "Brightest dark-channel fraction for A")->capture_default_str();
  app->add_option("--guided-radius", f.cfg.dcp.guided_radius)->capture_default_str();
  app->add_option("--guided-eps", f.cfg.dcp.guided_eps)->capture_default_str();
  app->add_option("--t-floor", f.cfg.t_floor, "Transmission floor for inversion")->capture_default_str();
  app->add_option("--he-bins", f.cfg.he_bins)->capture_default_str();
  app->add_option("--retinex-scales", f.cfg.retinex.scales)->delimiter(',')->capture_default_str();
  app->add_option("--retinex-eps", f.cfg.retinex.eps)->capture_default_str();
  app->add_option("--retinex-low", f.cfg.retinex.low_percentile)->capture_default_str();
  app->add_option("--retinex-high", f.cfg.retinex.high_percentile)->capture_default_str();
}

harness::MethodConfig resolve(const MethodFlags& f) {
  auto cfg = f.cfg;
  cfg.method = harness::parse_method(f.method);
  cfg.dcp.t_floor = cfg.t_floor;
  if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
  cfg.validate();
  return cfg;
}

dataset::Manifest open_dataset(const fs::path& input) {
  if (fs::is_regular_file(input)) return dataset::load(input);
  auto r = dataset::ingest(input);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return r.manifest;
}

int report(const harness::RunSummary& s, const std::string& what) {
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& r : s.rows) {
    if (!r.ok()) std::cerr << "error: " << r.image_id << ": " << r.error << '\n';
  }
  std::cerr << what << ": " << s.rows.size() - s.failures() << " ok, " << s.failures() << " failed\n";
  return s.failures() ? kExitItems : 0;
}

AmbientLight to_ambient(const std::vector<double>& v) { return AmbientLight{{v.at(0), v.at(1), v.at(2)}}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater image enhancement: physical priors, a dual-stream estimator and evaluation"};
  app.set_config("--config", "", "TOML/INI file; one section per subcommand");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0: OpenMP default)");

  // enhance / estimate
  MethodFlags mflags;
  harness::EnhanceOptions eopt;
  std::string e_input, e_output, e_csv;
  bool no_metrics = false;
  auto add_enhance_like = [&](CLI::App* sub) {
    sub->add_option("--input", e_input, "Dataset root or manifest file")->required();
    sub->add_option("--output", e_output, "Output directory")->required();
    sub->add_option("--depth-scale", eopt.depth_scale, "Depth PNG full-scale value")->capture_default_str();
    sub->add_option("--pcc-channel", eopt.pcc_channel, "Channel for transmission PCC (0=R)")->capture_default_str();
    add_method_flags(sub, mflags);
  };
  auto* enhance = app.add_subcommand("enhance", "Enhance a dataset and write a metric CSV");
  add_enhance_like(enhance);
  enhance->add_option("--csv", e_csv, "Metric CSV path (default OUTPUT/metrics.csv)");
  enhance->add_flag("--no-metrics", no_metrics, "Skip metric computation");
  auto* estimate = app.add_subcommand("estimate", "Write transmission and ambient-light estimates");
  add_enhance_like(estimate);

  // synth
  harness::SynthOptions sopt;
  std::string s_clean, s_depth, s_out;
  std::vector<double> s_beta{0.45, 0.12, 0.08}, s_ambient{0.1, 0.55, 0.7};
  auto* synth = app.add_subcommand("synth", "Degrade clean images with depth maps");
  synth->add_option("--clean", s_clean)->required();
  synth->add_option("--depth", s_depth)->required();
  synth->add_option("--output", s_out)->required();
  synth->add_option("--beta", s_beta, "Attenuation r,g,b")->delimiter(',')->expected(3)->capture_default_str();
  synth->add_option("--ambient", s_ambient, "Ambient light r,g,b")->delimiter(',')->expected(3)->capture_default_str();
  synth->add_option("--depth-scale", sopt.depth_scale)->capture_default_str();
  synth->add_option("--jitter", sopt.jitter, "Relative per-image jitter of beta and ambient")->capture_default_str();
  synth->add_option("--seed", sopt.seed)->capture_default_str();

  // train
  harness::TrainRunOptions topt;
  std::string t_labeled, t_unlabeled, t_out, t_init, t_preset = "default";
  std::size_t t_input_size = 0;
  auto& sched = topt.train.schedule;
  auto& weights = topt.train.weights;
  auto* train = app.add_subcommand("train", "Train the network");
  train->add_option("--labeled", t_labeled, "Labeled dataset root or manifest")->required();
  train->add_option("--unlabeled", t_unlabeled, "Unlabeled dataset root or manifest");
  train->add_option("--output", t_out)->required();
  train->add_option("--preset", t_preset, "Network size: default|toy")->capture_default_str();
  train->add_option("--input-size", t_input_size, "Override training resolution");
  train->add_option("--init", t_init, "Start from a checkpoint");
  train->add_option("--warmup-iters", sched.warmup_iters)->capture_default_str();
  train->add_option("--total-iters", sched.total_iters)->capture_default_str();
  train->add_option("--sup-block", sched.sup_block)->capture_default_str();
  train->add_option("--unsup-block", sched.unsup_block)->capture_default_str();
  train->add_option("--lr", sched.lr)->capture_default_str();
  train->add_option("--batch", sched.batch)->capture_default_str();
  train->add_option("--alpha-min", sched.alpha_min)->capture_default_str();
  train->add_option("--alpha-max", sched.alpha_max)->capture_default_str();
  train->add_option("--lambda1", weights.lambda1)->capture_default_str();
  train->add_option("--lambda2", weights.lambda2)->capture_default_str();
  train->add_option("--lambda3", weights.lambda3)->capture_default_str();
  train->add_option("--lambda-unsup", weights.lambda_unsup)->capture_default_str();
  train->add_option("--seed", topt.train.seed)->capture_default_str();
  train->add_option("--checkpoint-interval", topt.train.checkpoint_interval)->capture_default_str();

  // eval
  harness::EvalOptions vopt;
  std::string v_enh, v_ref, v_depth, v_trans, v_out;
  auto* eval = app.add_subcommand("eval", "Score enhanced images against references");
  eval->add_option("--enhanced", v_enh)->required();
  eval->add_option("--reference", v_ref);
  eval->add_option("--depth", v_depth);
  eval->add_option("--transmission", v_trans, "Directory of <id>_t.png estimates (for PCC)");
  eval->add_option("--output", v_out, "CSV path")->required();
  eval->add_option("--depth-scale", vopt.depth_scale)->capture_default_str();
  eval->add_option("--pcc-channel", vopt.pcc_channel)->capture_default_str();

  // ingest-check
  std::string i_input, i_manifest;
  auto* ingest = app.add_subcommand("ingest-check", "Pair a dataset directory and decode every file");
  ingest->add_option("--input", i_input)->required();
  ingest->add_option("--write-manifest", i_manifest, "Save the manifest here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (enhance->parsed() || estimate->parsed()) {
      eopt.method = resolve(mflags);
      eopt.output_dir = e_output;
      eopt.metrics = !no_metrics;
      if (!e_csv.empty()) eopt.csv = e_csv;
      const auto manifest = open_dataset(e_input);
      if (enhance->parsed()) return report(harness::run_enhance(eopt, manifest), "enhance");
      return report(harness::run_estimate(eopt, manifest), "estimate");
    }
    if (synth->parsed()) {
      sopt.clean_dir = s_clean;
      sopt.depth_dir = s_depth;
      sopt.out_dir = s_out;
      sopt.beta.beta = {s_beta.at(0), s_beta.at(1), s_beta.at(2)};
      sopt.ambient = to_ambient(s_ambient);
      return report(harness::run_synth(sopt), "synth");
    }
    if (train->parsed()) {
      if (t_preset == "toy") {
        topt.net = net::NetConfig::toy();
      } else if (t_preset != "default") {
        throw ConfigError("unknown preset '" + t_preset + "' (default|toy)");
      }
      if (t_input_size) topt.net.input_size = t_input_size;
      topt.out_dir = t_out;
      if (!t_init.empty()) topt.init_checkpoint = t_init;
      const auto labeled = open_dataset(t_labeled);
      std::optional<dataset::Manifest> unlabeled;
      if (!t_unlabeled.empty()) unlabeled = open_dataset(t_unlabeled);
      auto r = harness::run_train(topt, labeled, unlabeled);
      std::cerr << "train: " << r.train.log.size() << " iterations, final objective " << r.train.log.back().total
                << ", checkpoints in " << (topt.out_dir / "checkpoints").string() << '\n';
      return 0;
    }
    if (eval->parsed()) {
      vopt.enhanced_dir = v_enh;
      if (!v_ref.empty()) vopt.reference_dir = v_ref;
      if (!v_depth.empty()) vopt.depth_dir = v_depth;
      if (!v_trans.empty()) vopt.transmission_dir = v_trans;
      vopt.out_csv = v_out;
      return report(harness::run_eval(vopt), "eval");
    }
    if (ingest->parsed()) {
      auto r = dataset::ingest(i_input);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      const auto issues = dataset::check_files(r.manifest);
      for (const auto& i : issues) std::cerr << "error: " << i.image_id << ": " << i.message << '\n';
      std::cout << r.manifest.entries.size() << " entries: " << r.manifest.labeled_count() << " labeled, "
                << r.manifest.unlabeled_count() << " unlabeled\n";
      if (!i_manifest.empty()) dataset::save(i_manifest, r.manifest);
      return issues.empty() ? 0 : kExitItems;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitItems;
  }
  return 0;
}
