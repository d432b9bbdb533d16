#include "pauie/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>

#include "json.hpp"
#include "pauie/checkpoint.hpp"
#include "pauie/ifm.hpp"
#include "pauie/imaging.hpp"
#include "pauie/io.hpp"

namespace pauie::harness {

namespace {

const std::map<std::string, Method>& method_table() {
  static const std::map<std::string, Method> table{
      {"dcp", Method::kDcp},         {"udcp", Method::kUdcp},           {"he", Method::kHe},
      {"retinex", Method::kRetinex}, {"grayworld", Method::kGrayWorld}, {"pauienet", Method::kPauieNet},
  };
  return table;
}

std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.is_regular_file() && io::is_image_file(item.path())) files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (!out.emplace(f.stem().string(), f).second) {
      throw ConfigError("ambiguous stem '" + f.stem().string() + "' in " + dir.string());
    }
  }
  return out;
}

void write_report(const fs::path& path, const std::vector<metrics::MetricReport>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  metrics::write_csv(out, rows);
}

DepthMap matching_depth(const fs::path& path, double scale, const Image& like) {
  auto d = io::read_depth(path, scale);
  if (d.height() != like.height() || d.width() != like.width()) {
    throw DimensionError("depth " + path.filename().string() + " does not match the image size");
  }
  return d;
}

template <class F>
void for_each_item(std::size_t n, std::vector<metrics::MetricReport>& rows, F&& body) {
  rows.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i, rows[i]);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  }
}

}  // namespace

Method parse_method(const std::string& name) {
  auto it = method_table().find(name);
  if (it == method_table().end()) {
    throw ConfigError("unknown method '" + name + "' (dcp|udcp|he|retinex|grayworld|pauienet)");
  }
  return it->second;
}

std::string method_name(Method m) {
  for (const auto& [name, value] : method_table()) {
    if (value == m) return name;
  }
  return "?";
}

bool estimates_parameters(Method m) { return m == Method::kDcp || m == Method::kUdcp || m == Method::kPauieNet; }

void MethodConfig::validate() const {
  try {
    dcp.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (he_bins < 2) throw ConfigError("he-bins must be >= 2");
  if (retinex.scales.empty()) throw ConfigError("retinex needs at least one scale");
  for (double s : retinex.scales) {
    if (!(s > 0.0)) throw ConfigError("retinex scales must be > 0");
  }
  if (!(retinex.eps > 0.0)) throw ConfigError("retinex-eps must be > 0");
  if (!(retinex.low_percentile >= 0.0 && retinex.low_percentile < retinex.high_percentile &&
        retinex.high_percentile <= 100.0)) {
    throw ConfigError("retinex percentiles must satisfy 0 <= low < high <= 100");
  }
  if (!(t_floor > 0.0 && t_floor <= 1.0)) throw ConfigError("t-floor must lie in (0,1]");
  if (method == Method::kPauieNet) {
    if (!checkpoint) throw ConfigError("method pauienet needs --checkpoint");
    if (!fs::is_regular_file(*checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint->string());
  }
}

Enhancer::Enhancer(MethodConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.method == Method::kPauieNet) {
    try {
      model_ = std::make_shared<net::PaUieNet>(checkpoint::load_model(*cfg_.checkpoint));
    } catch (const Error& e) {
      throw ConfigError(std::string("cannot load checkpoint: ") + e.what());
    }
  }
}

Estimate Enhancer::estimate(const Image& img) const {
  switch (cfg_.method) {
    case Method::kDcp: {
      auto e = priors::dcp_estimate(img, cfg_.dcp);
      return {std::move(e.t), e.a};
    }
    case Method::kUdcp: {
      auto e = priors::udcp_estimate(img, cfg_.dcp);
      return {std::move(e.t), e.a};
    }
    case Method::kPauieNet: {
      nn::NoGradGuard guard;
      const std::size_t s = model_->config().input_size;
      const Image small = imaging::resize_bilinear(img, s, s);
      auto out = model_->forward(nn::Var(net::to_batch(small)));
      auto t = imaging::resize_bilinear(net::transmission_at(out.t_hat.value(), 0), img.height(), img.width());
      return {std::move(t), net::ambient_at(out.a_hat.value(), 0)};
    }
    default:
      throw ConfigError("method " + method_name(cfg_.method) + " does not estimate transmission and ambient light");
  }
}

Enhancement Enhancer::run(const Image& img) const {
  switch (cfg_.method) {
    case Method::kHe: return {priors::hist_equalize(img, cfg_.he_bins), std::nullopt};
    case Method::kRetinex: return {priors::retinex_msr(img, cfg_.retinex), std::nullopt};
    case Method::kGrayWorld: return {priors::gray_world(img).image, std::nullopt};
    default: {
      auto e = estimate(img);
      Image j = ifm::enhance(img, e.t, e.a, cfg_.t_floor);
      return {std::move(j), std::move(e)};
    }
  }
}

std::size_t RunSummary::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok(); }));
}

metrics::MetricReport score(const std::string& id, const Image& out, const Image* reference,
                            const TransmissionMaps* t, const DepthMap* depth, std::size_t pcc_channel) {
  metrics::MetricReport r;
  r.image_id = id;
  if (reference) {
    require_same_extent(out, *reference, "reference");
    r.psnr = metrics::psnr(out, *reference);
    r.ssim = metrics::ssim(out, *reference);
    try {
      r.angular_error = metrics::angular_error(out, *reference);
    } catch (const UndefinedError&) {
    }
  }
  r.uiqm = metrics::uiqm(out);
  r.uciqe = metrics::uciqe(out);
  if (t && depth) {
    try {
      r.pcc = metrics::pcc_transmission(*t, *depth, pcc_channel);
    } catch (const UndefinedError&) {
    }
  }
  return r;
}

RunSummary run_enhance(const EnhanceOptions& opt, const dataset::Manifest& manifest) {
  if (opt.pcc_channel > 2) throw ConfigError("pcc-channel must be 0, 1 or 2");
  const Enhancer enhancer(opt.method);
  fs::create_directories(opt.output_dir);
  RunSummary summary;
  const auto& entries = manifest.entries;
  for_each_item(entries.size(), summary.rows, [&](std::size_t i, metrics::MetricReport& row) {
    const auto& e = entries[i];
    row.image_id = e.image_id;
    const Image img = io::read_image(e.degraded);
    auto result = enhancer.run(img);
    io::write_image(opt.output_dir / (e.image_id + ".png"), result.image);
    if (!opt.metrics) return;
    const Image written = io::quantize8(result.image);
    std::optional<Image> ref;
    if (e.reference) ref = io::read_image(*e.reference);
    std::optional<DepthMap> depth;
    if (e.depth && result.estimate) depth = matching_depth(*e.depth, opt.depth_scale, img);
    row = score(e.image_id, written, ref ? &*ref : nullptr, result.estimate ? &result.estimate->t : nullptr,
                depth ? &*depth : nullptr, opt.pcc_channel);
  });
  write_report(opt.csv.value_or(opt.output_dir / "metrics.csv"), summary.rows);
  return summary;
}

RunSummary run_estimate(const EnhanceOptions& opt, const dataset::Manifest& manifest) {
  if (!estimates_parameters(opt.method.method)) {
    throw ConfigError("estimate needs a parameter-estimating method (dcp|udcp|pauienet)");
  }
  const Enhancer enhancer(opt.method);
  fs::create_directories(opt.output_dir);
  RunSummary summary;
  const auto& entries = manifest.entries;
  std::vector<AmbientLight> ambient(entries.size());
  for_each_item(entries.size(), summary.rows, [&](std::size_t i, metrics::MetricReport& row) {
    const auto& e = entries[i];
    row.image_id = e.image_id;
    const Image img = io::read_image(e.degraded);
    auto est = enhancer.estimate(img);
    io::write_transmission(opt.output_dir / (e.image_id + "_t.png"), est.t);
    io::write_image(opt.output_dir / (e.image_id + "_A.png"), constant_image(img.height(), img.width(), est.a.rgb));
    ambient[i] = est.a;
  });
  std::ofstream csv(opt.output_dir / "ambient.csv");
  if (!csv) throw IoError("cannot write ambient.csv");
  csv << "image_id,a_r,a_g,a_b,status\n" << std::setprecision(10);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& row = summary.rows[i];
    csv << row.image_id;
    if (row.ok()) {
      csv << ',' << ambient[i].rgb[0] << ',' << ambient[i].rgb[1] << ',' << ambient[i].rgb[2] << ",ok\n";
    } else {
      csv << ",,,," << metrics::csv_row(row).substr(metrics::csv_row(row).rfind(',') + 1) << '\n';
    }
  }
  return summary;
}

SynthPair synthesize(const Image& clean, const DepthMap& depth, const AttenuationCoefficients& beta,
                     const AmbientLight& a) {
  if (depth.height() != clean.height() || depth.width() != clean.width()) {
    throw DimensionError("synthesize: depth and clean image sizes differ");
  }
  SynthPair p;
  p.t = ifm::transmission_from_depth(depth, beta);
  p.degraded = ifm::degrade(clean, p.t, a);
  return p;
}

RunSummary run_synth(const SynthOptions& opt) {
  if (!opt.beta.valid()) throw ConfigError("beta must be finite and >= 0");
  if (!opt.ambient.valid()) throw ConfigError("ambient must lie in [0,1]");
  if (!(opt.depth_scale > 0.0)) throw ConfigError("depth-scale must be > 0");
  if (!(opt.jitter >= 0.0 && opt.jitter < 1.0)) throw ConfigError("jitter must lie in [0,1)");
  const auto clean = images_by_stem(opt.clean_dir);
  const auto depth = images_by_stem(opt.depth_dir);
  RunSummary summary;
  std::vector<std::pair<std::string, fs::path>> items;
  for (const auto& [stem, path] : clean) {
    if (depth.count(stem)) {
      items.emplace_back(stem, path);
    } else {
      summary.warnings.push_back("no depth map for " + path.string() + ", skipped");
    }
  }
  for (auto d : {"raw", "reference", "depth"}) fs::create_directories(opt.out_dir / d);

  std::vector<AttenuationCoefficients> betas(items.size());
  std::vector<AmbientLight> ambients(items.size());
  for_each_item(items.size(), summary.rows, [&](std::size_t i, metrics::MetricReport& row) {
    const auto& [id, path] = items[i];
    row.image_id = id;
    std::seed_seq seq{opt.seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(-opt.jitter, opt.jitter);
    AttenuationCoefficients beta = opt.beta;
    AmbientLight a = opt.ambient;
    for (std::size_t c = 0; c < 3; ++c) {
      beta.beta[c] *= 1.0 + u(rng);
      a.rgb[c] = std::clamp(a.rgb[c] * (1.0 + u(rng)), 0.0, 1.0);
    }
    const Image img = io::read_image(path);
    const DepthMap d = matching_depth(depth.at(id), opt.depth_scale, img);
    auto pair = synthesize(img, d, beta, a);
    io::write_image(opt.out_dir / "raw" / (id + ".png"), pair.degraded);
    io::write_image(opt.out_dir / "reference" / (id + ".png"), img);
    io::write_depth(opt.out_dir / "depth" / (id + ".png"), d, opt.depth_scale);
    betas[i] = beta;
    ambients[i] = a;
  });

  dataset::Manifest m;
  m.root = opt.out_dir;
  nlohmann::json gt;
  gt["version"] = 1;
  gt["depth_scale"] = opt.depth_scale;
  gt["seed"] = opt.seed;
  gt["images"] = nlohmann::json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!summary.rows[i].ok()) continue;
    const auto& id = items[i].first;
    m.entries.push_back({id, opt.out_dir / "raw" / (id + ".png"), opt.out_dir / "reference" / (id + ".png"),
                         opt.out_dir / "depth" / (id + ".png")});
    gt["images"].push_back({{"image_id", id},
                            {"beta", betas[i].beta},
                            {"ambient", ambients[i].rgb},
                            {"depth", (fs::path("depth") / (id + ".png")).string()}});
  }
  dataset::save(opt.out_dir / "manifest.json", m);
  std::ofstream g(opt.out_dir / "ground_truth.json");
  if (!g) throw IoError("cannot write ground_truth.json");
  g << std::setprecision(17) << gt.dump(2) << '\n';
  return summary;
}

TrainRunResult run_train(const TrainRunOptions& opt, const dataset::Manifest& labeled,
                         const std::optional<dataset::Manifest>& unlabeled) {
  TrainRunResult result;
  try {
    opt.train.schedule.validate();
    opt.train.weights.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (opt.init_checkpoint) {
    auto model = checkpoint::load_model(*opt.init_checkpoint);
    result.model = std::make_shared<net::PaUieNet>(std::move(model));
  } else {
    try {
      result.model = std::make_shared<net::PaUieNet>(opt.net, opt.train.seed);
    } catch (const Error& e) {
      throw ConfigError(std::string("invalid network configuration: ") + e.what());
    }
  }
  const std::size_t s = result.model->config().input_size;
  auto load = [s](const fs::path& p) { return imaging::resize_bilinear(io::read_image(p), s, s); };

  std::vector<training::LabeledPair> pairs;
  std::vector<Image> pool;
  for (const auto& e : labeled.entries) {
    if (e.labeled()) {
      pairs.push_back({load(e.degraded), load(*e.reference)});
    } else {
      pool.push_back(load(e.degraded));
    }
  }
  if (unlabeled) {
    for (const auto& e : unlabeled->entries) pool.push_back(load(e.degraded));
  }

  auto train = opt.train;
  fs::create_directories(opt.out_dir);
  train.checkpoint_dir = opt.out_dir / "checkpoints";
  result.loss_log = opt.out_dir / "loss_log.csv";
  train.loss_log = result.loss_log;
  result.train = training::train(*result.model, pairs, pool, train);
  result.model->set_mode(net::Mode::kEval);
  return result;
}

RunSummary run_eval(const EvalOptions& opt) {
  if (opt.pcc_channel > 2) throw ConfigError("pcc-channel must be 0, 1 or 2");
  const auto enhanced = images_by_stem(opt.enhanced_dir);
  std::map<std::string, fs::path> refs, depths, trans;
  if (opt.reference_dir) refs = images_by_stem(*opt.reference_dir);
  if (opt.depth_dir) depths = images_by_stem(*opt.depth_dir);
  if (opt.transmission_dir) trans = images_by_stem(*opt.transmission_dir);

  RunSummary summary;
  std::vector<std::pair<std::string, fs::path>> items(enhanced.begin(), enhanced.end());
  for (const auto& [stem, path] : refs) {
    if (!enhanced.count(stem)) summary.warnings.push_back("reference without enhanced image: " + path.string());
  }
  auto find = [](const std::map<std::string, fs::path>& m, const std::string& id) -> std::optional<fs::path> {
    if (auto it = m.find(id + "_t"); it != m.end()) return it->second;
    if (auto it = m.find(id); it != m.end()) return it->second;
    return std::nullopt;
  };
  for_each_item(items.size(), summary.rows, [&](std::size_t i, metrics::MetricReport& row) {
    const auto& [id, path] = items[i];
    row.image_id = id;
    const Image img = io::read_image(path);
    std::optional<Image> ref;
    if (auto it = refs.find(id); it != refs.end()) ref = io::read_image(it->second);
    std::optional<TransmissionMaps> t;
    std::optional<DepthMap> d;
    if (auto tp = find(trans, id); tp && depths.count(id)) {
      const Image timg = io::read_image(*tp);
      t.emplace(timg.height(), timg.width());
      std::copy(timg.data().begin(), timg.data().end(), t->data().begin());
      d = io::read_depth(depths.at(id), opt.depth_scale);
      if (d->height() != t->height() || d->width() != t->width()) {
        throw DimensionError("transmission and depth sizes differ for " + id);
      }
    }
    row = score(id, img, ref ? &*ref : nullptr, t ? &*t : nullptr, d ? &*d : nullptr, opt.pcc_channel);
  });
  write_report(opt.out_csv, summary.rows);
  return summary;
}

}  // namespace pauie::harness
