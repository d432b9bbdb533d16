#include "pauie/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "json.hpp"

#include "pauie/nn/ops.hpp"

namespace pauie::net {

namespace ops = nn::ops;

void NetConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ParameterError(std::string("NetConfig: ") + what + " must be >= 1");
  };
  positive(input_size, "input_size");
  positive(rct_filters, "rct_filters");
  for (auto f : enc_dec_filters) positive(f, "enc_dec_filters");
  positive(token_dim, "token_dim");
  positive(heads, "heads");
  positive(transformer_blocks, "transformer_blocks");
  positive(patch_stride, "patch_stride");
  positive(mlp_ratio, "mlp_ratio");
  if (input_size % 16 != 0) {
    throw DimensionError("NetConfig: input_size must be divisible by 16 (four 2x poolings)");
  }
  if (input_size % patch_stride != 0) {
    throw DimensionError("NetConfig: input_size must be divisible by patch_stride");
  }
  if (token_dim % heads != 0) throw DimensionError("NetConfig: token_dim must be divisible by heads");
  for (std::size_t level : rcm_levels) {
    if (level < 2 || level > 5) throw ParameterError("NetConfig: rcm levels must lie in 2..5");
    if (level - 1 > transformer_blocks) {
      throw ParameterError("NetConfig: rcm level " + std::to_string(level) + " has no transformer block to pair with");
    }
    // Encoder level resolution must be an integer multiple of the token grid.
    const std::size_t res = input_size >> (level - 1);
    if (res % grid() != 0) {
      throw DimensionError("NetConfig: encoder level " + std::to_string(level) +
                           " resolution is not a multiple of the token grid");
    }
  }
}

NetConfig NetConfig::toy() {
  NetConfig cfg;
  cfg.input_size = 32;
  cfg.rct_filters = 4;
  cfg.enc_dec_filters = {4, 8, 16, 32, 32, 16, 8, 4, 4};
  cfg.token_dim = 32;
  cfg.heads = 2;
  cfg.transformer_blocks = 5;
  cfg.patch_stride = 16;
  return cfg;
}

std::string to_json(const NetConfig& cfg) {
  nlohmann::json j;
  j["input_size"] = cfg.input_size;
  j["rct_filters"] = cfg.rct_filters;
  j["enc_dec_filters"] = cfg.enc_dec_filters;
  j["token_dim"] = cfg.token_dim;
  j["heads"] = cfg.heads;
  j["transformer_blocks"] = cfg.transformer_blocks;
  j["patch_stride"] = cfg.patch_stride;
  j["mlp_ratio"] = cfg.mlp_ratio;
  j["rcm_levels"] = std::vector<std::size_t>(cfg.rcm_levels.begin(), cfg.rcm_levels.end());
  return j.dump();
}

NetConfig config_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  NetConfig cfg;
  cfg.input_size = j.at("input_size");
  cfg.rct_filters = j.at("rct_filters");
  cfg.enc_dec_filters = j.at("enc_dec_filters").get<std::array<std::size_t, 9>>();
  cfg.token_dim = j.at("token_dim");
  cfg.heads = j.at("heads");
  cfg.transformer_blocks = j.at("transformer_blocks");
  cfg.patch_stride = j.at("patch_stride");
  cfg.mlp_ratio = j.value("mlp_ratio", std::size_t{4});
  const auto levels = j.at("rcm_levels").get<std::vector<std::size_t>>();
  cfg.rcm_levels = std::set<std::size_t>(levels.begin(), levels.end());
  cfg.validate();
  return cfg;
}

// ParameterStore ------------------------------------------------------------

Var& ParameterStore::add_parameter(const std::string& name, Tensor init) {
  if (param_index_.count(name) || buffer_index_.count(name)) {
    throw ParameterError("ParameterStore: duplicate name " + name);
  }
  param_index_.emplace(name, params_.size());
  params_.push_back({name, Var(std::move(init), true)});
  return params_.back().var;
}

Tensor& ParameterStore::add_buffer(const std::string& name, Tensor init) {
  if (param_index_.count(name) || buffer_index_.count(name)) {
    throw ParameterError("ParameterStore: duplicate name " + name);
  }
  buffer_index_.emplace(name, buffers_.size());
  buffers_.push_back({name, std::move(init)});
  return buffers_.back().value;
}

Var& ParameterStore::parameter(std::string_view name) {
  auto it = param_index_.find(std::string(name));
  if (it == param_index_.end()) throw ParameterError("ParameterStore: unknown parameter " + std::string(name));
  return params_[it->second].var;
}

const Var& ParameterStore::parameter(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->parameter(name);
}

Tensor& ParameterStore::buffer(std::string_view name) {
  auto it = buffer_index_.find(std::string(name));
  if (it == buffer_index_.end()) throw ParameterError("ParameterStore: unknown buffer " + std::string(name));
  return buffers_[it->second].value;
}

const Tensor& ParameterStore::buffer(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->buffer(name);
}

bool ParameterStore::has_parameter(std::string_view name) const {
  return param_index_.count(std::string(name)) != 0;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : params_) n += e.var.value().numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : params_) e.var.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& e : params_) out.add_parameter(e.name, e.var.value());
  for (const auto& b : buffers_) out.add_buffer(b.name, b.value);
  out.mode_ = mode_;
  return out;
}

// Network --------------------------------------------------------------------

namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor kaiming_uniform(nn::Shape shape, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = dist(rng_);
    return t;
  }

  Tensor truncated_normal(nn::Shape shape, double stddev = 0.02) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor t(std::move(shape));
    for (auto& v : t.data()) {
      double z;
      do {
        z = dist(rng_);
      } while (std::abs(z) > 2.0);
      v = stddev * z;
    }
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

PaUieNet::PaUieNet(NetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build(seed);
}

PaUieNet::PaUieNet(NetConfig cfg, ParameterStore store) : cfg_(std::move(cfg)), store_(std::move(store)) {
  cfg_.validate();
  // Verify the store carries exactly the architecture's names and shapes.
  PaUieNet reference(cfg_, 0);
  const auto& want = reference.store();
  if (want.parameters().size() != store_.parameters().size() || want.buffers().size() != store_.buffers().size()) {
    throw DimensionError("PaUieNet: parameter set does not match the configuration");
  }
  for (const auto& e : want.parameters()) {
    if (store_.parameter(e.name).shape() != e.var.shape()) {
      throw DimensionError("PaUieNet: shape mismatch for " + e.name);
    }
  }
  for (const auto& b : want.buffers()) {
    if (store_.buffer(b.name).shape() != b.value.shape()) {
      throw DimensionError("PaUieNet: shape mismatch for buffer " + b.name);
    }
  }
}

void PaUieNet::build(std::uint64_t seed) {
  Initializer init(seed);
  auto& s = store_;
  const auto& f = cfg_.enc_dec_filters;
  const std::size_t D = cfg_.token_dim;

  auto conv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
    s.add_parameter(name + ".weight", init.kaiming_uniform({out, in, k, k}, in * k * k));
    s.add_parameter(name + ".bias", Tensor({out}));
  };
  auto bn = [&](const std::string& name, std::size_t c) {
    s.add_parameter(name + ".weight", Tensor({c}, 1.0));
    s.add_parameter(name + ".bias", Tensor({c}));
    s.add_buffer(name + ".running_mean", Tensor({c}));
    s.add_buffer(name + ".running_var", Tensor({c}, 1.0));
  };
  auto conv_bn = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    conv(prefix + ".0.conv", in, out, 3);
    bn(prefix + ".0.bn", out);
    conv(prefix + ".1.conv", out, out, 3);
    bn(prefix + ".1.bn", out);
  };
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    s.add_parameter(name + ".weight", init.truncated_normal({out, in}));
    s.add_parameter(name + ".bias", Tensor({out}));
  };
  auto norm = [&](const std::string& name, std::size_t d) {
    s.add_parameter(name + ".weight", Tensor({d}, 1.0));
    s.add_parameter(name + ".bias", Tensor({d}));
  };

  conv("rct.conv", 3, cfg_.rct_filters, 3);
  linear("rct.fc", cfg_.rct_filters, 1);

  for (std::size_t level = 1; level <= 5; ++level) {
    conv_bn("enc" + std::to_string(level), level == 1 ? 3 : f[level - 2], f[level - 1]);
  }
  // Dec_i consumes the previous stage (upsampled) concatenated with Enc_{5-i}.
  std::size_t below = f[4];
  for (std::size_t i = 1; i <= 4; ++i) {
    const std::size_t skip = f[4 - i];
    conv_bn("dec" + std::to_string(i), below + skip, f[4 + i]);
    below = f[4 + i];
  }
  conv("head", f[8], 3, 1);

  linear("patch.proj", f[0], D);
  s.add_parameter("patch.pos", init.truncated_normal({cfg_.grid() * cfg_.grid(), D}));
  s.add_parameter("ambient_token", init.truncated_normal({D}));
  for (std::size_t b = 1; b <= cfg_.transformer_blocks; ++b) {
    const std::string pre = "trans" + std::to_string(b);
    norm(pre + ".ln1", D);
    linear(pre + ".attn.qkv", D, 3 * D);
    linear(pre + ".attn.proj", D, D);
    norm(pre + ".ln2", D);
    linear(pre + ".mlp.fc1", D, cfg_.mlp_ratio * D);
    linear(pre + ".mlp.fc2", cfg_.mlp_ratio * D, D);
  }
  linear("ambient_head", D, 3);

  for (std::size_t level : cfg_.rcm_levels) {
    const std::size_t c = f[level - 1] + D;
    const std::string pre = "rcm" + std::to_string(level) + ".conv";
    s.add_parameter(pre + ".weight", Tensor({c, c, 1, 1}));
    s.add_parameter(pre + ".bias", Tensor({c}));
  }
}

Var PaUieNet::conv_bn_relu(const std::string& prefix, const Var& x) {
  Var y = ops::conv2d(x, p(prefix + ".conv.weight"), p(prefix + ".conv.bias"));
  y = ops::batch_norm2d(y, p(prefix + ".bn.weight"), p(prefix + ".bn.bias"),
                        store_.buffer(prefix + ".bn.running_mean"), store_.buffer(prefix + ".bn.running_var"),
                        store_.mode() == Mode::kTrain);
  return ops::relu(y);
}

std::pair<Var, Var> PaUieNet::rct_forward(const Var& images) {
  Var feat = ops::relu(ops::conv2d(images, p("rct.conv.weight"), p("rct.conv.bias")));
  Var pooled = ops::global_avg_pool(feat);
  Var weight = ops::sigmoid(ops::linear(pooled, p("rct.fc.weight"), p("rct.fc.bias")));
  return {ops::scale_red(images, weight), weight};
}

Var PaUieNet::encoder_block(std::size_t level, const Var& x) {
  const std::string pre = "enc" + std::to_string(level);
  return conv_bn_relu(pre + ".1", conv_bn_relu(pre + ".0", x));
}

Var PaUieNet::decoder_block(std::size_t index, const Var& x, const Var& skip) {
  const std::string pre = "dec" + std::to_string(index);
  Var up = ops::upsample_bilinear(x, skip.dim(2), skip.dim(3));
  return conv_bn_relu(pre + ".1", conv_bn_relu(pre + ".0", ops::concat_channels(up, skip)));
}

Var PaUieNet::transmission_head(const Var& x) {
  return ops::sigmoid(ops::conv2d(x, p("head.weight"), p("head.bias")));
}

Var PaUieNet::patchify(const Var& enc1) {
  if (enc1.dim(2) % cfg_.patch_stride || enc1.dim(3) % cfg_.patch_stride) {
    throw DimensionError("patchify: feature map " + nn::shape_string(enc1.shape()) +
                         " not divisible by patch stride " + std::to_string(cfg_.patch_stride));
  }
  Var pooled = ops::avg_pool(enc1, cfg_.patch_stride);
  Var tokens = ops::linear(ops::spatial_to_tokens(pooled), p("patch.proj.weight"), p("patch.proj.bias"));
  tokens = ops::add_positional(tokens, p("patch.pos"));
  return ops::prepend_token(p("ambient_token"), tokens);
}

Var PaUieNet::transformer_block(std::size_t index, const Var& tokens) {
  const std::string pre = "trans" + std::to_string(index);
  Var h = ops::layer_norm(tokens, p(pre + ".ln1.weight"), p(pre + ".ln1.bias"));
  h = ops::self_attention(ops::linear(h, p(pre + ".attn.qkv.weight"), p(pre + ".attn.qkv.bias")), cfg_.heads);
  Var x = ops::add(tokens, ops::linear(h, p(pre + ".attn.proj.weight"), p(pre + ".attn.proj.bias")));
  Var m = ops::layer_norm(x, p(pre + ".ln2.weight"), p(pre + ".ln2.bias"));
  m = ops::gelu(ops::linear(m, p(pre + ".mlp.fc1.weight"), p(pre + ".mlp.fc1.bias")));
  m = ops::linear(m, p(pre + ".mlp.fc2.weight"), p(pre + ".mlp.fc2.bias"));
  return ops::add(x, m);
}

Var PaUieNet::ambient_head(const Var& tokens) {
  Var token = ops::slice_tokens(tokens, 0, 1);
  Var a = ops::sigmoid(ops::linear(token, p("ambient_head.weight"), p("ambient_head.bias")));
  return ops::reshape(a, {tokens.dim(0), 3});
}

std::pair<Var, Var> PaUieNet::rcm_exchange(std::size_t level, const Var& features, const Var& tokens) {
  if (!cfg_.rcm_levels.count(level)) {
    throw ParameterError("rcm_exchange: level " + std::to_string(level) + " is not configured");
  }
  const std::size_t g = cfg_.grid();
  const std::size_t h = features.dim(2), w = features.dim(3), c = features.dim(1);
  if (h % g || w % g || tokens.dim(1) != g * g + 1) {
    throw DimensionError("rcm_exchange: features " + nn::shape_string(features.shape()) +
                         " incompatible with a " + std::to_string(g) + "x" + std::to_string(g) + " token grid");
  }
  const std::size_t D = tokens.dim(2);
  Var ambient = ops::slice_tokens(tokens, 0, 1);
  Var spatial = ops::slice_tokens(tokens, 1, tokens.dim(1));
  Var folded = ops::tokens_to_spatial(spatial, g, g);
  Var pooled = ops::avg_pool(features, h / g);
  const std::string pre = "rcm" + std::to_string(level) + ".conv";
  Var mixed = ops::conv2d(ops::concat_channels(pooled, folded), p(pre + ".weight"), p(pre + ".bias"));
  Var enc_part = ops::upsample_bilinear(ops::slice_channels(mixed, 0, c), h, w);
  Var tok_part = ops::spatial_to_tokens(ops::slice_channels(mixed, c, c + D));
  Var new_features = ops::add(features, enc_part);
  Var new_tokens = ops::concat_tokens(ambient, ops::add(spatial, tok_part));
  return {new_features, new_tokens};
}

NetOutput PaUieNet::forward(const Var& images) {
  if (images.value().rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.input_size ||
      images.dim(3) != cfg_.input_size) {
    throw DimensionError("forward: expected [N,3," + std::to_string(cfg_.input_size) + "," +
                         std::to_string(cfg_.input_size) + "], got " + nn::shape_string(images.shape()));
  }
  NetOutput out;
  auto [tuned, weight] = rct_forward(images);
  out.rct_weight = weight;

  Var x = encoder_block(1, tuned);
  out.encoder_features.push_back(x);
  Var tokens = patchify(x);
  for (std::size_t level = 2; level <= 5; ++level) {
    x = encoder_block(level, ops::max_pool2(x));
    const std::size_t block = level - 1;
    if (block <= cfg_.transformer_blocks) tokens = transformer_block(block, tokens);
    if (cfg_.rcm_levels.count(level)) std::tie(x, tokens) = rcm_exchange(level, x, tokens);
    out.encoder_features.push_back(x);
  }
  for (std::size_t block = 5; block <= cfg_.transformer_blocks; ++block) tokens = transformer_block(block, tokens);
  out.a_hat = ambient_head(tokens);

  Var d = out.encoder_features[4];
  for (std::size_t i = 1; i <= 4; ++i) d = decoder_block(i, d, out.encoder_features[4 - i]);
  out.t_hat = transmission_head(d);
  return out;
}

// Conversions ----------------------------------------------------------------

Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) throw DimensionError("to_batch: empty image list");
  const std::size_t h = images[0].height(), w = images[0].width(), plane = 3 * h * w;
  Tensor out({images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    require_same_extent(images[0], images[n], "to_batch");
    std::copy(images[n].data().begin(), images[n].data().end(), out.data().begin() + n * plane);
  }
  return out;
}

Tensor to_batch(const Image& image) { return to_batch(std::span<const Image>(&image, 1)); }

namespace {

template <class F>
F field_at(const Tensor& batch, std::size_t n) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || n >= batch.dim(0)) {
    throw DimensionError("batch tensor " + nn::shape_string(batch.shape()) + " has no image " + std::to_string(n));
  }
  F out(batch.dim(2), batch.dim(3));
  const std::size_t plane = out.data().size();
  std::copy_n(batch.data().begin() + n * plane, plane, out.data().begin());
  return out;
}

}  // namespace

Image image_at(const Tensor& batch, std::size_t n) { return field_at<Image>(batch, n); }

TransmissionMaps transmission_at(const Tensor& batch, std::size_t n) {
  return field_at<TransmissionMaps>(batch, n);
}

AmbientLight ambient_at(const Tensor& ambient, std::size_t n) {
  if (ambient.rank() != 2 || ambient.dim(1) != 3 || n >= ambient.dim(0)) {
    throw DimensionError("ambient tensor " + nn::shape_string(ambient.shape()) + " has no row " + std::to_string(n));
  }
  return AmbientLight{{ambient[3 * n], ambient[3 * n + 1], ambient[3 * n + 2]}};
}

}  // namespace pauie::net
