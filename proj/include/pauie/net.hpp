#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pauie/image.hpp"
#include "pauie/nn/autograd.hpp"

// Dual-stream estimator of the image formation parameters: a red-channel
// tuner, a CNN encoder-decoder predicting per-channel transmission, a
// transformer predicting the ambient light, and residual exchange modules
// linking encoder levels with transformer blocks.
namespace pauie::net {

using nn::Tensor;
using nn::Var;

struct NetConfig {
  std::size_t input_size = 256;
  std::size_t rct_filters = 16;
  // Enc_1..Enc_5 followed by Dec_1..Dec_4.
  std::array<std::size_t, 9> enc_dec_filters{64, 128, 256, 512, 512, 256, 128, 64, 64};
  std::size_t token_dim = 384;
  std::size_t heads = 6;
  std::size_t transformer_blocks = 5;
  std::size_t patch_stride = 16;
  std::size_t mlp_ratio = 4;
  // Encoder levels (2..5) that exchange features with transformer block level-1.
  std::set<std::size_t> rcm_levels{2, 3, 4, 5};

  void validate() const;
  std::size_t grid() const { return input_size / patch_stride; }
  std::size_t tokens() const { return grid() * grid() + 1; }
  std::size_t encoder_channels(std::size_t level) const { return enc_dec_filters.at(level - 1); }

  /// Small configuration used for gradient checks and desk-scale training.
  static NetConfig toy();

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

std::string to_json(const NetConfig& cfg);
NetConfig config_from_json(std::string_view text);

enum class Mode { kTrain, kEval };

/// Named parameters (trainable) and buffers (batch-norm running statistics).
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var var;
  };
  struct Buffer {
    std::string name;
    Tensor value;
  };

  Var& add_parameter(const std::string& name, Tensor init);
  Tensor& add_buffer(const std::string& name, Tensor init);

  Var& parameter(std::string_view name);
  const Var& parameter(std::string_view name) const;
  Tensor& buffer(std::string_view name);
  const Tensor& buffer(std::string_view name) const;
  bool has_parameter(std::string_view name) const;

  std::vector<Entry>& parameters() { return params_; }
  const std::vector<Entry>& parameters() const { return params_; }
  std::vector<Buffer>& buffers() { return buffers_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }

  /// Total number of trainable scalars.
  std::size_t parameter_count() const;

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  void zero_grad();
  /// Deep copy with independent parameter nodes.
  ParameterStore clone() const;

 private:
  std::vector<Entry> params_;
  std::vector<Buffer> buffers_;
  std::unordered_map<std::string, std::size_t> param_index_;
  std::unordered_map<std::string, std::size_t> buffer_index_;
  Mode mode_ = Mode::kTrain;
};

struct NetOutput {
  Var t_hat;       // [N,3,H,W], sigmoid-bounded
  Var a_hat;       // [N,3], sigmoid-bounded
  Var rct_weight;  // [N,1]
  // Per-level encoder outputs after any exchange; filled by forward().
  std::vector<Var> encoder_features;
};

class PaUieNet {
 public:
  explicit PaUieNet(NetConfig cfg, std::uint64_t seed = 0);
  PaUieNet(NetConfig cfg, ParameterStore store);

  const NetConfig& config() const { return cfg_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  void set_mode(Mode m) { store_.set_mode(m); }
  Mode mode() const { return store_.mode(); }

  /// Input batch [N,3,S,S] with S == input_size.
  NetOutput forward(const Var& images);

  // Stages, exposed for testing.
  std::pair<Var, Var> rct_forward(const Var& images);
  Var encoder_block(std::size_t level, const Var& x);
  Var decoder_block(std::size_t index, const Var& x, const Var& skip);
  Var transmission_head(const Var& x);
  Var patchify(const Var& enc1);
  Var transformer_block(std::size_t index, const Var& tokens);
  Var ambient_head(const Var& tokens);
  std::pair<Var, Var> rcm_exchange(std::size_t level, const Var& features, const Var& tokens);

  PaUieNet clone() const { return PaUieNet(cfg_, store_.clone()); }

 private:
  void build(std::uint64_t seed);
  Var conv_bn_relu(const std::string& prefix, const Var& x);
  const Var& p(const std::string& name) { return store_.parameter(name); }

  NetConfig cfg_;
  ParameterStore store_;
};

/// Stacks equally sized images into an [N,3,H,W] tensor.
Tensor to_batch(std::span<const Image> images);
Tensor to_batch(const Image& image);
Image image_at(const Tensor& batch, std::size_t n);
TransmissionMaps transmission_at(const Tensor& batch, std::size_t n);
AmbientLight ambient_at(const Tensor& ambient, std::size_t n);

}  // namespace pauie::net
