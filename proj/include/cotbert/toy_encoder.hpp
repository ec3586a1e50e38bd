#pragma once

#include <random>
#include <vector>

#include "cotbert/encoder.hpp"

namespace cotbert {

/// Small pre-LayerNorm transformer encoder with hand-written backprop.
///
///   x = tok_emb[id] + pos_emb[position]
///   per layer:  x += Dropout(MultiHeadAttention(LN(x)))
///               x += Dropout(W2 gelu(W1 LN(x) + b1) + b2)
///   out = LN(x)
///
/// Attention ignores keys whose attention_mask is 0. Positions past the last
/// attended index are not computed and come back as zero vectors.
class ToyEncoder final : public Encoder {
 public:
  explicit ToyEncoder(const ToyEncoderConfig& config);

  std::string_view backend() const override { return "toy"; }
  std::size_t hidden_dim() const override { return config_.hidden_dim; }
  bool supports_position_ids() const override { return true; }
  bool trainable() const override { return true; }

  Activations forward(const EncodedBatch& batch) override;
  void backward(const Activations& activations, const Tensor3& grad_hidden) override;

  std::vector<ParamRef> parameters() override;
  void zero_grad() override;

  void save(const std::filesystem::path& dir) const override;
  nlohmann::json describe() const override;
  static std::unique_ptr<ToyEncoder> load(const std::filesystem::path& dir);

  const ToyEncoderConfig& config() const noexcept { return config_; }

  struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
  };

  struct Layer {
    Param ln1_gain, ln1_bias;
    Param wq, bq, wk, bk, wv, bv, wo, bo;
    Param ln2_gain, ln2_bias;
    Param w1, b1, w2, b2;
  };

 private:
  template <class F>
  void for_each_param(F&& f);
  template <class F>
  void for_each_param(F&& f) const;

  ToyEncoderConfig config_;
  Param tok_emb_;
  Param pos_emb_;
  std::vector<Layer> layers_;
  Param lnf_gain_;
  Param lnf_bias_;
  std::mt19937_64 dropout_rng_;
};

}  // namespace cotbert
