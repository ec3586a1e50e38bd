#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotbert/encode.hpp"
#include "cotbert/tensor.hpp"

namespace cotbert {

enum class Mode { train, eval };

/// Backend-specific state a forward pass leaves behind for backward.
struct ForwardCache {
  virtual ~ForwardCache() = default;
};

struct Activations {
  Tensor3 hidden;  // [batch x max_len x hidden_dim]
  std::shared_ptr<const ForwardCache> cache;
};

/// A trainable tensor owned by a backend, exposed for optimizers.
struct ParamRef {
  std::string_view name;
  std::span<double> value;
  std::span<double> grad;
};

/// Masked-language-model encoder: EncodedBatch -> per-token hidden states.
///
/// Unattended positions never influence attended ones. A single handle is
/// not safe for concurrent forward calls in train mode.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::string_view backend() const = 0;
  virtual std::size_t hidden_dim() const = 0;
  virtual bool supports_position_ids() const = 0;
  virtual bool trainable() const = 0;

  Mode mode() const noexcept { return mode_; }
  virtual void set_mode(Mode mode) { mode_ = mode; }

  virtual Activations forward(const EncodedBatch& batch) = 0;

  /// Accumulates parameter gradients for d(objective)/d(hidden) = grad_hidden.
  virtual void backward(const Activations& activations, const Tensor3& grad_hidden);

  /// Local parameters; empty when they live elsewhere (remote backends).
  virtual std::vector<ParamRef> parameters() { return {}; }
  virtual void zero_grad() {}

  /// For backends without local parameters: ask the backend to apply one
  /// optimizer step itself. `optimizer` carries the hyperparameters.
  virtual void delegated_step(const nlohmann::json& optimizer);

  /// Writes the backend's native checkpoint container plus encoder.json.
  virtual void save(const std::filesystem::path& dir) const = 0;

  /// Backend name and hyperparameters, as stored in encoder.json.
  virtual nlohmann::json describe() const = 0;

 private:
  Mode mode_ = Mode::eval;
};

/// Row i = hidden[i][final_mask_pos[i]].
Matrix extract_final_mask(const Tensor3& hidden, const EncodedBatch& batch);

/// Adjoint of extract_final_mask: a zero tensor with row i of `grad_rows`
/// placed at final_mask_pos[i].
Tensor3 scatter_final_mask(const Matrix& grad_rows, const EncodedBatch& batch, std::size_t hidden_dim);

/// Returns hidden states at the final mask of every row, processed in
/// chunks of `chunk` rows.
Matrix embed_final_mask(Encoder& encoder, const EncodedBatch& batch, std::size_t chunk = 64);

// ---------------------------------------------------------------------------

struct ToyEncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 64;
  std::size_t max_positions = 128;
  double dropout = 0.1;
  std::uint64_t seed = 42;

  nlohmann::json to_json() const;
  static ToyEncoderConfig from_json(const nlohmann::json& j);
};

class ToyEncoder;
std::unique_ptr<ToyEncoder> make_toy_encoder(const ToyEncoderConfig& config);

/// Returns the same seeded vector at every position for every input.
class ConstantEncoder final : public Encoder {
 public:
  ConstantEncoder(std::size_t hidden_dim, std::uint64_t seed = 7);
  explicit ConstantEncoder(std::vector<double> value);

  std::string_view backend() const override { return "constant"; }
  std::size_t hidden_dim() const override { return value_.size(); }
  bool supports_position_ids() const override { return true; }
  bool trainable() const override { return false; }
  Activations forward(const EncodedBatch& batch) override;
  void save(const std::filesystem::path& dir) const override;
  nlohmann::json describe() const override;

 private:
  std::vector<double> value_;
};

/// Loads whichever backend encoder.json in `dir` names. Remote backends need
/// `remote_url` (or the COTBERT_REMOTE_URL environment variable).
std::unique_ptr<Encoder> load_encoder(const std::filesystem::path& dir, const std::string& remote_url = "");

}  // namespace cotbert
