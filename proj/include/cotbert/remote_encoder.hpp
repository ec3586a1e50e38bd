#pragma once

#include <memory>
#include <string>

#include "cotbert/encoder.hpp"

namespace cotbert {

/// Thin adapter for a pretrained encoder served out of process over HTTP/JSON.
///
/// The server owns parameters, autograd state and the optimizer; this side
/// only ships EncodedBatch fields and gradients. Endpoints:
///
///   GET  /info       -> {"hidden_dim", "supports_position_ids", "trainable"}
///   POST /forward    {"mode", "token_ids", "attention_mask", ["position_ids"]}
///                    -> {"hidden": [batch][seq][dim], ["handle"]}
///   POST /backward   {"handle", "grad": [batch][seq][dim]}
///   POST /zero_grad  {}
///   POST /step       {"optimizer": {...}}
///   POST /save       {"path"}      native checkpoint (e.g. save_pretrained)
///   POST /load       {"path"}
///
/// Every response is a JSON object; {"error": "..."} marks a failure.
class RemoteEncoder final : public Encoder {
 public:
  /// `url` like "http://127.0.0.1:8765". Queries /info immediately.
  explicit RemoteEncoder(std::string url);

  std::string_view backend() const override { return "remote"; }
  std::size_t hidden_dim() const override { return hidden_dim_; }
  bool supports_position_ids() const override { return supports_position_ids_; }
  bool trainable() const override { return trainable_; }

  Activations forward(const EncodedBatch& batch) override;
  void backward(const Activations& activations, const Tensor3& grad_hidden) override;
  void zero_grad() override;
  void delegated_step(const nlohmann::json& optimizer) override;

  void save(const std::filesystem::path& dir) const override;
  nlohmann::json describe() const override;
  void load_native(const std::filesystem::path& native_dir);

  const std::string& url() const noexcept { return url_; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  std::string url_;
  std::size_t hidden_dim_ = 0;
  bool supports_position_ids_ = false;
  bool trainable_ = false;
};

}  // namespace cotbert
