#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cotbert/denoiser.hpp"
#include "cotbert/loss.hpp"
#include "cotbert/templates.hpp"

namespace cotbert {

inline constexpr double kToyLearningRate = 1e-3;
inline constexpr double kPretrainedLearningRate = 1e-5;

/// Everything that determines a training run. Serialized as a flat JSON
/// object; unknown keys and type mismatches are rejected.
struct TrainConfig {
  // optimization
  std::size_t batch_size = 64;
  std::optional<double> learning_rate;  // defaults by backend, see resolved_learning_rate()
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs
  std::size_t warmup_steps = 0;
  double weight_decay = 0.0;
  std::uint64_t seed = 42;

  // method
  std::size_t max_len = 64;
  TemplateVariant template_variant = TemplateVariant::full;
  std::string template_file;  // optional custom template set, overrides template_variant
  DenoiseMode denoise_mode = DenoiseMode::pad;
  bool stop_gradient_bias = false;
  LossVariant loss_variant = LossVariant::extended;
  double temperature = kDefaultTemperature;

  // dev-set checkpointing
  std::size_t eval_every_steps = 125;
  std::size_t eval_batch_size = 64;

  // backend
  std::string backend = "toy";  // toy | remote
  std::string remote_url;
  std::string vocab_file;  // WordPiece vocab.txt for the remote backend
  std::size_t hidden_dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 64;
  double dropout = 0.1;

  // data
  std::string corpus;
  std::string dev;
  std::string dev_format = "stsb_senteval";
  std::string output_dir;

  double resolved_learning_rate() const;

  /// Throws ErrorKind::config for out-of-range values.
  void validate() const;

  /// All fields, defaults materialized (learning_rate resolved).
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Loads `file` (if non-empty), applies `overrides` on top (flags win), and
/// validates. Unknown keys, type mismatches and out-of-range values throw
/// ErrorKind::config.
TrainConfig parse_config(const std::filesystem::path& file, const nlohmann::json& overrides);

/// Record written next to every run's outputs.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;  // adds build id and SIMD selection
  void write(const std::filesystem::path& path) const;
};

std::string build_id();

}  // namespace cotbert
