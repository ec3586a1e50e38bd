#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotbert/encoder.hpp"

namespace cotbert {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  /// Linear warmup length in steps; 0 disables warmup.
  std::size_t warmup_steps = 0;

  nlohmann::json to_json() const;
};

/// Adam with decoupled weight decay. Keeps moment estimates for the local
/// parameters of one encoder; backends without local parameters get the
/// hyperparameters forwarded through Encoder::delegated_step.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(Encoder& encoder);

  std::size_t steps_taken() const noexcept { return steps_; }
  double current_learning_rate() const noexcept;
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  AdamWConfig config_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace cotbert
