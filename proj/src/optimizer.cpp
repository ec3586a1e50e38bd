#include "cotbert/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "cotbert/error.hpp"

namespace cotbert {

nlohmann::json AdamWConfig::to_json() const {
  return {{"name", "adamw"},         {"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2},           {"epsilon", epsilon},             {"weight_decay", weight_decay},
          {"warmup_steps", warmup_steps}};
}

double AdamW::current_learning_rate() const noexcept {
  if (config_.warmup_steps == 0) return config_.learning_rate;
  const double frac = std::min(1.0, static_cast<double>(steps_ + 1) / static_cast<double>(config_.warmup_steps));
  return config_.learning_rate * frac;
}

void AdamW::step(Encoder& encoder) {
  const double lr = current_learning_rate();
  auto params = encoder.parameters();
  if (params.empty()) {
    auto cfg = config_.to_json();
    cfg["learning_rate"] = lr;
    encoder.delegated_step(cfg);
    ++steps_;
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  require(m_.size() == params.size(), ErrorKind::internal, "optimizer state does not match encoder parameters");

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].value;
    const auto grad = params[k].grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
      value[i] -= lr * (update + config_.weight_decay * value[i]);
    }
  }
}

}  // namespace cotbert
