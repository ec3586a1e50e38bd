#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "cotbert/tensor.hpp"

namespace cotbert {

/// Denominator terms per anchor row i, summed over every j = 1..N (j = i included):
///   standard        exp(cos(r_i, r_j+)/t)
///   extended_no_pn  ... + exp(cos(r_i, r_j-)/t)
///   extended        ... + exp(cos(r_i+, r_j-)/t)
/// The numerator is always exp(cos(r_i, r_i+)/t).
enum class LossVariant { standard, extended_no_pn, extended };

std::string_view to_string(LossVariant v);
/// Accepts "standard", "extended-no-pn" (or "extended_no_pn"), "extended".
LossVariant parse_loss_variant(std::string_view name);

inline constexpr double kDefaultTemperature = 0.05;

struct LossConfig {
  double temperature = kDefaultTemperature;
  LossVariant variant = LossVariant::extended;

  void validate() const;
};

/// Denoised anchor / positive / hard-negative embeddings, one row per sentence.
/// `negative` may be empty (0x0) for the standard variant.
struct TripletEmbeddings {
  Matrix anchor;
  Matrix positive;
  Matrix negative;
};

struct LossResult {
  double loss = 0.0;          // mean over rows
  std::vector<double> per_row;
};

/// d(mean loss)/d(embedding), same shapes as the input.
struct LossGradient {
  Matrix anchor;
  Matrix positive;
  Matrix negative;
};

/// u.v / (|u||v|). Throws ErrorKind::numeric for a zero-norm argument.
double cosine(std::span<const double> u, std::span<const double> v);

/// Evaluated with a max-shifted log-sum-exp. When `gradient` is non-null it
/// receives the analytic gradient. Throws ErrorKind::input for N = 0 and
/// ErrorKind::numeric for non-finite or zero rows.
LossResult contrastive_loss(const TripletEmbeddings& batch, const LossConfig& config, LossGradient* gradient = nullptr);

/// Largest relative error between the analytic gradient and fourth-order
/// central differences with step `epsilon`, over every embedding entry. Relative error
/// is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double loss_gradient_check(const TripletEmbeddings& batch, const LossConfig& config, double epsilon);

struct CosineRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme cosine values among all anchor/positive/negative pairings; used
/// for diagnostics when a training step goes non-finite.
CosineRange cosine_extrema(const TripletEmbeddings& batch);

}  // namespace cotbert
