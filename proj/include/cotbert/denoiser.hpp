#pragma once

#include <span>
#include <string_view>

#include "cotbert/encode.hpp"
#include "cotbert/encoder.hpp"

namespace cotbert {

/// pad: sentence slot filled with length-matched [PAD] tokens, all attended.
/// position: zero-length slot, position ids shifted to match the filled batch.
/// none: embeddings pass through unchanged.
enum class DenoiseMode { pad, position, none };

std::string_view to_string(DenoiseMode mode);
DenoiseMode parse_denoise_mode(std::string_view name);

struct DenoiseConfig {
  DenoiseMode mode = DenoiseMode::pad;
  /// Treat the template bias as a constant during backprop.
  bool stop_gradient_bias = false;
};

/// Empty template whose sentence slot holds exactly `sentence_token_lens[i]`
/// pad tokens. Attention is 1 over the whole template including those pads and
/// 0 over the padded tail, so final mask positions match the filled batch.
EncodedBatch build_empty_batch(const TemplateSpec& tmpl, std::span<const std::size_t> sentence_token_lens,
                               const Tokenizer& tokenizer, std::size_t max_len);

/// Template with an empty sentence slot whose position ids after the slot are
/// shifted by each row's sentence length, reproducing the positions of `filled`.
EncodedBatch build_position_batch(const TemplateSpec& tmpl, const EncodedBatch& filled, const Tokenizer& tokenizer);

/// The batch whose final-mask embedding is the template bias for `filled`
/// under `config.mode` (which must not be none).
EncodedBatch bias_batch(const TemplateSpec& tmpl, const EncodedBatch& filled, const Tokenizer& tokenizer,
                        const DenoiseConfig& config);

/// embeddings - bias, or embeddings unchanged for mode none.
Matrix denoise(const Matrix& embeddings, const Matrix& bias, const DenoiseConfig& config);

/// Forward pass on bias_batch and final-mask extraction. Throws
/// ErrorKind::config for mode none, or for mode position on a backend that
/// cannot override position ids.
Matrix compute_bias(Encoder& encoder, const TemplateSpec& tmpl, const EncodedBatch& filled,
                    const Tokenizer& tokenizer, const DenoiseConfig& config);

}  // namespace cotbert
