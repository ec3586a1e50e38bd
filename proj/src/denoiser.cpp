#include "cotbert/denoiser.hpp"

#include <algorithm>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"

namespace cotbert {

std::string_view to_string(DenoiseMode mode) {
  switch (mode) {
    case DenoiseMode::pad: return "pad";
    case DenoiseMode::position: return "position";
    case DenoiseMode::none: return "none";
  }
  return "unknown";
}

DenoiseMode parse_denoise_mode(std::string_view name) {
  for (auto m : {DenoiseMode::pad, DenoiseMode::position, DenoiseMode::none}) {
    if (to_string(m) == name) return m;
  }
  fail(ErrorKind::config, "unknown denoise mode '" + std::string(name) + "' (expected pad|position|none)");
}

EncodedBatch build_empty_batch(const TemplateSpec& tmpl, std::span<const std::size_t> sentence_token_lens,
                               const Tokenizer& tokenizer, std::size_t max_len) {
  const TemplateLayout layout = layout_template(tmpl, tokenizer);
  const auto& sp = tokenizer.specials();
  const std::size_t n = sentence_token_lens.size();
  require(layout.template_len() <= max_len, ErrorKind::config,
          "max_len " + std::to_string(max_len) + " cannot hold template '" + tmpl.name() + "'");

  EncodedBatch batch;
  batch.max_len = max_len;
  batch.token_ids.assign(n * max_len, sp.pad);
  batch.attention_mask.assign(n * max_len, 0);
  batch.final_mask_pos.resize(n);
  batch.sentence_token_lens.assign(sentence_token_lens.begin(), sentence_token_lens.end());
  batch.sentence_start.assign(n, layout.prefix.size());

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = sentence_token_lens[i];
    require(layout.template_len() + len <= max_len, ErrorKind::internal,
            "sentence length " + std::to_string(len) + " does not fit the empty template");
    TokenId* row = batch.token_ids.data() + i * max_len;
    std::size_t pos = 0;
    for (TokenId t : layout.prefix) row[pos++] = t;
    pos += len;  // slot stays [PAD]
    const std::size_t suffix_start = pos;
    for (TokenId t : layout.suffix) row[pos++] = t;
    std::fill_n(batch.attention_mask.begin() + static_cast<std::ptrdiff_t>(i * max_len), pos, 1);
    batch.final_mask_pos[i] = layout.last_mask_in_suffix ? suffix_start + layout.last_mask_offset : layout.last_mask_offset;
  }
  return batch;
}

EncodedBatch build_position_batch(const TemplateSpec& tmpl, const EncodedBatch& filled, const Tokenizer& tokenizer) {
  const std::size_t n = filled.batch_size();
  const std::size_t max_len = filled.max_len;
  const std::vector<std::size_t> zeros(n, 0);
  EncodedBatch batch = build_empty_batch(tmpl, zeros, tokenizer, max_len);
  const TemplateLayout layout = layout_template(tmpl, tokenizer);
  const std::size_t prefix = layout.prefix.size();

  batch.position_ids.resize(n * max_len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto shift = static_cast<std::int32_t>(filled.sentence_token_lens[i]);
    std::int32_t* row = batch.position_ids.data() + i * max_len;
    for (std::size_t j = 0; j < max_len; ++j) {
      const auto col = static_cast<std::int32_t>(j);
      if (j < prefix) row[j] = col;
      else if (j < prefix + layout.suffix.size()) row[j] = col + shift;
      else row[j] = col;  // unattended tail
    }
  }
  return batch;
}

EncodedBatch bias_batch(const TemplateSpec& tmpl, const EncodedBatch& filled, const Tokenizer& tokenizer,
                        const DenoiseConfig& config) {
  switch (config.mode) {
    case DenoiseMode::pad: {
      EncodedBatch empty = build_empty_batch(tmpl, filled.sentence_token_lens, tokenizer, filled.max_len);
      require(empty.final_mask_pos == filled.final_mask_pos, ErrorKind::internal,
              "empty template does not line up with the filled batch for template '" + tmpl.name() + "'");
      return empty;
    }
    case DenoiseMode::position:
      return build_position_batch(tmpl, filled, tokenizer);
    case DenoiseMode::none:
      break;
  }
  fail(ErrorKind::config, "no template bias exists for denoise mode none");
}

Matrix denoise(const Matrix& embeddings, const Matrix& bias, const DenoiseConfig& config) {
  if (config.mode == DenoiseMode::none) return embeddings;
  require(embeddings.rows() == bias.rows() && embeddings.cols() == bias.cols(), ErrorKind::shape,
          "embeddings and template bias differ in shape");
  Matrix out(embeddings.rows(), embeddings.cols());
  simd::sub(embeddings.values(), bias.values(), out.values());
  return out;
}

Matrix compute_bias(Encoder& encoder, const TemplateSpec& tmpl, const EncodedBatch& filled,
                    const Tokenizer& tokenizer, const DenoiseConfig& config) {
  require(config.mode != DenoiseMode::none, ErrorKind::config, "compute_bias called with denoise mode none");
  require(config.mode != DenoiseMode::position || encoder.supports_position_ids(), ErrorKind::config,
          "encoder backend '" + std::string(encoder.backend()) + "' cannot override position ids for position denoising");
  const EncodedBatch empty = bias_batch(tmpl, filled, tokenizer, config);
  return extract_final_mask(encoder.forward(empty).hidden, empty);
}

}  // namespace cotbert
