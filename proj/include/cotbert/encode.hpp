#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cotbert/templates.hpp"
#include "cotbert/tokenizer.hpp"

namespace cotbert {

inline constexpr std::size_t kDefaultMaxLen = 64;

/// Token-level view of a template: everything before the sentence slot
/// (including [CLS]) and everything after it (including [SEP]).
struct TemplateLayout {
  std::vector<TokenId> prefix;
  std::vector<TokenId> suffix;
  /// Index of the last mask token counted from the start of the suffix, or
  /// from the start of the prefix when the suffix holds no mask.
  std::size_t last_mask_offset = 0;
  bool last_mask_in_suffix = true;

  std::size_t template_len() const noexcept { return prefix.size() + suffix.size(); }
};

TemplateLayout layout_template(const TemplateSpec& tmpl, const Tokenizer& tokenizer);

/// A rendered, tokenized batch padded to `max_len`.
struct EncodedBatch {
  std::size_t max_len = 0;
  std::vector<TokenId> token_ids;             // [batch x max_len]
  std::vector<std::uint8_t> attention_mask;   // [batch x max_len]
  std::vector<std::size_t> final_mask_pos;    // [batch]
  std::vector<std::size_t> sentence_token_lens;
  std::vector<std::size_t> sentence_start;    // first sentence-slot index per row
  /// Empty means the default 0..max_len-1 for every row; otherwise [batch x max_len].
  std::vector<std::int32_t> position_ids;

  std::size_t batch_size() const noexcept { return final_mask_pos.size(); }

  std::span<const TokenId> ids(std::size_t row) const {
    return {token_ids.data() + row * max_len, max_len};
  }
  std::span<const std::uint8_t> mask(std::size_t row) const {
    return {attention_mask.data() + row * max_len, max_len};
  }
  std::int32_t position(std::size_t row, std::size_t col) const {
    return position_ids.empty() ? static_cast<std::int32_t>(col) : position_ids[row * max_len + col];
  }
  /// Number of leading positions up to and including the last attended one.
  std::size_t attended_extent(std::size_t row) const;

  /// Checks the structural invariants; throws ErrorKind::internal on violation.
  void validate(const SpecialTokens& specials) const;
};

/// Renders every sentence into `tmpl` and tokenizes it. Sentences longer than
/// the slot budget are truncated at the token level; template tokens are never
/// dropped. Throws ErrorKind::config when max_len cannot hold the template plus
/// one sentence token, ErrorKind::input for blank sentences.
EncodedBatch encode_batch(const TemplateSpec& tmpl, std::span<const std::string> sentences,
                          const Tokenizer& tokenizer, std::size_t max_len = kDefaultMaxLen);

/// Rows [begin, end) of a batch.
EncodedBatch slice_rows(const EncodedBatch& batch, std::size_t begin, std::size_t end);

}  // namespace cotbert
