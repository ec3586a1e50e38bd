#include "cotbert/encode.hpp"

#include <algorithm>
#include <cctype>
#include <variant>

#include "cotbert/error.hpp"

namespace cotbert {

TemplateLayout layout_template(const TemplateSpec& tmpl, const Tokenizer& tokenizer) {
  const auto& sp = tokenizer.specials();
  TemplateLayout layout;
  layout.prefix.push_back(sp.cls);
  bool after_slot = false;
  for (const auto& seg : tmpl.segments()) {
    auto& dst = after_slot ? layout.suffix : layout.prefix;
    if (const auto* lit = std::get_if<Literal>(&seg)) {
      const auto ids = tokenizer.tokenize(lit->text);
      dst.insert(dst.end(), ids.begin(), ids.end());
    } else if (std::holds_alternative<MaskSlot>(seg)) {
      dst.push_back(sp.mask);
    } else {
      after_slot = true;
    }
  }
  layout.suffix.push_back(sp.sep);

  const auto in_suffix = std::find(layout.suffix.rbegin(), layout.suffix.rend(), sp.mask);
  if (in_suffix != layout.suffix.rend()) {
    layout.last_mask_in_suffix = true;
    layout.last_mask_offset = static_cast<std::size_t>(layout.suffix.rend() - in_suffix) - 1;
  } else {
    const auto in_prefix = std::find(layout.prefix.rbegin(), layout.prefix.rend(), sp.mask);
    require(in_prefix != layout.prefix.rend(), ErrorKind::internal, "template '" + tmpl.name() + "' tokenized without a mask");
    layout.last_mask_in_suffix = false;
    layout.last_mask_offset = static_cast<std::size_t>(layout.prefix.rend() - in_prefix) - 1;
  }
  return layout;
}

std::size_t EncodedBatch::attended_extent(std::size_t row) const {
  const auto m = mask(row);
  for (std::size_t j = max_len; j > 0; --j) {
    if (m[j - 1]) return j;
  }
  return 0;
}

void EncodedBatch::validate(const SpecialTokens& specials) const {
  const std::size_t n = batch_size();
  require(token_ids.size() == n * max_len && attention_mask.size() == n * max_len &&
              sentence_token_lens.size() == n && sentence_start.size() == n &&
              (position_ids.empty() || position_ids.size() == n * max_len),
          ErrorKind::internal, "encoded batch fields have inconsistent sizes");
  for (std::size_t i = 0; i < n; ++i) {
    const auto ids_row = ids(i);
    const auto mask_row = mask(i);
    for (std::size_t j = 0; j < max_len; ++j) {
      require(mask_row[j] || ids_row[j] == specials.pad, ErrorKind::internal,
              "unattended position holds a non-pad token (row " + std::to_string(i) + ")");
    }
    const std::size_t f = final_mask_pos[i];
    require(f < max_len && mask_row[f] == 1 && ids_row[f] == specials.mask, ErrorKind::internal,
            "final mask position is invalid (row " + std::to_string(i) + ")");
    for (std::size_t j = f + 1; j < max_len; ++j) {
      require(!(mask_row[j] && ids_row[j] == specials.mask), ErrorKind::internal,
              "a mask token follows the recorded final mask (row " + std::to_string(i) + ")");
    }
  }
}

EncodedBatch encode_batch(const TemplateSpec& tmpl, std::span<const std::string> sentences,
                          const Tokenizer& tokenizer, std::size_t max_len) {
  const TemplateLayout layout = layout_template(tmpl, tokenizer);
  require(max_len >= layout.template_len() + 1, ErrorKind::config,
          "max_len " + std::to_string(max_len) + " cannot hold template '" + tmpl.name() + "' (" +
              std::to_string(layout.template_len()) + " tokens) plus a sentence");
  const std::size_t budget = max_len - layout.template_len();
  const auto& sp = tokenizer.specials();

  EncodedBatch batch;
  batch.max_len = max_len;
  const std::size_t n = sentences.size();
  batch.token_ids.assign(n * max_len, sp.pad);
  batch.attention_mask.assign(n * max_len, 0);
  batch.final_mask_pos.resize(n);
  batch.sentence_token_lens.resize(n);
  batch.sentence_start.assign(n, layout.prefix.size());

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = sentences[i];
    require(!std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; }),
            ErrorKind::input, "sentence " + std::to_string(i) + " is empty");
    auto sent = tokenizer.tokenize(s);
    if (sent.size() > budget) sent.resize(budget);

    TokenId* row = batch.token_ids.data() + i * max_len;
    std::size_t pos = 0;
    for (TokenId t : layout.prefix) row[pos++] = t;
    for (TokenId t : sent) row[pos++] = t;
    const std::size_t suffix_start = pos;
    for (TokenId t : layout.suffix) row[pos++] = t;
    std::fill_n(batch.attention_mask.begin() + static_cast<std::ptrdiff_t>(i * max_len), pos, 1);

    batch.sentence_token_lens[i] = sent.size();
    batch.final_mask_pos[i] =
        layout.last_mask_in_suffix ? suffix_start + layout.last_mask_offset : layout.last_mask_offset;
  }
  return batch;
}

EncodedBatch slice_rows(const EncodedBatch& batch, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= batch.batch_size(), ErrorKind::shape, "row slice out of range");
  const auto L = static_cast<std::ptrdiff_t>(batch.max_len);
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(end);
  EncodedBatch out;
  out.max_len = batch.max_len;
  out.token_ids.assign(batch.token_ids.begin() + b * L, batch.token_ids.begin() + e * L);
  out.attention_mask.assign(batch.attention_mask.begin() + b * L, batch.attention_mask.begin() + e * L);
  out.final_mask_pos.assign(batch.final_mask_pos.begin() + b, batch.final_mask_pos.begin() + e);
  out.sentence_token_lens.assign(batch.sentence_token_lens.begin() + b, batch.sentence_token_lens.begin() + e);
  out.sentence_start.assign(batch.sentence_start.begin() + b, batch.sentence_start.begin() + e);
  if (!batch.position_ids.empty()) {
    out.position_ids.assign(batch.position_ids.begin() + b * L, batch.position_ids.begin() + e * L);
  }
  return out;
}

}  // namespace cotbert
