#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotbert {

using TokenId = std::int32_t;

struct SpecialTokens {
  TokenId pad = 0;
  TokenId unk = 1;
  TokenId mask = 2;
  TokenId cls = 3;
  TokenId sep = 4;
};

/// Vocabulary-backed tokenizer.
///
/// Text is pre-split BERT style: whitespace separates words, every ASCII
/// punctuation character becomes its own word, bracketed special-token
/// literals such as "[MASK]" stay whole. ASCII letters are lowercased when
/// `lowercase` is set; other bytes pass through untouched.
///
/// - word_level: each word is looked up directly ([UNK] when absent). Used by
///   the toy encoder; vocabularies are built from a corpus.
/// - wordpiece: greedy longest-match-first subwords with "##" continuations,
///   loaded from a BERT vocab.txt.
class Tokenizer {
 public:
  enum class Model { word_level, wordpiece };

  Tokenizer(Model model, std::vector<std::string> vocab, bool lowercase = true);

  static Tokenizer load_vocab_file(const std::filesystem::path& vocab_txt, Model model, bool lowercase = true);

  /// Word-level vocab: specials first, then every word seen in `texts` at least
  /// `min_count` times, ordered by descending count then lexicographically.
  static Tokenizer build_word_level(std::span<const std::string> texts, std::size_t min_count = 1);

  std::vector<TokenId> tokenize(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  const SpecialTokens& specials() const noexcept { return specials_; }
  const std::string& token(TokenId id) const;
  /// -1 when absent.
  TokenId id_of(std::string_view token) const;
  const std::string& mask_token() const { return token(specials_.mask); }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  Model model() const noexcept { return model_; }
  bool lowercase() const noexcept { return lowercase_; }

  /// Kind, size, and a hash of the vocabulary; stored in checkpoint metadata.
  nlohmann::json identity() const;

  /// Writes vocab.txt and tokenizer.json into `dir`.
  void save(const std::filesystem::path& dir) const;
  static Tokenizer load(const std::filesystem::path& dir);

 private:
  void wordpiece(std::string_view word, std::vector<TokenId>& out) const;

  Model model_;
  bool lowercase_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> index_;
  SpecialTokens specials_;
};

std::string_view to_string(Tokenizer::Model m);

/// Pre-tokenization shared by both models (exposed for tests).
std::vector<std::string> split_words(std::string_view text, bool lowercase);

}  // namespace cotbert
