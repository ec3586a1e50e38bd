#include "cotbert/tokenizer.hpp"

#include <algorithm>
#include <cstdio>
#include <cctype>
#include <fstream>
#include <map>

#include "cotbert/error.hpp"

namespace cotbert {
namespace {

constexpr std::string_view kPad = "[PAD]";
constexpr std::string_view kUnk = "[UNK]";
constexpr std::string_view kMask = "[MASK]";
constexpr std::string_view kCls = "[CLS]";
constexpr std::string_view kSep = "[SEP]";

bool is_special_literal(std::string_view s) {
  return s == kPad || s == kUnk || s == kMask || s == kCls || s == kSep;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::size_t kMaxWordChars = 100;

}  // namespace

std::string_view to_string(Tokenizer::Model m) {
  return m == Tokenizer::Model::word_level ? "word_level" : "wordpiece";
}

std::vector<std::string> split_words(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      const auto close = text.find(']', i);
      if (close != std::string_view::npos && is_special_literal(text.substr(i, close - i + 1))) {
        flush();
        words.emplace_back(text.substr(i, close - i + 1));
        i = close + 1;
        continue;
      }
    }
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
    ++i;
  }
  flush();
  return words;
}

Tokenizer::Tokenizer(Model model, std::vector<std::string> vocab, bool lowercase)
    : model_(model), lowercase_(lowercase), vocab_(std::move(vocab)) {
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const bool inserted = index_.emplace(vocab_[i], static_cast<TokenId>(i)).second;
    require(inserted, ErrorKind::config, "duplicate vocabulary entry '" + vocab_[i] + "'");
  }
  auto need = [&](std::string_view tok) {
    const TokenId id = id_of(tok);
    require(id >= 0, ErrorKind::config, "vocabulary lacks special token " + std::string(tok));
    return id;
  };
  specials_ = SpecialTokens{need(kPad), need(kUnk), need(kMask), need(kCls), need(kSep)};
  require(specials_.mask != specials_.pad, ErrorKind::config, "mask and pad tokens must differ");
}

Tokenizer Tokenizer::load_vocab_file(const std::filesystem::path& vocab_txt, Model model, bool lowercase) {
  std::ifstream in(vocab_txt);
  require(in.good(), ErrorKind::io, "cannot open vocabulary " + vocab_txt.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return Tokenizer(model, std::move(vocab), lowercase);
}

Tokenizer Tokenizer::build_word_level(std::span<const std::string> texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split_words(t, true)) {
      if (!is_special_literal(w)) ++counts[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> vocab{std::string(kPad), std::string(kUnk), std::string(kMask), std::string(kCls),
                                 std::string(kSep)};
  for (auto& [w, n] : entries) {
    if (n >= min_count) vocab.push_back(w);
  }
  return Tokenizer(Model::word_level, std::move(vocab), true);
}

std::vector<TokenId> Tokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text, lowercase_)) {
    if (is_special_literal(w)) {
      ids.push_back(id_of(w));
    } else if (model_ == Model::word_level) {
      const TokenId id = id_of(w);
      ids.push_back(id >= 0 ? id : specials_.unk);
    } else {
      wordpiece(w, ids);
    }
  }
  return ids;
}

void Tokenizer::wordpiece(std::string_view word, std::vector<TokenId>& out) const {
  if (word.size() > kMaxWordChars) {
    out.push_back(specials_.unk);
    return;
  }
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    TokenId found = -1;
    while (start < end) {
      std::string sub(word.substr(start, end - start));
      if (start > 0) sub.insert(0, "##");
      found = id_of(sub);
      if (found >= 0) break;
      --end;
    }
    if (found < 0) {
      out.push_back(specials_.unk);
      return;
    }
    pieces.push_back(found);
    start = end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    const std::string& t = token(id);
    if (model_ == Model::wordpiece && t.starts_with("##")) {
      out += t.substr(2);
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

const std::string& Tokenizer::token(TokenId id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < vocab_.size(), ErrorKind::input,
          "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab_.size()));
  return vocab_[static_cast<std::size_t>(id)];
}

TokenId Tokenizer::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

nlohmann::json Tokenizer::identity() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : vocab_) h = fnv1a(t + '\n', h);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return {{"model", to_string(model_)}, {"lowercase", lowercase_}, {"vocab_size", vocab_.size()},
          {"vocab_hash", hex}};
}

void Tokenizer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "vocab.txt");
    require(out.good(), ErrorKind::io, "cannot write " + (dir / "vocab.txt").string());
    for (const auto& t : vocab_) out << t << '\n';
  }
  std::ofstream meta(dir / "tokenizer.json");
  require(meta.good(), ErrorKind::io, "cannot write " + (dir / "tokenizer.json").string());
  meta << identity().dump(2) << '\n';
}

Tokenizer Tokenizer::load(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "tokenizer.json");
  require(meta_in.good(), ErrorKind::io, "cannot open " + (dir / "tokenizer.json").string());
  const auto meta = nlohmann::json::parse(meta_in);
  const auto model_name = meta.at("model").get<std::string>();
  require(model_name == "word_level" || model_name == "wordpiece", ErrorKind::config,
          "unknown tokenizer model '" + model_name + "'");
  const Model model = model_name == "word_level" ? Model::word_level : Model::wordpiece;
  Tokenizer tok = load_vocab_file(dir / "vocab.txt", model, meta.at("lowercase").get<bool>());
  require(tok.identity() == meta, ErrorKind::config, "tokenizer vocabulary in " + dir.string() + " does not match its metadata");
  return tok;
}

}  // namespace cotbert
