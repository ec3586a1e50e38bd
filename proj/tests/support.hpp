#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cotbert/encoder.hpp"
#include "cotbert/sts.hpp"
#include "cotbert/templates.hpp"
#include "cotbert/tensor.hpp"
#include "cotbert/tokenizer.hpp"
#include "cotbert/toy_encoder.hpp"

namespace testing {

inline const std::vector<std::string>& toy_corpus() {
  static const std::vector<std::string> sentences = {
      "A man is playing a guitar.",           "A woman is slicing an onion.",
      "Two dogs run across the field.",       "The children are laughing in the park.",
      "A chef cooks pasta in a big pot.",     "The train leaves the station at noon.",
      "An old man reads a newspaper.",        "A girl rides a red bicycle.",
      "The cat sleeps on the warm sofa.",     "A boy kicks a ball into the goal.",
      "Heavy rain floods the narrow street.", "The band plays music on the stage.",
      "A pilot lands the plane safely.",      "Students write notes during the lecture.",
      "A farmer feeds the hungry cows.",      "The baby drinks milk from a bottle.",
      "Two women talk over coffee.",          "A bird builds a nest in the tree.",
      "The doctor examines a patient.",       "A man swims across the cold lake.",
      "The sun sets behind the mountains.",   "A dog catches a frisbee in the air.",
      "The police stop a speeding car.",      "A woman plants flowers in the garden.",
      "Fishermen pull nets onto the boat.",   "The teacher explains a math problem.",
      "A horse jumps over the fence.",        "Workers repair the broken bridge.",
      "A child builds a sand castle.",        "The crowd cheers for the runner.",
      "A man paints the wooden door.",        "Snow covers the quiet village."};
  return sentences;
}

// Disjoint from toy_corpus().
inline std::vector<cotbert::StsExample> toy_dev() {
  return {{"A man plays the guitar.", "A man is playing guitar.", 4.8},
          {"A woman cuts an onion.", "A woman is chopping onions.", 4.2},
          {"A dog runs in a field.", "Two dogs play in the grass.", 3.1},
          {"The cat is sleeping.", "A plane is landing.", 0.2},
          {"A boy plays football.", "A child kicks a ball.", 3.6},
          {"Rain falls on the street.", "The chef cooks dinner.", 0.4},
          {"The band performs live.", "Musicians play on stage.", 4.0},
          {"A farmer feeds cows.", "A woman waters plants.", 1.2},
          {"The doctor checks a patient.", "A doctor examines someone.", 4.4},
          {"A horse jumps a fence.", "The sun sets slowly.", 0.0},
          {"Children laugh in a park.", "Kids are playing outside.", 3.4},
          {"A bird sits in a tree.", "The train leaves.", 0.6}};
}

inline cotbert::Tokenizer toy_tokenizer() {
  std::vector<std::string> texts = toy_corpus();
  for (const auto& ex : toy_dev()) {
    texts.push_back(ex.sentence_a);
    texts.push_back(ex.sentence_b);
  }
  for (auto v : cotbert::kAllTemplateVariants) {
    const auto set = cotbert::builtin_template_set(v);
    for (const auto* t : {&set.anchor, &set.positive, &set.negative}) {
      for (const auto& seg : t->segments()) {
        if (const auto* lit = std::get_if<cotbert::Literal>(&seg)) texts.push_back(lit->text);
      }
    }
  }
  return cotbert::Tokenizer::build_word_level(texts);
}

inline cotbert::ToyEncoderConfig toy_config(std::size_t vocab_size, double dropout = 0.0, std::uint64_t seed = 42) {
  cotbert::ToyEncoderConfig c;
  c.vocab_size = vocab_size;
  c.dropout = dropout;
  c.seed = seed;
  return c;
}

inline cotbert::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  cotbert::Matrix m(rows, cols);
  for (auto& v : m.values()) v = n(rng);
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cotbert_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

/// Every position of a row holds the vector assigned to the row's first
/// sentence token; unknown tokens map to `fallback`.
class LookupEncoder final : public cotbert::Encoder {
 public:
  LookupEncoder(std::map<cotbert::TokenId, std::vector<double>> table, std::size_t dim)
      : table_(std::move(table)), dim_(dim) {}

  std::string_view backend() const override { return "lookup"; }
  std::size_t hidden_dim() const override { return dim_; }
  bool supports_position_ids() const override { return true; }
  bool trainable() const override { return false; }

  cotbert::Activations forward(const cotbert::EncodedBatch& batch) override {
    cotbert::Activations act;
    act.hidden = cotbert::Tensor3(batch.batch_size(), batch.max_len, dim_);
    for (std::size_t i = 0; i < batch.batch_size(); ++i) {
      const auto id = batch.ids(i)[batch.sentence_start[i]];
      const auto it = table_.find(id);
      const std::vector<double> fallback(dim_, 1.0);
      const auto& v = it == table_.end() ? fallback : it->second;
      for (std::size_t s = 0; s < batch.max_len; ++s) std::copy(v.begin(), v.end(), act.hidden.at(i, s).begin());
    }
    return act;
  }
  void save(const std::filesystem::path&) const override {}
  nlohmann::json describe() const override { return {{"backend", "lookup"}}; }

 private:
  std::map<cotbert::TokenId, std::vector<double>> table_;
  std::size_t dim_;
};

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testing
