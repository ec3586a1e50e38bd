#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "cotbert/checkpoint.hpp"
#include "cotbert/error.hpp"
#include "cotbert/sts.hpp"
#include "support.hpp"

using namespace cotbert;

TEST_CASE("round trip reproduces embeddings bit for bit") {
  const auto dir = testing::temp_dir("ckpt");
  const auto tok = testing::toy_tokenizer();
  auto enc = make_toy_encoder(testing::toy_config(tok.vocab_size(), 0.1, 5));
  const auto templates = builtin_template_set(TemplateVariant::prefix_only);
  nlohmann::json config = {{"template_variant", "prefix_only"}};
  save_checkpoint(dir, *enc, tok, templates, {17, 55.5, 40, config});

  auto ckpt = load_checkpoint(dir);
  CHECK(ckpt.max_len() == 40);
  CHECK(ckpt.dev_spearman() == 55.5);
  CHECK(ckpt.meta.at("step") == 17);
  CHECK(ckpt.templates == templates);
  CHECK(ckpt.tokenizer.vocab_size() == tok.vocab_size());
  CHECK(ckpt.encoder->backend() == "toy");

  const auto& corpus = testing::toy_corpus();
  const auto a = embed_sentences(*enc, tok, templates.anchor, corpus, 40);
  const auto b = embed_sentences(ckpt, corpus);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin(), b.values().end()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("tokenizer mismatch is a config error") {
  const auto dir = testing::temp_dir("ckpt_mismatch");
  const auto tok = testing::toy_tokenizer();
  auto enc = make_toy_encoder(testing::toy_config(tok.vocab_size()));
  save_checkpoint(dir, *enc, tok, builtin_template_set(TemplateVariant::full), {0, 0.0, 64, nlohmann::json::object()});
  {
    std::ofstream out(dir / "tokenizer" / "vocab.txt", std::ios::app);
    out << "zzzextra\n";
  }
  try {
    load_checkpoint(dir);
    FAIL("mismatched tokenizer accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing or corrupt checkpoints") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt"), Error);
  const auto dir = testing::temp_dir("ckpt_corrupt");
  testing::write_file(dir / "meta.json", "{not json");
  try {
    load_checkpoint(dir);
    FAIL("corrupt metadata accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("constant encoder checkpoints") {
  const auto dir = testing::temp_dir("ckpt_const");
  const auto tok = testing::toy_tokenizer();
  ConstantEncoder enc(6, 3);
  save_checkpoint(dir, enc, tok, builtin_template_set(TemplateVariant::full), {0, 0.0, 64, nlohmann::json::object()});
  auto ckpt = load_checkpoint(dir);
  CHECK(ckpt.encoder->backend() == "constant");
  CHECK(ckpt.encoder->hidden_dim() == 6);
  std::filesystem::remove_all(dir);
}
