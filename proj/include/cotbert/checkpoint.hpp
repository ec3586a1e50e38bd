#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "cotbert/encoder.hpp"
#include "cotbert/templates.hpp"
#include "cotbert/tokenizer.hpp"

namespace cotbert {

// Checkpoint directory layout:
//   encoder.json, encoder.bin (or native/)   backend container
//   tokenizer/vocab.txt, tokenizer/tokenizer.json
//   templates.json
//   meta.json   sidecar: template variant, temperature, denoise mode, loss
//               variant, max_len, step, best dev Spearman, full config

struct CheckpointMeta {
  std::size_t step = 0;
  double dev_spearman = 0.0;  // x100
  std::size_t max_len = 0;
  nlohmann::json config;      // materialized TrainConfig

  nlohmann::json to_json(const Tokenizer& tokenizer, const TemplateSet& templates) const;
};

struct Checkpoint {
  std::unique_ptr<Encoder> encoder;
  Tokenizer tokenizer;
  TemplateSet templates;
  nlohmann::json meta;

  std::size_t max_len() const;
  double dev_spearman() const;
};

void save_checkpoint(const std::filesystem::path& dir, const Encoder& encoder, const Tokenizer& tokenizer,
                     const TemplateSet& templates, const CheckpointMeta& meta);

/// Throws ErrorKind::config when the stored tokenizer identity does not
/// match the sidecar metadata.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& remote_url = "");

}  // namespace cotbert
