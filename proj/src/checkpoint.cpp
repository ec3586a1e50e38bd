#include "cotbert/checkpoint.hpp"

#include <fstream>

#include "cotbert/config.hpp"
#include "cotbert/error.hpp"

namespace cotbert {

nlohmann::json CheckpointMeta::to_json(const Tokenizer& tokenizer, const TemplateSet& templates) const {
  nlohmann::json j = {{"step", step},
                      {"dev_spearman", dev_spearman},
                      {"max_len", max_len},
                      {"template_variant", to_string(templates.variant)},
                      {"tokenizer", tokenizer.identity()},
                      {"config", config},
                      {"build_id", build_id()},
                      {"embedding_normalization", "l2 before alignment/uniformity; raw final-mask vectors otherwise"}};
  for (const char* key : {"temperature", "denoise_mode", "loss_variant"}) {
    if (config.contains(key)) j[key] = config.at(key);
  }
  return j;
}

std::size_t Checkpoint::max_len() const { return meta.at("max_len").get<std::size_t>(); }

double Checkpoint::dev_spearman() const { return meta.at("dev_spearman").get<double>(); }

void save_checkpoint(const std::filesystem::path& dir, const Encoder& encoder, const Tokenizer& tokenizer,
                     const TemplateSet& templates, const CheckpointMeta& meta) {
  std::filesystem::create_directories(dir);
  encoder.save(dir);
  tokenizer.save(dir / "tokenizer");
  {
    std::ofstream out(dir / "templates.json");
    require(out.good(), ErrorKind::io, "cannot write " + (dir / "templates.json").string());
    out << to_json(templates).dump(2) << '\n';
  }
  std::ofstream out(dir / "meta.json");
  require(out.good(), ErrorKind::io, "cannot write " + (dir / "meta.json").string());
  out << meta.to_json(tokenizer, templates).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& remote_url) {
  require(std::filesystem::is_directory(dir), ErrorKind::io, "checkpoint directory " + dir.string() + " does not exist");
  std::ifstream meta_in(dir / "meta.json");
  require(meta_in.good(), ErrorKind::io, "cannot open " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, "corrupt checkpoint metadata: " + std::string(e.what()));
  }
  Tokenizer tokenizer = Tokenizer::load(dir / "tokenizer");
  require(tokenizer.identity() == meta.at("tokenizer"), ErrorKind::config,
          "checkpoint tokenizer does not match its metadata in " + dir.string());
  TemplateSet templates = load_template_set(dir / "templates.json");
  std::string url = remote_url;
  if (url.empty() && meta.contains("config")) url = meta["config"].value("remote_url", "");
  auto encoder = load_encoder(dir, url);
  encoder->set_mode(Mode::eval);
  return Checkpoint{std::move(encoder), std::move(tokenizer), std::move(templates), std::move(meta)};
}

}  // namespace cotbert
