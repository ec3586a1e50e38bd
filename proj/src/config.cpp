#include "cotbert/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"

#ifndef COTBERT_BUILD_ID
#define COTBERT_BUILD_ID "unknown"
#endif

namespace cotbert {
namespace {

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
  const auto& v = j.at(key);
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      require(v.is_number_integer(), ErrorKind::config, "config key '" + key + "' must be an integer");
      require(v.get<std::int64_t>() >= 0, ErrorKind::config, "config key '" + key + "' must be non-negative");
    } else if constexpr (std::is_same_v<T, double>) {
      require(v.is_number(), ErrorKind::config, "config key '" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      require(v.is_boolean(), ErrorKind::config, "config key '" + key + "' must be true or false");
    } else {
      require(v.is_string(), ErrorKind::config, "config key '" + key + "' must be a string");
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "config key '" + key + "': " + e.what());
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "batch_size",   "learning_rate",  "epochs",           "max_steps",       "warmup_steps", "weight_decay",
      "seed",         "max_len",        "template_variant", "template_file",   "denoise_mode", "stop_gradient_bias",
      "loss_variant", "temperature",    "eval_every_steps", "eval_batch_size", "backend",      "remote_url",
      "vocab_file",   "hidden_dim",     "layers",           "heads",           "ffn_dim",      "dropout",
      "corpus",       "dev",            "dev_format",       "output_dir"};
  return keys;
}

}  // namespace

double TrainConfig::resolved_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return backend == "toy" ? kToyLearningRate : kPretrainedLearningRate;
}

void TrainConfig::validate() const {
  require(batch_size > 0, ErrorKind::config, "batch_size must be positive");
  require(epochs > 0, ErrorKind::config, "epochs must be positive");
  require(max_len > 0, ErrorKind::config, "max_len must be positive");
  require(eval_every_steps > 0, ErrorKind::config, "eval_every_steps must be positive");
  require(eval_batch_size > 0, ErrorKind::config, "eval_batch_size must be positive");
  const double lr = resolved_learning_rate();
  require(std::isfinite(lr) && lr >= 0.0, ErrorKind::config, "learning_rate must be non-negative");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, ErrorKind::config, "weight_decay must be non-negative");
  require(std::isfinite(temperature) && temperature > 0.0, ErrorKind::config, "temperature must be positive");
  require(backend == "toy" || backend == "remote", ErrorKind::config, "backend must be toy or remote");
  require(hidden_dim > 0 && layers > 0 && heads > 0 && ffn_dim > 0, ErrorKind::config, "toy encoder sizes must be positive");
  require(hidden_dim % heads == 0, ErrorKind::config, "hidden_dim must be divisible by heads");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::config, "dropout must lie in [0, 1)");
  require(dev_format == "canonical_tsv" || dev_format == "stsb_senteval", ErrorKind::config,
          "dev_format must be canonical_tsv or stsb_senteval");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"learning_rate", resolved_learning_rate()},
          {"epochs", epochs},
          {"max_steps", max_steps},
          {"warmup_steps", warmup_steps},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"max_len", max_len},
          {"template_variant", to_string(template_variant)},
          {"template_file", template_file},
          {"denoise_mode", to_string(denoise_mode)},
          {"stop_gradient_bias", stop_gradient_bias},
          {"loss_variant", to_string(loss_variant)},
          {"temperature", temperature},
          {"eval_every_steps", eval_every_steps},
          {"eval_batch_size", eval_batch_size},
          {"backend", backend},
          {"remote_url", remote_url},
          {"vocab_file", vocab_file},
          {"hidden_dim", hidden_dim},
          {"layers", layers},
          {"heads", heads},
          {"ffn_dim", ffn_dim},
          {"dropout", dropout},
          {"corpus", corpus},
          {"dev", dev},
          {"dev_format", dev_format},
          {"output_dir", output_dir}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::config, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    require(known_keys().count(key) == 1, ErrorKind::config, "unknown config key '" + key + "'");
  }
  TrainConfig c;
  auto set = [&](const char* key, auto& field) {
    if (j.contains(key)) field = get_as<std::decay_t<decltype(field)>>(j, key);
  };
  set("batch_size", c.batch_size);
  if (j.contains("learning_rate") && !j.at("learning_rate").is_null()) c.learning_rate = get_as<double>(j, "learning_rate");
  set("epochs", c.epochs);
  set("max_steps", c.max_steps);
  set("warmup_steps", c.warmup_steps);
  set("weight_decay", c.weight_decay);
  set("seed", c.seed);
  set("max_len", c.max_len);
  if (j.contains("template_variant")) c.template_variant = parse_template_variant(get_as<std::string>(j, "template_variant"));
  set("template_file", c.template_file);
  if (j.contains("denoise_mode")) c.denoise_mode = parse_denoise_mode(get_as<std::string>(j, "denoise_mode"));
  set("stop_gradient_bias", c.stop_gradient_bias);
  if (j.contains("loss_variant")) c.loss_variant = parse_loss_variant(get_as<std::string>(j, "loss_variant"));
  set("temperature", c.temperature);
  set("eval_every_steps", c.eval_every_steps);
  set("eval_batch_size", c.eval_batch_size);
  set("backend", c.backend);
  set("remote_url", c.remote_url);
  set("vocab_file", c.vocab_file);
  set("hidden_dim", c.hidden_dim);
  set("layers", c.layers);
  set("heads", c.heads);
  set("ffn_dim", c.ffn_dim);
  set("dropout", c.dropout);
  set("corpus", c.corpus);
  set("dev", c.dev);
  set("dev_format", c.dev_format);
  set("output_dir", c.output_dir);
  return c;
}

TrainConfig parse_config(const std::filesystem::path& file, const nlohmann::json& overrides) {
  nlohmann::json merged = nlohmann::json::object();
  if (!file.empty()) {
    std::ifstream in(file);
    require(in.good(), ErrorKind::io, "cannot open config file " + file.string());
    try {
      in >> merged;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::config, "config file " + file.string() + " is not valid JSON: " + e.what());
    }
    require(merged.is_object(), ErrorKind::config, "config file " + file.string() + " must hold a JSON object");
  }
  if (!overrides.is_null()) {
    require(overrides.is_object(), ErrorKind::internal, "config overrides must be an object");
    for (const auto& [key, value] : overrides.items()) merged[key] = value;
  }
  TrainConfig config = TrainConfig::from_json(merged);
  config.validate();
  return config;
}

std::string build_id() { return COTBERT_BUILD_ID; }

nlohmann::json RunManifest::to_json() const {
  return {{"subcommand", subcommand},
          {"config", config},
          {"seed", seed},
          {"build_id", build_id()},
          {"simd", std::string(simd::to_string(simd::active().isa))}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(out.good(), ErrorKind::io, "cannot write run manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace cotbert
