#include <doctest.h>

#include <fstream>

#include "cotbert/config.hpp"
#include "cotbert/error.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::internal;
}

}  // namespace

TEST_CASE("defaults are materialized") {
  const auto j = TrainConfig{}.to_json();
  CHECK(j.at("temperature").get<double>() == 0.05);
  CHECK(j.at("batch_size").get<std::size_t>() == 64);
  CHECK(j.at("max_len").get<std::size_t>() == 64);
  CHECK(j.at("denoise_mode").get<std::string>() == "pad");
  CHECK(j.at("loss_variant").get<std::string>() == "extended");
  CHECK(j.at("template_variant").get<std::string>() == "full");
  CHECK(j.at("learning_rate").get<double>() == kToyLearningRate);
  CHECK(j.at("stop_gradient_bias").get<bool>() == false);

  TrainConfig remote;
  remote.backend = "remote";
  CHECK(remote.resolved_learning_rate() == kPretrainedLearningRate);
  remote.learning_rate = 3e-5;
  CHECK(remote.resolved_learning_rate() == 3e-5);
}

TEST_CASE("json round trip") {
  TrainConfig c;
  c.batch_size = 7;
  c.template_variant = TemplateVariant::prefix_only;
  c.denoise_mode = DenoiseMode::position;
  c.loss_variant = LossVariant::extended_no_pn;
  c.stop_gradient_bias = true;
  c.corpus = "wiki.txt";
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("flags override the file") {
  const auto dir = testing::temp_dir("config");
  testing::write_file(dir / "c.json", R"({"temperature": 0.1, "batch_size": 16})");
  const auto file_only = parse_config(dir / "c.json", nlohmann::json::object());
  CHECK(file_only.temperature == 0.1);
  const auto merged = parse_config(dir / "c.json", {{"temperature", 0.05}});
  CHECK(merged.temperature == 0.05);
  CHECK(merged.batch_size == 16);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bad values are config errors") {
  CHECK(kind_of([] { parse_config({}, {{"batch_size", -3}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"batch_size", 0}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"batch_size", 2.5}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"temperature", 0.0}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"temperature", "hot"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"tempreature", 0.05}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"denoise_mode", "blur"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"loss_variant", "triplet"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"template_variant", "nope"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"backend", "gpu"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"heads", 3}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"dropout", 1.0}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"learning_rate", -1e-3}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config({}, {{"dev_format", "csv"}}); }) == ErrorKind::config);
  CHECK(kind_of([] { parse_config("/nonexistent/cfg.json", nlohmann::json::object()); }) == ErrorKind::io);

  const auto dir = testing::temp_dir("config_bad");
  testing::write_file(dir / "broken.json", "{\"batch_size\": ");
  CHECK(kind_of([&] { parse_config(dir / "broken.json", nlohmann::json::object()); }) == ErrorKind::config);
  testing::write_file(dir / "array.json", "[1, 2]");
  CHECK(kind_of([&] { parse_config(dir / "array.json", nlohmann::json::object()); }) == ErrorKind::config);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run manifest") {
  const auto dir = testing::temp_dir("manifest");
  TrainConfig c;
  c.seed = 9;
  RunManifest{"train", c.to_json(), c.seed}.write(dir / "sub" / "config.json");
  std::ifstream in(dir / "sub" / "config.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("subcommand") == "train");
  CHECK(j.at("seed") == 9);
  CHECK(j.at("config") == c.to_json());
  CHECK(j.contains("build_id"));
  const auto simd = j.at("simd").get<std::string>();
  CHECK((simd == "scalar" || simd == "avx2"));
  // A manifest's config block parses back into the same run.
  CHECK(TrainConfig::from_json(j.at("config")).to_json() == c.to_json());
  std::filesystem::remove_all(dir);
}
