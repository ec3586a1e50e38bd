// cotbert: train / eval / ablate / plot-dist / dump-templates

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cotbert/checkpoint.hpp"
#include "cotbert/config.hpp"
#include "cotbert/error.hpp"
#include "cotbert/report.hpp"
#include "cotbert/sts.hpp"
#include "cotbert/templates.hpp"
#include "cotbert/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags that override keys of the config file.
struct TrainFlags {
  std::string config_file;
  std::map<std::string, std::string> strings;
  std::map<std::string, std::size_t> sizes;
  std::map<std::string, double> reals;
  std::map<std::string, std::uint64_t> u64s;
  bool stop_gradient_bias = false;

  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App& app) {
    app.add_option("--config", config_file, "JSON config file; flags override its keys")->check(CLI::ExistingFile);
    auto str = [&](const std::string& flag, const std::string& key, const std::string& help) {
      options.emplace_back(key, app.add_option(flag, strings[key], help));
    };
    auto size = [&](const std::string& flag, const std::string& key, const std::string& help) {
      options.emplace_back(key, app.add_option(flag, sizes[key], help));
    };
    auto real = [&](const std::string& flag, const std::string& key, const std::string& help) {
      options.emplace_back(key, app.add_option(flag, reals[key], help));
    };
    str("--corpus", "corpus", "training sentences, one per line");
    str("--dev", "dev", "dev STS file for checkpoint selection");
    str("--dev-format", "dev_format", "canonical_tsv | stsb_senteval");
    str("--out", "output_dir", "run directory");
    str("--backend", "backend", "toy | remote");
    str("--remote-url", "remote_url", "remote encoder server URL");
    str("--vocab", "vocab_file", "WordPiece vocab.txt (remote backend)");
    str("--template-variant", "template_variant", "full | prefix_only | suffix_only | irrelevant_prefix | static_prefix | reversed");
    str("--template-file", "template_file", "custom template set JSON");
    str("--denoise", "denoise_mode", "pad | position | none");
    str("--loss", "loss_variant", "standard | extended-no-pn | extended");
    size("--batch-size", "batch_size", "sentences per step");
    size("--epochs", "epochs", "passes over the corpus");
    size("--max-steps", "max_steps", "stop after this many steps (0: no cap)");
    size("--warmup-steps", "warmup_steps", "linear learning-rate warmup");
    size("--max-len", "max_len", "token budget per rendered template");
    size("--eval-every", "eval_every_steps", "dev evaluation interval");
    size("--eval-batch-size", "eval_batch_size", "chunk size for dev embedding");
    size("--hidden-dim", "hidden_dim", "toy encoder width");
    size("--layers", "layers", "toy encoder depth");
    size("--heads", "heads", "toy encoder attention heads");
    size("--ffn-dim", "ffn_dim", "toy encoder feed-forward width");
    real("--lr", "learning_rate", "learning rate");
    real("--weight-decay", "weight_decay", "decoupled weight decay");
    real("--temperature", "temperature", "InfoNCE temperature");
    real("--dropout", "dropout", "toy encoder dropout");
    options.emplace_back("seed", app.add_option("--seed", u64s["seed"], "random seed"));
    options.emplace_back("stop_gradient_bias",
                         app.add_flag("--stop-gradient-bias", stop_gradient_bias, "treat the template bias as constant"));
  }

  json overrides() const {
    json j = json::object();
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      if (auto it = strings.find(key); it != strings.end()) j[key] = it->second;
      else if (auto it2 = sizes.find(key); it2 != sizes.end()) j[key] = it2->second;
      else if (auto it3 = reals.find(key); it3 != reals.end()) j[key] = it3->second;
      else if (auto it4 = u64s.find(key); it4 != u64s.end()) j[key] = it4->second;
      else if (key == "stop_gradient_bias") j[key] = stop_gradient_bias;
    }
    return j;
  }
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  cotbert::require(out.good(), cotbert::ErrorKind::io, "cannot write " + path.string());
  out << text;
}

int run_train(const TrainFlags& flags) {
  const auto config = cotbert::parse_config(flags.config_file, flags.overrides());
  const auto result = cotbert::fit(config, &std::cerr);
  std::cout << "batch_size\t" << config.batch_size << "\n"
            << "steps\t" << result.steps << "\n"
            << "best_step\t" << result.best_step << "\n"
            << "best_dev_spearman\t" << cotbert::fixed2(result.best_dev_spearman) << "\n"
            << "checkpoint\t" << result.best_checkpoint.string() << "\n";
  return 0;
}

struct EvalFlags {
  std::string checkpoint, manifest, tasks, out, remote_url;
  bool alignment_uniformity = false;
};

int run_eval(const EvalFlags& f) {
  auto checkpoint = cotbert::load_checkpoint(f.checkpoint, f.remote_url);
  const auto tasks = cotbert::select_tasks(cotbert::load_manifest(f.manifest), split_commas(f.tasks));
  cotbert::EvalOptions options;
  options.alignment_uniformity = f.alignment_uniformity;
  const auto report = cotbert::evaluate(checkpoint, tasks, options);
  const json trained = checkpoint.meta.value("config", json::object());
  if (trained.contains("batch_size")) std::cout << "# trained with batch_size " << trained.at("batch_size") << "\n";
  std::cout << cotbert::eval_report_table(report);
  if (!f.out.empty()) {
    const fs::path out = f.out;
    json manifest_config = {{"checkpoint", f.checkpoint}, {"manifest", f.manifest}, {"tasks", f.tasks},
                            {"alignment_uniformity", f.alignment_uniformity}, {"checkpoint_meta", checkpoint.meta}};
    const std::uint64_t seed = checkpoint.meta.value("config", json::object()).value("seed", std::uint64_t{0});
    cotbert::RunManifest{"eval", manifest_config, seed}.write(out / "config.json");
    write_text(out / "report.tsv", cotbert::eval_report_lines(report));
    write_text(out / "report.json", cotbert::eval_report_json(report).dump(2) + "\n");
    cotbert::write_predictions(out / "predictions", report);
  }
  if (report.succeeded == 0) {
    std::cerr << json{{"error", {{"kind", "input"}, {"message", "every evaluation task failed"}}}}.dump() << '\n';
    return 1;
  }
  return 0;
}

struct AblateFlags {
  std::vector<std::string> axes;
  std::string manifest, tasks, out;
};

std::vector<std::string> axis_values(const std::string& axis) {
  using namespace cotbert;
  std::vector<std::string> out;
  if (axis == "template_variant") {
    for (auto v : kAllTemplateVariants) out.emplace_back(to_string(v));
  } else if (axis == "loss_variant") {
    for (auto v : {LossVariant::extended, LossVariant::extended_no_pn, LossVariant::standard}) out.emplace_back(to_string(v));
  } else if (axis == "denoise_mode") {
    for (auto v : {DenoiseMode::pad, DenoiseMode::position, DenoiseMode::none}) out.emplace_back(to_string(v));
  } else {
    fail(ErrorKind::config, "unknown ablation axis '" + axis + "' (expected template_variant|loss_variant|denoise_mode)");
  }
  return out;
}

int run_ablate(const TrainFlags& train_flags, const AblateFlags& f) {
  const json base_overrides = train_flags.overrides();
  const auto base = cotbert::parse_config(train_flags.config_file, base_overrides);
  cotbert::require(!base.output_dir.empty() || !f.out.empty(), cotbert::ErrorKind::config, "ablate needs --out");
  const fs::path out = f.out.empty() ? fs::path(base.output_dir) : fs::path(f.out);

  // axis -> values; "axis" alone enumerates every value.
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& spec : f.axes) {
    const auto eq = spec.find('=');
    const std::string name = spec.substr(0, eq);
    auto values = eq == std::string::npos ? axis_values(name) : split_commas(spec.substr(eq + 1));
    (void)axis_values(name);
    for (const auto& v : values) {
      json probe = {{name, v}};
      (void)cotbert::TrainConfig::from_json(probe);
    }
    cotbert::require(!values.empty(), cotbert::ErrorKind::config, "axis '" + name + "' has no values");
    for (const auto& [existing, _] : axes) {
      cotbert::require(existing != name, cotbert::ErrorKind::config, "axis '" + name + "' given twice");
    }
    axes.emplace_back(name, std::move(values));
  }

  std::vector<json> combos = {json::object()};
  for (const auto& [name, values] : axes) {
    std::vector<json> next;
    for (const auto& c : combos) {
      for (const auto& v : values) {
        json n = c;
        n[name] = v;
        next.push_back(std::move(n));
      }
    }
    combos = std::move(next);
  }

  std::vector<cotbert::TaskSpec> tasks;
  if (!f.manifest.empty()) tasks = cotbert::select_tasks(cotbert::load_manifest(f.manifest), split_commas(f.tasks));

  cotbert::RunManifest{"ablate",
                       {{"base", base.to_json()}, {"axes", f.axes}, {"manifest", f.manifest}, {"tasks", f.tasks}},
                       base.seed}
      .write(out / "config.json");

  std::vector<cotbert::AblationCell> cells;
  for (const auto& combo : combos) {
    cotbert::AblationCell cell;
    cell.settings = combo;
    for (const auto& [k, v] : combo.items()) {
      if (!cell.label.empty()) cell.label += ",";
      cell.label += k + "=" + v.get<std::string>();
    }
    if (cell.label.empty()) cell.label = "base";
    std::string dir_name = cell.label;
    for (char& c : dir_name) {
      if (c == '=' || c == ',') c = '_';
    }
    try {
      json overrides = base.to_json();
      for (const auto& [k, v] : combo.items()) overrides[k] = v;
      overrides["output_dir"] = (out / dir_name).string();
      const auto config = cotbert::TrainConfig::from_json(overrides);
      config.validate();
      std::cerr << "== " << cell.label << "\n";
      const auto fitted = cotbert::fit(config, &std::cerr);
      if (tasks.empty()) {
        cell.tasks.emplace_back("dev", fitted.best_dev_spearman);
        cell.average = fitted.best_dev_spearman;
      } else {
        auto checkpoint = cotbert::load_checkpoint(fitted.best_checkpoint);
        const auto report = cotbert::evaluate(checkpoint, tasks);
        for (const auto& t : report.tasks) {
          cell.tasks.emplace_back(t.name, t.failed ? std::nullopt : std::optional<double>(t.spearman));
        }
        if (report.succeeded > 0) cell.average = report.average;
        write_text(out / dir_name / "report.tsv", cotbert::eval_report_lines(report));
      }
    } catch (const cotbert::Error& e) {
      cell.error = std::string(cotbert::to_string(e.kind())) + ": " + e.what();
    }
    cells.push_back(std::move(cell));
  }
  const std::string table =
      "# batch_size " + std::to_string(base.batch_size) + " for every run\n" + cotbert::ablation_table(cells);
  std::cout << table;
  write_text(out / "ablation.txt", table);
  write_text(out / "ablation.tsv", cotbert::ablation_lines(cells));
  return 0;
}

struct PlotFlags {
  std::string checkpoint, data, format = "stsb_senteval", table, out, remote_url, title = "Predicted cosine by gold score";
  std::size_t bins = 40;
};

int run_plot(const PlotFlags& f) {
  std::vector<double> gold, predicted;
  if (!f.table.empty()) {
    cotbert::read_prediction_table(f.table, gold, predicted);
  } else {
    cotbert::require(!f.checkpoint.empty() && !f.data.empty(), cotbert::ErrorKind::config,
                     "plot-dist needs --checkpoint and --data, or --table");
    auto checkpoint = cotbert::load_checkpoint(f.checkpoint, f.remote_url);
    const auto examples = cotbert::load_sts(f.data, cotbert::parse_sts_format(f.format));
    const auto result = cotbert::evaluate_examples(*checkpoint.encoder, checkpoint.tokenizer, checkpoint.templates.anchor,
                                                   checkpoint.max_len(), "plot", examples);
    gold = result.gold;
    predicted = result.predicted;
  }
  const fs::path out = f.out;
  cotbert::write_prediction_table(out / "predictions.tsv", gold, predicted);
  write_text(out / "distribution.svg", cotbert::distribution_svg(gold, predicted, f.title, f.bins));
  cotbert::RunManifest{"plot-dist",
                       {{"checkpoint", f.checkpoint}, {"data", f.data}, {"format", f.format}, {"table", f.table}, {"bins", f.bins}},
                       0}
      .write(out / "config.json");
  std::cout << "pairs\t" << gold.size() << "\n" << "svg\t" << (out / "distribution.svg").string() << "\n";
  return 0;
}

int run_dump(const std::string& variant, const std::string& out) {
  const auto set = cotbert::builtin_template_set(cotbert::parse_template_variant(variant));
  const std::string text = cotbert::to_json(set).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return 0;
}

void print_error(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage prompt sentence embeddings: training and STS evaluation"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train an encoder and keep the best dev checkpoint");
  train_flags.add(*train);

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Spearman x100 per STS task for a checkpoint");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint directory")->required();
  eval->add_option("--manifest", eval_flags.manifest, "task manifest JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--tasks", eval_flags.tasks, "comma-separated subset of manifest tasks");
  eval->add_option("--out", eval_flags.out, "write report.tsv, report.json and predictions/ here");
  eval->add_option("--remote-url", eval_flags.remote_url, "remote encoder server URL");
  eval->add_flag("--alignment-uniformity", eval_flags.alignment_uniformity, "also report alignment and uniformity");

  TrainFlags ablate_train_flags;
  AblateFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "train and evaluate every combination of the given axes");
  ablate_train_flags.add(*ablate);
  ablate->add_option("--axis", ablate_flags.axes,
                     "template_variant|loss_variant|denoise_mode, optionally =v1,v2; repeatable");
  ablate->add_option("--manifest", ablate_flags.manifest, "task manifest; default reports dev Spearman only");
  ablate->add_option("--tasks", ablate_flags.tasks, "comma-separated subset of manifest tasks");
  ablate->add_option("--ablation-out", ablate_flags.out, "directory for child runs and the table (default: --out)");

  PlotFlags plot_flags;
  auto* plot = app.add_subcommand("plot-dist", "predicted-cosine histograms per gold-score bucket");
  plot->add_option("--checkpoint", plot_flags.checkpoint, "checkpoint directory");
  plot->add_option("--data", plot_flags.data, "STS file to score");
  plot->add_option("--format", plot_flags.format, "canonical_tsv | stsb_senteval");
  plot->add_option("--table", plot_flags.table, "existing gold/predicted table instead of a checkpoint");
  plot->add_option("--out", plot_flags.out, "output directory")->required();
  plot->add_option("--bins", plot_flags.bins, "histogram bins over [-1, 1]");
  plot->add_option("--title", plot_flags.title, "figure title");
  plot->add_option("--remote-url", plot_flags.remote_url, "remote encoder server URL");

  std::string dump_variant = "full", dump_out;
  auto* dump = app.add_subcommand("dump-templates", "print a builtin template set as loadable JSON");
  dump->add_option("--variant", dump_variant, "template variant");
  dump->add_option("--out", dump_out, "write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("config", e.what());
    return 1;
  }

  try {
    if (*train) return run_train(train_flags);
    if (*eval) return run_eval(eval_flags);
    if (*ablate) return run_ablate(ablate_train_flags, ablate_flags);
    if (*plot) return run_plot(plot_flags);
    if (*dump) return run_dump(dump_variant, dump_out);
  } catch (const cotbert::Error& e) {
    print_error(cotbert::to_string(e.kind()), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 2;
  }
  return 0;
}
