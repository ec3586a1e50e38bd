#include "cotbert/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "cotbert/checkpoint.hpp"
#include "cotbert/error.hpp"
#include "cotbert/remote_encoder.hpp"
#include "cotbert/simd/kernels.hpp"
#include "cotbert/toy_encoder.hpp"

namespace cotbert {
namespace {

struct View {
  Activations filled;
  Activations bias;
  const EncodedBatch* batch = nullptr;
  EncodedBatch bias_input;
  Matrix embedding;  // denoised
};

View run_view(Encoder& encoder, const EncodedBatch& batch, const TemplateSpec& tmpl, const Tokenizer& tokenizer,
              const DenoiseConfig& denoise_config) {
  View v;
  v.batch = &batch;
  v.filled = encoder.forward(batch);
  Matrix h = extract_final_mask(v.filled.hidden, batch);
  if (denoise_config.mode == DenoiseMode::none) {
    v.embedding = std::move(h);
    return v;
  }
  v.bias_input = bias_batch(tmpl, batch, tokenizer, denoise_config);
  v.bias = encoder.forward(v.bias_input);
  v.embedding = denoise(h, extract_final_mask(v.bias.hidden, v.bias_input), denoise_config);
  return v;
}

void backprop_view(Encoder& encoder, const View& v, const Matrix& grad, const DenoiseConfig& denoise_config) {
  const std::size_t dim = encoder.hidden_dim();
  encoder.backward(v.filled, scatter_final_mask(grad, *v.batch, dim));
  if (denoise_config.mode == DenoiseMode::none || denoise_config.stop_gradient_bias) return;
  Matrix neg = grad;
  simd::scale(-1.0, neg.values());
  encoder.backward(v.bias, scatter_final_mask(neg, v.bias_input, dim));
}

std::string describe_cosines(const TripletEmbeddings& t) {
  try {
    const CosineRange c = cosine_extrema(t);
    std::ostringstream os;
    os << "cosine range [" << c.min << ", " << c.max << "]";
    return os.str();
  } catch (const Error& e) {
    return std::string("cosine range unavailable (") + e.what() + ")";
  }
}

StepResult forward_loss(Encoder& encoder, const StepBatches& batches, const TemplateSet& templates,
                        const Tokenizer& tokenizer, const StepSettings& settings, std::size_t batch_index,
                        bool backprop) {
  const bool needs_negative = settings.loss.variant != LossVariant::standard;
  require(!needs_negative || batches.has_negative, ErrorKind::internal,
          "loss variant " + std::string(to_string(settings.loss.variant)) + " needs negative-template batches");
  require(settings.denoise.mode != DenoiseMode::position || encoder.supports_position_ids(), ErrorKind::config,
          "encoder backend '" + std::string(encoder.backend()) + "' cannot override position ids for position denoising");
  if (backprop) encoder.zero_grad();

  const View anchor = run_view(encoder, batches.anchor, templates.anchor, tokenizer, settings.denoise);
  const View positive = run_view(encoder, batches.positive, templates.positive, tokenizer, settings.denoise);
  std::optional<View> negative;
  if (needs_negative) negative = run_view(encoder, batches.negative, templates.negative, tokenizer, settings.denoise);

  TripletEmbeddings triplet{anchor.embedding, positive.embedding, negative ? negative->embedding : Matrix{}};
  LossGradient grad;
  LossResult result;
  try {
    result = contrastive_loss(triplet, settings.loss, backprop ? &grad : nullptr);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    fail(ErrorKind::numeric, "loss failed at batch " + std::to_string(batch_index) + ": " + e.what() + "; " +
                                 describe_cosines(triplet));
  }
  require(std::isfinite(result.loss), ErrorKind::numeric,
          "non-finite loss at batch " + std::to_string(batch_index) + "; " + describe_cosines(triplet));

  StepResult out;
  out.loss = result.loss;
  out.cosines = cosine_extrema(triplet);
  if (backprop) {
    backprop_view(encoder, anchor, grad.anchor, settings.denoise);
    backprop_view(encoder, positive, grad.positive, settings.denoise);
    if (negative) backprop_view(encoder, *negative, grad.negative, settings.denoise);
  }
  return out;
}

std::string format_metric(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(10) << *v;
  return os.str();
}

}  // namespace

StepBatches build_step_batch(std::span<const std::string> sentences, const TemplateSet& templates,
                             const Tokenizer& tokenizer, std::size_t max_len, bool with_negative) {
  StepBatches b;
  b.anchor = encode_batch(templates.anchor, sentences, tokenizer, max_len);
  b.positive = encode_batch(templates.positive, sentences, tokenizer, max_len);
  if (with_negative) {
    b.negative = encode_batch(templates.negative, sentences, tokenizer, max_len);
    b.has_negative = true;
  }
  return b;
}

StepResult loss_and_gradient(Encoder& encoder, const StepBatches& batches, const TemplateSet& templates,
                             const Tokenizer& tokenizer, const StepSettings& settings, std::size_t batch_index) {
  return forward_loss(encoder, batches, templates, tokenizer, settings, batch_index, true);
}

StepResult train_step(Encoder& encoder, AdamW& optimizer, const StepBatches& batches, const TemplateSet& templates,
                      const Tokenizer& tokenizer, const StepSettings& settings, std::size_t batch_index) {
  require(encoder.trainable(), ErrorKind::config, "encoder backend '" + std::string(encoder.backend()) + "' is not trainable");
  encoder.set_mode(Mode::train);
  StepResult r = loss_and_gradient(encoder, batches, templates, tokenizer, settings, batch_index);
  optimizer.step(encoder);
  return r;
}

double parameter_gradient_check(Encoder& encoder, const StepBatches& batches, const TemplateSet& templates,
                                const Tokenizer& tokenizer, const StepSettings& settings, double epsilon,
                                std::size_t probes, std::uint64_t seed) {
  require(epsilon > 0.0, ErrorKind::input, "gradient check step must be positive");
  encoder.set_mode(Mode::train);
  forward_loss(encoder, batches, templates, tokenizer, settings, 0, true);
  auto params = encoder.parameters();
  require(!params.empty(), ErrorKind::config, "encoder exposes no local parameters to check");
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad.begin(), p.grad.end());

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, params[k].value.size() - 1);
    for (std::size_t t = 0; t < probes; ++t) {
      const std::size_t idx = pick(rng);
      double& w = params[k].value[idx];
      const double saved = w;
      auto at = [&](double offset) {
        w = saved + offset;
        return forward_loss(encoder, batches, templates, tokenizer, settings, 0, false).loss;
      };
      const double numeric = (8.0 * (at(epsilon) - at(-epsilon)) - (at(2 * epsilon) - at(-2 * epsilon))) / (12.0 * epsilon);
      w = saved;
      const double a = analytic[k][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open corpus " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

void check_disjoint(std::span<const std::string> corpus, std::span<const StsExample> dev) {
  const std::unordered_set<std::string_view> seen(corpus.begin(), corpus.end());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    for (const std::string* s : {&dev[i].sentence_a, &dev[i].sentence_b}) {
      require(seen.count(*s) == 0, ErrorKind::input,
              "dev pair " + std::to_string(i + 1) + " sentence also appears in the training corpus: \"" + *s + "\"");
    }
  }
}

Tokenizer build_toy_tokenizer(std::span<const std::string> corpus, const TemplateSet& templates,
                              std::span<const StsExample> dev) {
  std::vector<std::string> texts(corpus.begin(), corpus.end());
  for (const TemplateSpec* t : {&templates.anchor, &templates.positive, &templates.negative}) {
    for (const auto& seg : t->segments()) {
      if (const auto* lit = std::get_if<Literal>(&seg)) texts.push_back(lit->text);
    }
  }
  for (const auto& ex : dev) {
    texts.push_back(ex.sentence_a);
    texts.push_back(ex.sentence_b);
  }
  return Tokenizer::build_word_level(texts);
}

TemplateSet resolve_templates(const TrainConfig& config) {
  if (!config.template_file.empty()) return load_template_set(config.template_file);
  return builtin_template_set(config.template_variant);
}

FitResult fit(const TrainConfig& config, std::span<const std::string> corpus, std::span<const StsExample> dev,
              const std::filesystem::path& run_dir, std::ostream* log) {
  config.validate();
  require(!corpus.empty(), ErrorKind::input, "training corpus is empty");
  require(!dev.empty(), ErrorKind::input, "dev set is empty");
  require(!run_dir.empty(), ErrorKind::config, "no output directory given");
  check_disjoint(corpus, dev);

  FitResult result;
  result.templates = resolve_templates(config);
  const TemplateSet& templates = result.templates;

  if (config.backend == "toy") {
    result.tokenizer = build_toy_tokenizer(corpus, templates, dev);
    ToyEncoderConfig ec;
    ec.vocab_size = result.tokenizer->vocab_size();
    ec.hidden_dim = config.hidden_dim;
    ec.layers = config.layers;
    ec.heads = config.heads;
    ec.ffn_dim = config.ffn_dim;
    ec.max_positions = std::max<std::size_t>(128, config.max_len);
    ec.dropout = config.dropout;
    ec.seed = config.seed;
    result.encoder = make_toy_encoder(ec);
  } else {
    require(!config.vocab_file.empty(), ErrorKind::config, "the remote backend needs vocab_file (a WordPiece vocab.txt)");
    result.tokenizer = Tokenizer::load_vocab_file(config.vocab_file, Tokenizer::Model::wordpiece);
    std::string url = config.remote_url;
    if (url.empty()) {
      if (const char* env = std::getenv("COTBERT_REMOTE_URL")) url = env;
    }
    require(!url.empty(), ErrorKind::config, "the remote backend needs remote_url or COTBERT_REMOTE_URL");
    result.encoder = std::make_unique<RemoteEncoder>(url);
  }
  Encoder& encoder = *result.encoder;
  const Tokenizer& tokenizer = *result.tokenizer;
  require(encoder.trainable(), ErrorKind::config, "encoder backend '" + std::string(encoder.backend()) + "' is not trainable");
  require(config.denoise_mode != DenoiseMode::position || encoder.supports_position_ids(), ErrorKind::config,
          "encoder backend '" + std::string(encoder.backend()) + "' cannot override position ids for position denoising");

  std::filesystem::create_directories(run_dir);
  const nlohmann::json config_json = config.to_json();
  RunManifest{"train", config_json, config.seed}.write(run_dir / "config.json");
  std::ofstream metrics(run_dir / "metrics.log");
  require(metrics.good(), ErrorKind::io, "cannot write " + (run_dir / "metrics.log").string());
  metrics << "step\tloss\tdev_spearman\n";

  StepSettings settings;
  settings.denoise = DenoiseConfig{config.denoise_mode, config.stop_gradient_bias};
  settings.loss = LossConfig{config.temperature, config.loss_variant};
  settings.loss.validate();
  AdamWConfig oc;
  oc.learning_rate = config.resolved_learning_rate();
  oc.weight_decay = config.weight_decay;
  oc.warmup_steps = config.warmup_steps;
  AdamW optimizer(oc);

  result.best_checkpoint = run_dir / "best";
  std::optional<double> best;
  auto evaluate_dev = [&](std::size_t step) {
    EvalOptions eo;
    eo.chunk = config.eval_batch_size;
    const double rho =
        evaluate_examples(encoder, tokenizer, templates.anchor, config.max_len, "dev", dev, eo).spearman;
    if (!best || rho > *best) {
      best = rho;
      result.best_step = step;
      result.best_dev_spearman = rho;
      CheckpointMeta meta{step, rho, config.max_len, config_json};
      save_checkpoint(result.best_checkpoint, encoder, tokenizer, templates, meta);
    }
    return rho;
  };
  auto record = [&](FitRecord r) {
    metrics << r.step << '\t' << format_metric(r.loss) << '\t' << format_metric(r.dev_spearman) << '\n';
    metrics.flush();
    if (log) {
      *log << "step " << r.step;
      if (r.loss) *log << "  loss " << std::fixed << std::setprecision(4) << *r.loss;
      if (r.dev_spearman) *log << "  dev_spearman " << std::fixed << std::setprecision(2) << *r.dev_spearman;
      *log << std::defaultfloat << '\n';
    }
    result.records.push_back(r);
  };

  record(FitRecord{0, std::nullopt, evaluate_dev(0)});

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  const bool with_negative = config.loss_variant != LossVariant::standard;
  const std::size_t per_epoch = (corpus.size() + config.batch_size - 1) / config.batch_size;
  std::size_t total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size() && step < total; start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::string> sentences;
      sentences.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) sentences.push_back(corpus[order[i]]);
      const StepBatches batches = build_step_batch(sentences, templates, tokenizer, config.max_len, with_negative);
      const StepResult r = train_step(encoder, optimizer, batches, templates, tokenizer, settings, step);
      ++step;
      result.losses.push_back(r.loss);
      FitRecord rec{step, r.loss, std::nullopt};
      if (step % config.eval_every_steps == 0 || step == total) rec.dev_spearman = evaluate_dev(step);
      record(rec);
    }
  }
  result.steps = step;
  encoder.set_mode(Mode::eval);
  return result;
}

FitResult fit(const TrainConfig& config, std::ostream* log) {
  require(!config.corpus.empty(), ErrorKind::config, "no training corpus given");
  require(!config.dev.empty(), ErrorKind::config, "no dev set given");
  require(!config.output_dir.empty(), ErrorKind::config, "no output directory given");
  const auto corpus = load_corpus(config.corpus);
  require(!corpus.empty(), ErrorKind::input, "training corpus " + config.corpus + " is empty");
  const auto dev = load_sts(config.dev, parse_sts_format(config.dev_format));
  return fit(config, corpus, dev, config.output_dir, log);
}

}  // namespace cotbert
