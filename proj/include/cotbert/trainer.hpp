#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotbert/config.hpp"
#include "cotbert/denoiser.hpp"
#include "cotbert/encode.hpp"
#include "cotbert/encoder.hpp"
#include "cotbert/loss.hpp"
#include "cotbert/optimizer.hpp"
#include "cotbert/sts.hpp"
#include "cotbert/templates.hpp"
#include "cotbert/tokenizer.hpp"

namespace cotbert {

/// Encoded anchor / positive / negative views of one batch of sentences.
/// `negative` is empty when the loss does not use it.
struct StepBatches {
  EncodedBatch anchor;
  EncodedBatch positive;
  EncodedBatch negative;
  bool has_negative = false;
};

StepBatches build_step_batch(std::span<const std::string> sentences, const TemplateSet& templates,
                             const Tokenizer& tokenizer, std::size_t max_len, bool with_negative);

struct StepSettings {
  DenoiseConfig denoise;
  LossConfig loss;
};

struct StepResult {
  double loss = 0.0;
  CosineRange cosines;
};

/// Forward all views, denoise, evaluate the loss, and backpropagate into the
/// encoder's gradients (zeroed first). No parameter update. Throws
/// ErrorKind::numeric naming `batch_index` if the loss is not finite.
StepResult loss_and_gradient(Encoder& encoder, const StepBatches& batches, const TemplateSet& templates,
                             const Tokenizer& tokenizer, const StepSettings& settings, std::size_t batch_index = 0);

/// loss_and_gradient followed by one optimizer step.
StepResult train_step(Encoder& encoder, AdamW& optimizer, const StepBatches& batches, const TemplateSet& templates,
                      const Tokenizer& tokenizer, const StepSettings& settings, std::size_t batch_index = 0);

/// Largest relative error between backpropagated parameter gradients and
/// fourth-order central differences of the loss, over `probes` entries per parameter
/// tensor chosen with `seed`. The encoder must be deterministic (dropout 0).
/// Relative error here is |a - n| / max(|a|, |n|, 1e-6).
double parameter_gradient_check(Encoder& encoder, const StepBatches& batches, const TemplateSet& templates,
                                const Tokenizer& tokenizer, const StepSettings& settings, double epsilon,
                                std::size_t probes, std::uint64_t seed);

/// One sentence per line; blank lines skipped.
std::vector<std::string> load_corpus(const std::filesystem::path& path);

/// Throws ErrorKind::input if any dev sentence also occurs in the corpus.
void check_disjoint(std::span<const std::string> corpus, std::span<const StsExample> dev);

/// Toy word-level vocabulary over corpus, template literals and dev sentences.
Tokenizer build_toy_tokenizer(std::span<const std::string> corpus, const TemplateSet& templates,
                              std::span<const StsExample> dev);

TemplateSet resolve_templates(const TrainConfig& config);

struct FitRecord {
  std::size_t step = 0;
  std::optional<double> loss;          // absent at step 0
  std::optional<double> dev_spearman;  // x100, only at evaluation points
};

struct FitResult {
  std::vector<FitRecord> records;  // step 0, then one per optimizer step
  std::vector<double> losses;      // training loss per step
  std::size_t steps = 0;
  std::size_t best_step = 0;
  double best_dev_spearman = 0.0;  // x100
  std::filesystem::path best_checkpoint;

  // State after the final step.
  std::unique_ptr<Encoder> encoder;
  std::optional<Tokenizer> tokenizer;
  TemplateSet templates;
};

/// Trains from in-memory data. Writes config.json, metrics.log and best/
/// (the checkpoint with the highest dev Spearman, evaluated at step 0, every
/// eval_every_steps, and after the last step) under `run_dir`. Progress lines
/// go to `log` when non-null.
FitResult fit(const TrainConfig& config, std::span<const std::string> corpus, std::span<const StsExample> dev,
              const std::filesystem::path& run_dir, std::ostream* log = nullptr);

/// Reads corpus and dev from the paths in `config`, writes to config.output_dir.
FitResult fit(const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace cotbert
