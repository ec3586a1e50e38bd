#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotbert/checkpoint.hpp"
#include "cotbert/encoder.hpp"
#include "cotbert/tensor.hpp"

namespace cotbert {

struct StsExample {
  std::string sentence_a;
  std::string sentence_b;
  double gold = 0.0;  // [0, 5]
};

/// canonical_tsv:  gold<TAB>sentence_a<TAB>sentence_b
/// stsb_senteval:  genre<TAB>file<TAB>year<TAB>id<TAB>gold<TAB>sentence_a<TAB>sentence_b[<TAB>...]
enum class StsFormat { canonical_tsv, stsb_senteval };

std::string_view to_string(StsFormat f);
StsFormat parse_sts_format(std::string_view name);

struct StsLoadOptions {
  bool strict = true;  // abort on the first malformed row; otherwise skip it
};

/// Malformed rows are reported as "path:line: reason" in `skipped` (lenient
/// mode) or thrown as ErrorKind::input (strict mode). Zero valid rows is
/// always an error.
std::vector<StsExample> load_sts(const std::filesystem::path& path, StsFormat format, StsLoadOptions options = {},
                                 std::vector<std::string>* skipped = nullptr);

/// Anchor-template final-mask embeddings in eval mode, no denoising.
Matrix embed_sentences(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                       std::span<const std::string> sentences, std::size_t max_len, std::size_t chunk = 64);
Matrix embed_sentences(Checkpoint& checkpoint, std::span<const std::string> sentences, std::size_t chunk = 64);

/// Cosine similarity per pair.
std::vector<double> predict_similarity(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                                       std::span<const StsExample> examples, std::size_t max_len, std::size_t chunk = 64);

struct TaskSpec {
  std::string name;
  std::filesystem::path path;
  StsFormat format = StsFormat::canonical_tsv;
};

/// {"tasks": [{"name": "STS-B", "path": "stsb/sts-test.csv", "format": "stsb_senteval"}, ...]}
/// Relative paths resolve against the manifest's directory.
std::vector<TaskSpec> load_manifest(const std::filesystem::path& path);

/// Keeps only the named tasks, in manifest order. Unknown names throw ErrorKind::config.
std::vector<TaskSpec> select_tasks(const std::vector<TaskSpec>& tasks, const std::vector<std::string>& names);

struct TaskResult {
  std::string name;
  std::size_t pairs = 0;
  double spearman = 0.0;  // x100
  bool failed = false;
  std::string error;
  std::vector<double> gold;
  std::vector<double> predicted;
  std::optional<double> alignment;
  std::optional<double> uniformity;
};

struct EvalReport {
  std::vector<TaskResult> tasks;
  double average = 0.0;        // unweighted mean over tasks that succeeded
  std::size_t succeeded = 0;
};

struct EvalOptions {
  std::size_t chunk = 64;
  bool alignment_uniformity = false;
};

/// Spearman x100 of predicted cosine vs gold, per task, plus the unweighted
/// average. A failing task is recorded and the rest continue.
EvalReport evaluate(Checkpoint& checkpoint, const std::vector<TaskSpec>& tasks, const EvalOptions& options = {});

TaskResult evaluate_examples(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                             std::size_t max_len, std::string name, std::span<const StsExample> examples,
                             const EvalOptions& options = {});

}  // namespace cotbert
