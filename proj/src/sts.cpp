#include "cotbert/sts.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "cotbert/error.hpp"
#include "cotbert/metrics.hpp"

namespace cotbert {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_score(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Empty string on success, otherwise the reason the row is malformed.
std::string parse_row(std::string_view line, StsFormat format, StsExample& out) {
  const auto cols = split_tabs(line);
  std::size_t gold_col = 0, a_col = 1, b_col = 2;
  if (format == StsFormat::stsb_senteval) {
    if (cols.size() < 7) return "expected at least 7 tab-separated columns, found " + std::to_string(cols.size());
    gold_col = 4;
    a_col = 5;
    b_col = 6;
  } else if (cols.size() != 3) {
    return "expected 3 tab-separated columns, found " + std::to_string(cols.size());
  }
  const auto gold = parse_score(cols[gold_col]);
  if (!gold) return "gold score '" + std::string(cols[gold_col]) + "' is not a number";
  if (*gold < 0.0 || *gold > 5.0) return "gold score " + std::string(trim(cols[gold_col])) + " outside [0, 5]";
  const auto a = trim(cols[a_col]);
  const auto b = trim(cols[b_col]);
  if (a.empty() || b.empty()) return "empty sentence";
  out = StsExample{std::string(a), std::string(b), *gold};
  return {};
}

}  // namespace

std::string_view to_string(StsFormat f) {
  return f == StsFormat::canonical_tsv ? "canonical_tsv" : "stsb_senteval";
}

StsFormat parse_sts_format(std::string_view name) {
  if (name == "canonical_tsv") return StsFormat::canonical_tsv;
  if (name == "stsb_senteval") return StsFormat::stsb_senteval;
  fail(ErrorKind::config, "unknown STS format '" + std::string(name) + "' (expected canonical_tsv|stsb_senteval)");
}

std::vector<StsExample> load_sts(const std::filesystem::path& path, StsFormat format, StsLoadOptions options,
                                 std::vector<std::string>* skipped) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open STS file " + path.string());
  std::vector<StsExample> examples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    StsExample ex;
    const std::string problem = parse_row(line, format, ex);
    if (problem.empty()) {
      examples.push_back(std::move(ex));
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": " + problem;
    require(!options.strict, ErrorKind::input, where);
    if (skipped) skipped->push_back(where);
  }
  require(!examples.empty(), ErrorKind::input, "STS file " + path.string() + " has no valid rows");
  return examples;
}

Matrix embed_sentences(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                       std::span<const std::string> sentences, std::size_t max_len, std::size_t chunk) {
  const Mode previous = encoder.mode();
  encoder.set_mode(Mode::eval);
  const EncodedBatch batch = encode_batch(anchor, sentences, tokenizer, max_len);
  Matrix out = embed_final_mask(encoder, batch, chunk);
  encoder.set_mode(previous);
  return out;
}

Matrix embed_sentences(Checkpoint& checkpoint, std::span<const std::string> sentences, std::size_t chunk) {
  return embed_sentences(*checkpoint.encoder, checkpoint.tokenizer, checkpoint.templates.anchor, sentences,
                         checkpoint.max_len(), chunk);
}

std::vector<double> predict_similarity(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                                       std::span<const StsExample> examples, std::size_t max_len, std::size_t chunk) {
  std::vector<std::string> a, b;
  a.reserve(examples.size());
  b.reserve(examples.size());
  for (const auto& ex : examples) {
    a.push_back(ex.sentence_a);
    b.push_back(ex.sentence_b);
  }
  const Matrix ea = embed_sentences(encoder, tokenizer, anchor, a, max_len, chunk);
  const Matrix eb = embed_sentences(encoder, tokenizer, anchor, b, max_len, chunk);
  return rowwise_cosine(ea, eb);
}

std::vector<TaskSpec> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open task manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "task manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  require(j.is_object() && j.contains("tasks") && j.at("tasks").is_array(), ErrorKind::config,
          "task manifest needs a 'tasks' array");
  std::vector<TaskSpec> tasks;
  std::set<std::string> names;
  for (const auto& t : j.at("tasks")) {
    require(t.is_object() && t.contains("name") && t.contains("path"), ErrorKind::config,
            "each manifest task needs 'name' and 'path'");
    for (const auto& [key, _] : t.items()) {
      require(key == "name" || key == "path" || key == "format", ErrorKind::config, "unknown manifest task key '" + key + "'");
    }
    TaskSpec spec;
    spec.name = t.at("name").get<std::string>();
    spec.path = t.at("path").get<std::string>();
    if (spec.path.is_relative()) spec.path = path.parent_path() / spec.path;
    spec.format = parse_sts_format(t.value("format", "canonical_tsv"));
    require(names.insert(spec.name).second, ErrorKind::config, "duplicate task name '" + spec.name + "' in manifest");
    tasks.push_back(std::move(spec));
  }
  require(!tasks.empty(), ErrorKind::config, "task manifest lists no tasks");
  return tasks;
}

std::vector<TaskSpec> select_tasks(const std::vector<TaskSpec>& tasks, const std::vector<std::string>& names) {
  if (names.empty()) return tasks;
  for (const auto& n : names) {
    require(std::any_of(tasks.begin(), tasks.end(), [&](const TaskSpec& t) { return t.name == n; }), ErrorKind::config,
            "task '" + n + "' is not in the manifest");
  }
  std::vector<TaskSpec> out;
  for (const auto& t : tasks) {
    if (std::find(names.begin(), names.end(), t.name) != names.end()) out.push_back(t);
  }
  return out;
}

TaskResult evaluate_examples(Encoder& encoder, const Tokenizer& tokenizer, const TemplateSpec& anchor,
                             std::size_t max_len, std::string name, std::span<const StsExample> examples,
                             const EvalOptions& options) {
  TaskResult r;
  r.name = std::move(name);
  r.pairs = examples.size();
  std::vector<std::string> a, b;
  for (const auto& ex : examples) {
    a.push_back(ex.sentence_a);
    b.push_back(ex.sentence_b);
    r.gold.push_back(ex.gold);
  }
  const Matrix ea = embed_sentences(encoder, tokenizer, anchor, a, max_len, options.chunk);
  const Matrix eb = embed_sentences(encoder, tokenizer, anchor, b, max_len, options.chunk);
  r.predicted = rowwise_cosine(ea, eb);
  r.spearman = 100.0 * spearman(r.predicted, r.gold);
  if (options.alignment_uniformity) {
    ScoredPairSet pairs{ea, eb, r.gold};
    if (std::any_of(r.gold.begin(), r.gold.end(), [](double g) { return g > kAlignmentThreshold; })) {
      r.alignment = alignment(pairs);
    }
    Matrix all(ea.rows() + eb.rows(), ea.cols());
    for (std::size_t i = 0; i < ea.rows(); ++i) {
      std::copy(ea.row(i).begin(), ea.row(i).end(), all.row(i).begin());
      std::copy(eb.row(i).begin(), eb.row(i).end(), all.row(ea.rows() + i).begin());
    }
    r.uniformity = uniformity(all);
  }
  return r;
}

EvalReport evaluate(Checkpoint& checkpoint, const std::vector<TaskSpec>& tasks, const EvalOptions& options) {
  require(!tasks.empty(), ErrorKind::config, "no evaluation tasks given");
  EvalReport report;
  double total = 0.0;
  for (const auto& task : tasks) {
    try {
      const auto examples = load_sts(task.path, task.format);
      report.tasks.push_back(evaluate_examples(*checkpoint.encoder, checkpoint.tokenizer, checkpoint.templates.anchor,
                                               checkpoint.max_len(), task.name, examples, options));
      total += report.tasks.back().spearman;
      ++report.succeeded;
    } catch (const Error& e) {
      TaskResult failed;
      failed.name = task.name;
      failed.failed = true;
      failed.error = std::string(to_string(e.kind())) + ": " + e.what();
      report.tasks.push_back(std::move(failed));
    }
  }
  report.average = report.succeeded > 0 ? total / static_cast<double>(report.succeeded) : 0.0;
  return report;
}

}  // namespace cotbert
