#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotbert/sts.hpp"

namespace cotbert {

/// Formats x with two decimals (Spearman x100 convention).
std::string fixed2(double x);

/// One "metric<TAB>dataset<TAB>value" line per number. Failed tasks get a
/// "status<TAB>name<TAB>failed" line instead of a Spearman value.
std::string eval_report_lines(const EvalReport& report);

/// Aligned table for terminals, with a header noting equal task weighting.
std::string eval_report_table(const EvalReport& report);

nlohmann::json eval_report_json(const EvalReport& report);

/// predictions/<task>.tsv with "gold<TAB>predicted" rows, one per pair.
void write_predictions(const std::filesystem::path& dir, const EvalReport& report);

void write_prediction_table(const std::filesystem::path& path, std::span<const double> gold,
                            std::span<const double> predicted);

/// Reads a "gold<TAB>predicted" table (optional header line starting with "gold").
void read_prediction_table(const std::filesystem::path& path, std::vector<double>& gold, std::vector<double>& predicted);

/// One histogram of predicted cosine per gold-score bucket [0,1), [1,2),
/// [2,3), [3,4), [4,5], stacked vertically. `bins` bins over [-1, 1].
std::string distribution_svg(std::span<const double> gold, std::span<const double> predicted, const std::string& title,
                             std::size_t bins = 40);

/// Counts per gold bucket (5 rows) and bin; the data behind distribution_svg.
std::vector<std::vector<std::size_t>> distribution_counts(std::span<const double> gold,
                                                          std::span<const double> predicted, std::size_t bins);

struct AblationCell {
  std::string label;          // e.g. "template_variant=prefix_only"
  nlohmann::json settings;    // axis -> value
  std::optional<double> average;
  std::vector<std::pair<std::string, std::optional<double>>> tasks;
  std::string error;          // non-empty when the child run failed
};

/// Variant rows x per-task Spearman plus average; failed cells read "failed".
std::string ablation_table(std::span<const AblationCell> cells);
std::string ablation_lines(std::span<const AblationCell> cells);

}  // namespace cotbert
