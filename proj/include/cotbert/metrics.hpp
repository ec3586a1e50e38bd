#pragma once

#include <span>
#include <vector>

#include "cotbert/tensor.hpp"

namespace cotbert {

inline constexpr double kAlignmentThreshold = 4.0;

/// Sentence-pair embeddings with gold similarity scores in [0, 5].
struct ScoredPairSet {
  Matrix embeddings_a;
  Matrix embeddings_b;
  std::vector<double> gold_scores;

  void validate() const;
};

/// Mean squared distance between L2-normalized pair embeddings, over pairs
/// whose gold score is strictly greater than `threshold`.
double alignment(const ScoredPairSet& pairs, double threshold = kAlignmentThreshold);

/// log mean exp(-2 |x - y|^2) over distinct unordered pairs of L2-normalized rows.
double uniformity(const Matrix& embeddings);

/// Average ranks (1-based); ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation. Throws ErrorKind::numeric when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> pred, std::span<const double> gold);

/// Cosine similarity of row i of `a` with row i of `b`.
std::vector<double> rowwise_cosine(const Matrix& a, const Matrix& b);

}  // namespace cotbert
