#include "cotbert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cotbert/error.hpp"
#include "cotbert/loss.hpp"
#include "cotbert/simd/kernels.hpp"

namespace cotbert {

void ScoredPairSet::validate() const {
  require(embeddings_a.rows() == embeddings_b.rows() && embeddings_a.cols() == embeddings_b.cols() &&
              gold_scores.size() == embeddings_a.rows(),
          ErrorKind::shape, "scored pair set has mismatched sizes");
  for (double g : gold_scores) {
    require(g >= 0.0 && g <= 5.0, ErrorKind::input, "gold score " + std::to_string(g) + " outside [0, 5]");
  }
}

double alignment(const ScoredPairSet& pairs, double threshold) {
  pairs.validate();
  const Matrix a = normalize_rows(pairs.embeddings_a);
  const Matrix b = normalize_rows(pairs.embeddings_b);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pairs.gold_scores.size(); ++i) {
    if (pairs.gold_scores[i] > threshold) {
      total += simd::squared_distance(a.row(i), b.row(i));
      ++count;
    }
  }
  require(count > 0, ErrorKind::input, "no sentence pair scores above the alignment threshold " + std::to_string(threshold));
  return total / static_cast<double>(count);
}

double uniformity(const Matrix& embeddings) {
  const std::size_t m = embeddings.rows();
  require(m >= 2, ErrorKind::input, "uniformity needs at least two embeddings");
  const Matrix x = normalize_rows(embeddings);
  // Kernel values lie in [e^-8, 1]; a plain mean is stable.
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) total += std::exp(-2.0 * simd::squared_distance(x.row(i), x.row(j)));
  }
  const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  return std::log(total / pairs);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::shape, "correlation of vectors with different lengths");
  require(x.size() >= 2, ErrorKind::input, "correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::numeric, "correlation is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> pred, std::span<const double> gold) {
  require(pred.size() == gold.size(), ErrorKind::shape, "spearman of vectors with different lengths");
  require(pred.size() >= 2, ErrorKind::input, "spearman needs at least two points");
  const auto rp = average_ranks(pred);
  const auto rg = average_ranks(gold);
  return pearson(rp, rg);
}

std::vector<double> rowwise_cosine(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::shape, "rowwise cosine of mismatched matrices");
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = cosine(a.row(i), b.row(i));
  return out;
}

}  // namespace cotbert
