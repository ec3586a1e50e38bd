#pragma once

// Straightforward reference implementations, written without the library's
// helpers, used as oracles by the unit and acceptance tests.

#include <cmath>
#include <cstddef>
#include <vector>

#include "cotbert/loss.hpp"
#include "cotbert/tensor.hpp"

namespace oracle {

inline double cos_sim(const cotbert::Matrix& a, std::size_t i, const cotbert::Matrix& b, std::size_t j) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    dot += a(i, k) * b(j, k);
    na += a(i, k) * a(i, k);
    nb += b(j, k) * b(j, k);
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Mean over rows of -log(num / den), exponentials taken directly. The
// denominator is split as num + others so that -log(num / den) can be taken
// as log1p(others / num) without cancellation on tiny losses.
inline double contrastive(const cotbert::Matrix& h, const cotbert::Matrix& hp, const cotbert::Matrix& hn, double tau,
                          cotbert::LossVariant variant, std::vector<double>* rows = nullptr) {
  const std::size_t n = h.rows();
  double total = 0;
  if (rows) rows->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double num = std::exp(cos_sim(h, i, hp, i) / tau);
    double others = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others += std::exp(cos_sim(h, i, hp, j) / tau);
      if (variant != cotbert::LossVariant::standard) others += std::exp(cos_sim(h, i, hn, j) / tau);
      if (variant == cotbert::LossVariant::extended) others += std::exp(cos_sim(hp, i, hn, j) / tau);
    }
    const double l = std::log1p(others / num);
    if (rows) (*rows)[i] = l;
    total += l;
  }
  return total / static_cast<double>(n);
}

// rank = 1 + #smaller + (#equal - 1) / 2, counted by brute force.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) smaller += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = 1 + smaller + (equal - 1) / 2;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  return cxy / std::sqrt(cxx * cyy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

}  // namespace oracle
