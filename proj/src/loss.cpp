#include "cotbert/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cotbert/error.hpp"
#include "cotbert/simd/kernels.hpp"

namespace cotbert {
namespace {

void check_rows(const Matrix& m, const char* which) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double v : m.row(i)) {
      require(std::isfinite(v), ErrorKind::numeric,
              std::string("non-finite value in ") + which + " row " + std::to_string(i));
    }
    require(l2_norm(m.row(i)) > 0.0, ErrorKind::numeric, std::string("zero-norm ") + which + " row " + std::to_string(i));
  }
}

bool uses_negatives(LossVariant v) { return v != LossVariant::standard; }

void validate_batch(const TripletEmbeddings& b, const LossConfig& config) {
  config.validate();
  const std::size_t n = b.anchor.rows();
  require(n > 0, ErrorKind::input, "contrastive loss needs at least one row");
  require(b.positive.rows() == n && b.positive.cols() == b.anchor.cols(), ErrorKind::shape,
          "anchor and positive embeddings differ in shape");
  if (uses_negatives(config.variant)) {
    require(b.negative.rows() == n && b.negative.cols() == b.anchor.cols(), ErrorKind::shape,
            "negative embeddings are missing or differ in shape");
  }
  check_rows(b.anchor, "anchor");
  check_rows(b.positive, "positive");
  if (uses_negatives(config.variant)) check_rows(b.negative, "negative");
}

// dL/dx for x = xhat * |x| given dL/dxhat.
void project_through_normalization(const Matrix& raw, const Matrix& unit, Matrix& grad) {
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const double norm = l2_norm(raw.row(i));
    const double radial = simd::dot(grad.row(i), unit.row(i));
    simd::axpy(-radial, unit.row(i), grad.row(i));
    simd::scale(1.0 / norm, grad.row(i));
  }
}

}  // namespace

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::standard: return "standard";
    case LossVariant::extended_no_pn: return "extended-no-pn";
    case LossVariant::extended: return "extended";
  }
  return "unknown";
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "standard") return LossVariant::standard;
  if (name == "extended-no-pn" || name == "extended_no_pn") return LossVariant::extended_no_pn;
  if (name == "extended") return LossVariant::extended;
  fail(ErrorKind::config, "unknown loss variant '" + std::string(name) + "' (expected standard|extended-no-pn|extended)");
}

void LossConfig::validate() const {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::config, "temperature must be positive");
}

double cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorKind::shape, "cosine of vectors with different lengths");
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  require(nu > 0.0 && nv > 0.0, ErrorKind::numeric, "cosine of a zero-norm vector");
  return std::clamp(simd::dot(u, v) / (nu * nv), -1.0, 1.0);
}

LossResult contrastive_loss(const TripletEmbeddings& batch, const LossConfig& config, LossGradient* gradient) {
  validate_batch(batch, config);
  const std::size_t n = batch.anchor.rows();
  const double inv_t = 1.0 / config.temperature;
  const bool with_an = uses_negatives(config.variant);
  const bool with_pn = config.variant == LossVariant::extended;

  const Matrix a = normalize_rows(batch.anchor);
  const Matrix p = normalize_rows(batch.positive);
  Matrix ng;
  if (with_an) ng = normalize_rows(batch.negative);

  // Logits cos/t for each family of denominator terms.
  Matrix ap, an, pn;
  matmul_nt(a, p, ap);
  simd::scale(inv_t, ap.values());
  if (with_an) {
    matmul_nt(a, ng, an);
    simd::scale(inv_t, an.values());
  }
  if (with_pn) {
    matmul_nt(p, ng, pn);
    simd::scale(inv_t, pn.values());
  }

  LossResult result;
  result.per_row.resize(n);
  // Softmax weights, reused for the gradient.
  Matrix w_ap(n, n), w_an(with_an ? n : 0, n), w_pn(with_pn ? n : 0, n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      m = std::max(m, ap(i, j));
      if (with_an) m = std::max(m, an(i, j));
      if (with_pn) m = std::max(m, pn(i, j));
    }
    double rest = 0.0;  // every term but the positive one
    for (std::size_t j = 0; j < n; ++j) {
      w_ap(i, j) = std::exp(ap(i, j) - m);
      if (j != i) rest += w_ap(i, j);
      if (with_an) rest += (w_an(i, j) = std::exp(an(i, j) - m));
      if (with_pn) rest += (w_pn(i, j) = std::exp(pn(i, j) - m));
    }
    const double z = w_ap(i, i) + rest;
    // When the positive is the largest score, log1p keeps small losses accurate.
    result.per_row[i] = ap(i, i) == m ? std::log1p(rest) : (m - ap(i, i)) + std::log(z);
    require(std::isfinite(result.per_row[i]), ErrorKind::numeric, "non-finite loss at row " + std::to_string(i));
    simd::scale(1.0 / z, w_ap.row(i));
    if (with_an) simd::scale(1.0 / z, w_an.row(i));
    if (with_pn) simd::scale(1.0 / z, w_pn.row(i));
  }
  double total = 0.0;
  for (double l : result.per_row) total += l;
  result.loss = total / static_cast<double>(n);

  if (gradient == nullptr) return result;

  // d(mean loss)/d(cosine) = (softmax weight - [numerator]) / (N t)
  const double coef = inv_t / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) w_ap(i, i) -= 1.0;
  simd::scale(coef, w_ap.values());
  if (with_an) simd::scale(coef, w_an.values());
  if (with_pn) simd::scale(coef, w_pn.values());

  Matrix ga, gp, gn;
  matmul(w_ap, p, ga);
  gp = Matrix(n, p.cols());
  matmul_tn_acc(w_ap, a, gp);
  if (with_an) {
    Matrix tmp;
    matmul(w_an, ng, tmp);
    add_inplace(ga, tmp);
    gn = Matrix(n, ng.cols());
    matmul_tn_acc(w_an, a, gn);
  }
  if (with_pn) {
    Matrix tmp;
    matmul(w_pn, ng, tmp);
    add_inplace(gp, tmp);
    matmul_tn_acc(w_pn, p, gn);
  }
  project_through_normalization(batch.anchor, a, ga);
  project_through_normalization(batch.positive, p, gp);
  if (with_an) project_through_normalization(batch.negative, ng, gn);

  gradient->anchor = std::move(ga);
  gradient->positive = std::move(gp);
  gradient->negative = with_an ? std::move(gn) : Matrix(batch.negative.rows(), batch.negative.cols());
  return result;
}

double loss_gradient_check(const TripletEmbeddings& batch, const LossConfig& config, double epsilon) {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::input, "finite-difference epsilon must be positive");
  LossGradient analytic;
  contrastive_loss(batch, config, &analytic);

  TripletEmbeddings probe = batch;
  double worst = 0.0;
  auto sweep = [&](Matrix& target, const Matrix& grad) {
    for (std::size_t k = 0; k < target.size(); ++k) {
      double& x = target.values()[k];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        return contrastive_loss(probe, config).loss;
      };
      const double numeric = (8.0 * (at(epsilon) - at(-epsilon)) - (at(2 * epsilon) - at(-2 * epsilon))) / (12.0 * epsilon);
      x = saved;
      const double exact = grad.values()[k];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  };
  sweep(probe.anchor, analytic.anchor);
  sweep(probe.positive, analytic.positive);
  if (uses_negatives(config.variant)) sweep(probe.negative, analytic.negative);
  return worst;
}

CosineRange cosine_extrema(const TripletEmbeddings& batch) {
  CosineRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto scan = [&](const Matrix& x, const Matrix& y) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < y.rows(); ++j) {
        const double nx = l2_norm(x.row(i));
        const double ny = l2_norm(y.row(j));
        const double c = simd::dot(x.row(i), y.row(j)) / (nx * ny);
        r.min = std::min(r.min, c);
        r.max = std::max(r.max, c);
      }
    }
  };
  scan(batch.anchor, batch.positive);
  if (batch.negative.rows() == batch.anchor.rows() && !batch.negative.empty()) {
    scan(batch.anchor, batch.negative);
    scan(batch.positive, batch.negative);
  }
  return r;
}

}  // namespace cotbert
