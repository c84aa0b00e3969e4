#include "ecgcl/loss.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace ecgcl {

std::string to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::l1: return "l1";
    case SimilarityKind::l2: return "l2";
    case SimilarityKind::cosine: return "cosine";
  }
  return "?";
}

SimilarityKind similarity_kind_from_string(const std::string& s) {
  if (s == "l1") return SimilarityKind::l1;
  if (s == "l2") return SimilarityKind::l2;
  if (s == "cosine") return SimilarityKind::cosine;
  throw std::invalid_argument("unknown similarity kind '" + s + "' (expected l1, l2 or cosine)");
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and >= 0");
}

template <typename T>
double classification_loss(const Mat<T>& logits, const Mat<T>& targets, Mat<T>* dlogits) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw ShapeError("logits and targets shapes differ");
  if (logits.size() == 0) throw ShapeError("empty batch");
  const double n = static_cast<double>(logits.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = static_cast<double>(logits.data()[i]);
    const double y = static_cast<double>(targets.data()[i]);
    // log(1 + e^z) - y z, written without overflow
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  if (dlogits != nullptr) {
    dlogits->resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const double z = static_cast<double>(logits.data()[i]);
      const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      dlogits->data()[i] = static_cast<T>((p - static_cast<double>(targets.data()[i])) / n);
    }
  }
  return sum / n;
}

namespace {

// Value of one pair and, optionally, d(value)/d(vx) scaled by `scale`.
template <typename T>
double pair_similarity(const T* a, const T* b, Eigen::Index d, SimilarityKind kind, T* grad, double scale) {
  switch (kind) {
    case SimilarityKind::l1: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double diff = static_cast<double>(b[i]) - static_cast<double>(a[i]);
        s += std::abs(diff);
        if (grad) grad[i] = static_cast<T>(scale * static_cast<double>((diff > 0) - (diff < 0)));
      }
      return s;
    }
    case SimilarityKind::l2: {
      double sq = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double diff = static_cast<double>(b[i]) - static_cast<double>(a[i]);
        sq += diff * diff;
      }
      const double norm = std::sqrt(sq);
      if (grad) {
        for (Eigen::Index i = 0; i < d; ++i) {
          const double diff = static_cast<double>(b[i]) - static_cast<double>(a[i]);
          grad[i] = static_cast<T>(norm > 0 ? scale * diff / norm : 0.0);
        }
      }
      return norm;
    }
    case SimilarityKind::cosine: {
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
      }
      if (na == 0.0 || nb == 0.0) {
        spdlog::warn("cosine distance with a zero vector; using 1");
        if (grad) std::fill(grad, grad + d, T(0));
        return 1.0;
      }
      const double norm_a = std::sqrt(na);
      const double norm_b = std::sqrt(nb);
      const double cos = dot / (norm_a * norm_b);
      if (grad) {
        // d(1 - cos)/db = -(a / (|a||b|) - cos * b / |b|^2)
        for (Eigen::Index i = 0; i < d; ++i) {
          const double g = -(static_cast<double>(a[i]) / (norm_a * norm_b) - cos * static_cast<double>(b[i]) / nb);
          grad[i] = static_cast<T>(scale * g);
        }
      }
      return 1.0 - cos;
    }
  }
  return 0.0;
}

}  // namespace

template <typename T>
double similarity(std::span<const T> v12, std::span<const T> vx, SimilarityKind kind) {
  if (v12.size() != vx.size()) throw ShapeError("similarity operands differ in dimension");
  return pair_similarity<T>(v12.data(), vx.data(), static_cast<Eigen::Index>(v12.size()), kind, nullptr, 0.0);
}

template <typename T>
double similarity(const Mat<T>& v12, const Mat<T>& vx, SimilarityKind kind, Mat<T>* dvx) {
  if (v12.rows() != vx.rows() || v12.cols() != vx.cols()) throw ShapeError("similarity operands differ in shape");
  if (vx.rows() == 0) throw ShapeError("empty batch");
  const Eigen::Index n = vx.rows();
  const Eigen::Index d = vx.cols();
  const double scale = 1.0 / static_cast<double>(n);
  if (dvx) dvx->resize(n, d);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    sum += pair_similarity<T>(v12.row(r).data(), vx.row(r).data(), d, kind, dvx ? dvx->row(r).data() : nullptr, scale);
  }
  return sum * scale;
}

template <typename T>
LossTerms total_loss(const Mat<T>& logits, const Mat<T>& targets, const Mat<T>& v12, const Mat<T>& vx,
                     const LossConfig& config, Mat<T>* dlogits, Mat<T>* dvx) {
  config.validate();
  LossTerms t;
  t.cls = classification_loss(logits, targets, dlogits);
  t.sim = similarity(v12, vx, config.sim_kind, dvx);
  t.total = t.cls + config.alpha * t.sim;
  if (dvx) *dvx *= static_cast<T>(config.alpha);
  return t;
}

template double classification_loss<float>(const Mat<float>&, const Mat<float>&, Mat<float>*);
template double classification_loss<double>(const Mat<double>&, const Mat<double>&, Mat<double>*);
template double similarity<float>(std::span<const float>, std::span<const float>, SimilarityKind);
template double similarity<double>(std::span<const double>, std::span<const double>, SimilarityKind);
template double similarity<float>(const Mat<float>&, const Mat<float>&, SimilarityKind, Mat<float>*);
template double similarity<double>(const Mat<double>&, const Mat<double>&, SimilarityKind, Mat<double>*);
template LossTerms total_loss<float>(const Mat<float>&, const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                     const LossConfig&, Mat<float>*, Mat<float>*);
template LossTerms total_loss<double>(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                      const Mat<double>&, const LossConfig&, Mat<double>*, Mat<double>*);

}  // namespace ecgcl
