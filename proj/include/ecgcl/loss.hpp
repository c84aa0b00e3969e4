#pragma once

#include <optional>
#include <span>
#include <string>

#include "ecgcl/tensor.hpp"

namespace ecgcl {

enum class SimilarityKind { l1, l2, cosine };

std::string to_string(SimilarityKind kind);
SimilarityKind similarity_kind_from_string(const std::string& s);

struct LossConfig {
  SimilarityKind sim_kind = SimilarityKind::l2;
  double alpha = 1.0;

  void validate() const;
};

/// Per-batch loss terms; total = cls + alpha * sim.
struct LossTerms {
  double cls = 0.0;
  double sim = 0.0;
  double total = 0.0;
};

/// Mean binary cross-entropy over batch and classes, on sigmoid(logits).
template <typename T>
double classification_loss(const Mat<T>& logits, const Mat<T>& targets, Mat<T>* dlogits = nullptr);

/// Embedding distance of one pair. The cosine kind is the distance 1 - cos;
/// a zero vector gives 1.
template <typename T>
double similarity(std::span<const T> v12, std::span<const T> vx, SimilarityKind kind);

/// Batch mean of the row-wise similarity. When `dvx` is given it receives
/// d(mean sim)/d(vx).
template <typename T>
double similarity(const Mat<T>& v12, const Mat<T>& vx, SimilarityKind kind, Mat<T>* dvx = nullptr);

/// Composite objective: classification loss plus alpha-weighted embedding
/// distance. Gradients (if requested) are w.r.t. logits and vx.
template <typename T>
LossTerms total_loss(const Mat<T>& logits, const Mat<T>& targets, const Mat<T>& v12, const Mat<T>& vx,
                     const LossConfig& config, Mat<T>* dlogits = nullptr, Mat<T>* dvx = nullptr);

}  // namespace ecgcl
