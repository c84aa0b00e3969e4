#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecgcl {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Padding { zeros, circular };

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A batch of multichannel sequences, channels-last: `data` is
/// [batch * (length + 2 * pad)] x channels. Sample b, time t lives at row
/// b * stride() + pad + t. The pad rows on either side of each sample hold the
/// boundary condition (zeros, or circular copies) for activations, and are
/// zero for gradients.
template <typename T>
struct Sequence {
  Mat<T> data;
  int batch = 0;
  int length = 0;
  int pad = 0;

  int channels() const { return static_cast<int>(data.cols()); }
  Eigen::Index stride() const { return static_cast<Eigen::Index>(length) + 2 * pad; }
  Eigen::Index row(int b, int t) const { return b * stride() + pad + t; }

  /// Rows [pad, rows - pad): every valid row plus the interior pads.
  auto interior() { return data.middleRows(pad, data.rows() - 2 * pad); }

  auto sample(int b) { return data.middleRows(b * stride() + pad, length); }
  auto sample(int b) const { return data.middleRows(b * stride() + pad, length); }

  static Sequence zeros(int batch, int length, int pad, int channels) {
    Sequence s;
    s.batch = batch;
    s.length = length;
    s.pad = pad;
    s.data = Mat<T>::Zero(static_cast<Eigen::Index>(batch) * (length + 2 * pad), channels);
    return s;
  }

  static Sequence like(const Sequence& other, int channels) {
    Sequence s;
    s.batch = other.batch;
    s.length = other.length;
    s.pad = other.pad;
    s.data.resize(other.data.rows(), channels);
    return s;
  }

  /// Writes the boundary condition into every pad row.
  void fill_padding(Padding mode) {
    if (pad == 0) return;
    if (mode == Padding::circular && pad > length) throw ShapeError("circular padding wider than the sequence");
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index base = b * stride();
      if (mode == Padding::zeros) {
        data.middleRows(base, pad).setZero();
        data.middleRows(base + pad + length, pad).setZero();
      } else {
        data.middleRows(base, pad) = data.middleRows(base + length, pad);
        data.middleRows(base + pad + length, pad) = data.middleRows(base + pad, pad);
      }
    }
  }
};

/// Named trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  Mat<T> value;
  Mat<T> grad;

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols)
      : value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

}  // namespace ecgcl
