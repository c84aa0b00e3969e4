#pragma once

// Building blocks with hand-written backward passes. Every layer caches what
// its backward needs during forward, so forward/backward must alternate.
//
// Sequences are channels-last with per-sample pad rows (see Sequence), which
// lets a convolution read its receptive fields as an overlapping strided view
// of the input and run as a single GEMM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ecgcl/tensor.hpp"

namespace ecgcl {

enum class Mode { train, eval };

template <typename T>
using WindowView = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
void uniform_init(Mat<T>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

/// 1-D convolution, stride 1, "same" length, no bias (a batch norm always
/// follows). Weight layout: [(kernel * in) x out], row k * in + c holds tap k
/// of input channel c.
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(int in_channels, int out_channels, int kernel, Padding padding)
      : weight(static_cast<Eigen::Index>(kernel) * in_channels, out_channels),
        in_(in_channels),
        out_(out_channels),
        kernel_(kernel),
        padding_(padding) {
    if (kernel <= 0 || kernel % 2 == 0) throw ShapeError("conv kernel length must be odd");
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  void set_padding(Padding p) { padding_ = p; }

  void reset(std::mt19937_64& rng) { uniform_init(weight.value, std::sqrt(6.0 / (in_ * kernel_)), rng); }

  Sequence<T> forward(const Sequence<T>& x) {
    if (x.channels() != in_)
      throw ShapeError("conv expects " + std::to_string(in_) + " input channels, got " + std::to_string(x.channels()));
    if (x.pad < kernel_ / 2) throw ShapeError("sequence padding is narrower than the conv kernel");
    input_ = x;
    Sequence<T> y = Sequence<T>::like(x, out_);
    if (kernel_ == 1) {
      // per-row map: pad rows stay consistent with the boundary condition
      y.data.noalias() = x.data * weight.value;
      return y;
    }
    y.interior().noalias() = windows(input_.data, x.pad, in_, interior_rows(x)) * weight.value;
    y.fill_padding(padding_);
    return y;
  }

  /// `dy` must have zero pad rows; the returned gradient does too.
  Sequence<T> backward(const Sequence<T>& dy) {
    Sequence<T> dx = Sequence<T>::like(dy, in_);
    if (kernel_ == 1) {
      weight.grad.noalias() += input_.data.transpose() * dy.data;
      dx.data.noalias() = dy.data * weight.value.transpose();
      return dx;
    }
    const Eigen::Index n = interior_rows(dy);
    weight.grad.noalias() += windows(input_.data, dy.pad, in_, n).transpose() * dy.data.middleRows(dy.pad, n);

    // d(input) is the correlation of dy with the tap-reversed, transposed kernel
    Mat<T> flipped(static_cast<Eigen::Index>(kernel_) * out_, in_);
    for (int j = 0; j < kernel_; ++j) {
      flipped.middleRows(static_cast<Eigen::Index>(j) * out_, out_) =
          weight.value.middleRows(static_cast<Eigen::Index>(kernel_ - 1 - j) * in_, in_).transpose();
    }
    if (padding_ == Padding::circular) {
      Sequence<T> wrapped = dy;
      wrapped.fill_padding(Padding::circular);
      dx.interior().noalias() = windows(wrapped.data, dy.pad, out_, n) * flipped;
    } else {
      dx.interior().noalias() = windows(dy.data, dy.pad, out_, n) * flipped;
    }
    dx.fill_padding(Padding::zeros);
    return dx;
  }

  Parameter<T> weight;

 private:
  static Eigen::Index interior_rows(const Sequence<T>& s) { return s.data.rows() - 2 * s.pad; }

  // Row i is the flattened window of rows [i + pad - h, i + pad + h].
  WindowView<T> windows(const Mat<T>& m, int pad, int channels, Eigen::Index rows) const {
    const Eigen::Index h = kernel_ / 2;
    return WindowView<T>(m.data() + (pad - h) * channels, rows, static_cast<Eigen::Index>(kernel_) * channels,
                         Eigen::OuterStride<>(channels));
  }

  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
  Padding padding_ = Padding::zeros;
  Sequence<T> input_;
};

/// Max-pool of width 3, stride 1, same length. Ties go to the centre, then
/// the previous step.
template <typename T>
class MaxPool3 {
 public:
  void set_padding(Padding p) { padding_ = p; }

  Sequence<T> forward(const Sequence<T>& x) {
    if (x.pad < 1) throw ShapeError("max-pool needs at least one pad row");
    input_ = x;
    if (padding_ == Padding::zeros) fill_pads(input_, -std::numeric_limits<T>::infinity());
    else input_.fill_padding(Padding::circular);
    const Eigen::Index n = input_.data.rows() - 2 * x.pad;
    Sequence<T> y = Sequence<T>::like(x, x.channels());
    y.interior() = shifted(-1, n).cwiseMax(shifted(0, n)).cwiseMax(shifted(1, n));
    y.fill_padding(padding_);
    return y;
  }

  Sequence<T> backward(const Sequence<T>& dy) {
    const Eigen::Index n = dy.data.rows() - 2 * dy.pad;
    const auto prev = shifted(-1, n).array();
    const auto cur = shifted(0, n).array();
    const auto next = shifted(1, n).array();
    const auto g = dy.data.middleRows(dy.pad, n).array();
    const auto take_next = next > prev.max(cur);
    const auto take_prev = !take_next && prev > cur;
    Sequence<T> dx = Sequence<T>::zeros(dy.batch, dy.length, dy.pad, dy.channels());
    dx.data.middleRows(dy.pad, n).array() += (take_next || take_prev).select(T(0), g);
    dx.data.middleRows(dy.pad - 1, n).array() += take_prev.select(g, T(0));
    dx.data.middleRows(dy.pad + 1, n).array() += take_next.select(g, T(0));
    if (padding_ == Padding::circular) {
      for (int b = 0; b < dy.batch; ++b) {
        dx.data.row(dx.row(b, dy.length - 1)) += dx.data.row(dx.row(b, -1));
        dx.data.row(dx.row(b, 0)) += dx.data.row(dx.row(b, dy.length));
      }
    }
    dx.fill_padding(Padding::zeros);
    return dx;
  }

 private:
  static void fill_pads(Sequence<T>& s, T value) {
    for (int b = 0; b < s.batch; ++b) {
      s.data.middleRows(b * s.stride(), s.pad).setConstant(value);
      s.data.middleRows(b * s.stride() + s.pad + s.length, s.pad).setConstant(value);
    }
  }

  auto shifted(int offset, Eigen::Index rows) const { return input_.data.middleRows(input_.pad + offset, rows); }

  Padding padding_ = Padding::zeros;
  Sequence<T> input_;
};

/// Per-channel batch norm over (batch, time). Running statistics use
/// momentum 0.1 and the unbiased batch variance.
template <typename T>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(int channels, Padding padding = Padding::zeros)
      : gamma(1, channels),
        beta(1, channels),
        running_mean(Mat<T>::Zero(1, channels)),
        running_var(Mat<T>::Ones(1, channels)),
        padding_(padding) {
    gamma.value.setOnes();
  }

  void set_padding(Padding p) { padding_ = p; }

  Sequence<T> forward(const Sequence<T>& x, Mode mode) {
    mode_ = mode;
    const Eigen::Index C = x.channels();
    Mat<T> mean(1, C);
    Mat<T> var(1, C);
    Mat<T> centered;
    if (mode == Mode::train) {
      count_ = static_cast<double>(x.batch) * x.length;
      mean = valid_colsum(x.data, x) / static_cast<T>(count_);
      centered = x.data.rowwise() - mean.row(0);
      var = valid_colsum(centered.array().square().matrix(), x) / static_cast<T>(count_);
      const T unbiased = count_ > 1 ? static_cast<T>(count_ / (count_ - 1)) : T(1);
      running_mean = (1 - momentum) * running_mean + momentum * mean;
      running_var = (1 - momentum) * running_var + momentum * unbiased * var;
    } else {
      mean = running_mean;
      var = running_var;
      centered = x.data.rowwise() - mean.row(0);
    }
    inv_std_ = (var.array() + eps).rsqrt().matrix();
    xhat_ = (centered.array().rowwise() * inv_std_.row(0).array()).matrix();
    Sequence<T> y = Sequence<T>::like(x, static_cast<int>(C));
    y.data = ((xhat_.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array()).matrix();
    y.fill_padding(padding_);
    return y;
  }

  Sequence<T> backward(const Sequence<T>& dy) {
    // pad rows of dy are zero, so whole-column sums only see valid rows
    const Mat<T> sum_dy = dy.data.colwise().sum();
    const Mat<T> sum_dy_xhat = (dy.data.array() * xhat_.array()).matrix().colwise().sum();
    gamma.grad += sum_dy_xhat;
    beta.grad += sum_dy;
    const Mat<T> scale = (gamma.value.array() * inv_std_.array()).matrix();
    Sequence<T> dx = Sequence<T>::like(dy, dy.channels());
    if (mode_ == Mode::train) {
      const T n = static_cast<T>(count_);
      dx.data = (((n * dy.data.array()).rowwise() - sum_dy.row(0).array() -
                  xhat_.array().rowwise() * sum_dy_xhat.row(0).array())
                     .rowwise() *
                 (scale.row(0).array() / n))
                    .matrix();
    } else {
      dx.data = (dy.data.array().rowwise() * scale.row(0).array()).matrix();
    }
    dx.fill_padding(Padding::zeros);
    return dx;
  }

  Parameter<T> gamma;  // [1 x C]
  Parameter<T> beta;   // [1 x C]
  Mat<T> running_mean;
  Mat<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

 private:
  // column sums over valid rows only
  template <typename Derived>
  static Mat<T> valid_colsum(const Eigen::MatrixBase<Derived>& m, const Sequence<T>& geom) {
    Mat<T> total = m.colwise().sum();
    for (int b = 0; b < geom.batch; ++b) {
      total -= m.middleRows(b * geom.stride(), geom.pad).colwise().sum();
      total -= m.middleRows(b * geom.stride() + geom.pad + geom.length, geom.pad).colwise().sum();
    }
    return total;
  }

  Padding padding_ = Padding::zeros;
  Mode mode_ = Mode::train;
  double count_ = 1.0;
  Mat<T> xhat_;
  Mat<T> inv_std_;
};

/// Dense layer on row-per-sample input [batch x in].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out) : weight(out, in), bias(1, out), in_(in), out_(out) {}

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  void reset(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    uniform_init(weight.value, bound, rng);
    uniform_init(bias.value, bound, rng);
  }

  Mat<T> forward(const Mat<T>& x) {
    if (x.cols() != in_)
      throw ShapeError("linear expects width " + std::to_string(in_) + ", got " + std::to_string(x.cols()));
    input_ = x;
    Mat<T> y = x * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) {
    weight.grad.noalias() += dy.transpose() * input_;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value;
  }

  Parameter<T> weight;  // [out x in]
  Parameter<T> bias;    // [1 x out]

 private:
  int in_ = 0;
  int out_ = 0;
  Mat<T> input_;
};

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Gradient of ReLU given the forward output (active where y > 0).
template <typename T>
Mat<T> relu_backward(const Mat<T>& dy, const Mat<T>& y) {
  return (y.array() > T(0)).select(dy, T(0));
}

}  // namespace ecgcl
