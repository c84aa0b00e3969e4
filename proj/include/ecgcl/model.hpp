#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ecgcl/layers.hpp"
#include "ecgcl/leads.hpp"
#include "ecgcl/tensor.hpp"

namespace ecgcl {

struct EncoderConfig {
  int input_leads = 12;
  int depth = 6;
  int filters_per_branch = 32;
  std::array<int, 3> kernel_lengths = {39, 19, 9};
  int bottleneck_channels = 32;
  int residual_every = 3;
  Padding padding = Padding::zeros;

  int feature_dim() const { return 4 * filters_per_branch; }
  int max_kernel() const;
  /// Pad rows each input sample must carry.
  int required_pad() const { return std::max(max_kernel() / 2, 1); }
  void validate() const;
};

struct BundleConfig {
  EncoderConfig encoder;
  int metadata_dim = 0;
  int embedding_dim = 128;
  int hidden_dim = 64;
  int num_classes = 5;

  void validate() const;
};

/// Named float32 tensors; ordered so serialization is canonical.
using StateDict = std::map<std::string, Mat<float>>;

template <typename T>
class InceptionBlock {
 public:
  InceptionBlock(int in_channels, const EncoderConfig& cfg);

  Sequence<T> forward(const Sequence<T>& x, Mode mode);
  Sequence<T> backward(const Sequence<T>& dy);

  void reset(std::mt19937_64& rng);
  void set_padding(Padding p);
  void visit(const std::string& prefix, const std::function<void(const std::string&, Parameter<T>&)>& fn);
  void visit_buffers(const std::string& prefix, const std::function<void(const std::string&, Mat<T>&)>& fn);

 private:
  int filters_;
  Conv1d<T> bottleneck_;
  std::array<Conv1d<T>, 3> convs_;
  MaxPool3<T> pool_;
  Conv1d<T> pool_conv_;
  BatchNorm1d<T> bn_;
  Mat<T> output_;
};

template <typename T>
class Shortcut {
 public:
  Shortcut(int in_channels, int out_channels, Padding p);

  Sequence<T> forward(const Sequence<T>& x, Mode mode);
  Sequence<T> backward(const Sequence<T>& dy);

  void reset(std::mt19937_64& rng) { conv_.reset(rng); }
  void set_padding(Padding p) {
    conv_.set_padding(p);
    bn_.set_padding(p);
  }
  void visit(const std::string& prefix, const std::function<void(const std::string&, Parameter<T>&)>& fn);
  void visit_buffers(const std::string& prefix, const std::function<void(const std::string&, Mat<T>&)>& fn);

 private:
  Conv1d<T> conv_;
  BatchNorm1d<T> bn_;
};

/// InceptionTime feature extractor ending in global average pooling.
template <typename T>
class InceptionEncoder {
 public:
  explicit InceptionEncoder(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  int required_pad() const { return cfg_.required_pad(); }

  /// signal: channels = input_leads, pad >= required_pad() -> features [batch x 4F]
  Mat<T> forward(const Sequence<T>& signal, Mode mode);
  Sequence<T> backward(const Mat<T>& dfeatures);

  void reset(std::mt19937_64& rng);
  void set_padding(Padding p);
  void visit(const std::string& prefix, const std::function<void(const std::string&, Parameter<T>&)>& fn);
  void visit_buffers(const std::string& prefix, const std::function<void(const std::string&, Mat<T>&)>& fn);

 private:
  bool has_residual(int block) const { return block % cfg_.residual_every == cfg_.residual_every - 1; }

  EncoderConfig cfg_;
  std::vector<InceptionBlock<T>> blocks_;
  std::vector<Shortcut<T>> shortcuts_;
  std::vector<Mat<T>> residual_out_;  // post-ReLU outputs of residual joins
  int last_batch_ = 0;
  int last_length_ = 0;
  int last_pad_ = 0;
};

/// Two-layer MLP head: embedding -> hidden (ReLU) -> logits.
template <typename T>
class PseudoClassifier {
 public:
  PseudoClassifier(int embedding_dim, int hidden_dim, int num_classes);

  Mat<T> forward(const Mat<T>& embedding);
  Mat<T> backward(const Mat<T>& dlogits);

  void reset(std::mt19937_64& rng);
  void visit(const std::string& prefix, const std::function<void(const std::string&, Parameter<T>&)>& fn);

  bool frozen = false;

 private:
  Linear<T> fc1_;
  Linear<T> fc2_;
  Mat<T> hidden_;
};

template <typename T>
struct BundleOutput {
  Mat<T> embedding;  // [batch x d]
  Mat<T> logits;     // [batch x classes]
};

/// Encoder, metadata-concat projection and pseudo-classifier for one lead subset.
template <typename T>
class ModelBundle {
 public:
  ModelBundle(const BundleConfig& cfg, LeadSubset subset);

  const BundleConfig& config() const { return cfg_; }
  const LeadSubset& subset() const { return subset_; }

  /// Encoder feature followed by the linear projection; no nonlinearity.
  Mat<T> embed(const Sequence<T>& signal, const Mat<T>& metadata, Mode mode);
  BundleOutput<T> forward(const Sequence<T>& signal, const Mat<T>& metadata, Mode mode);
  /// Backpropagates d(loss)/d(logits) plus an optional direct embedding term.
  void backward(const Mat<T>& dlogits, const Mat<T>* dembedding = nullptr);

  void zero_grad();
  void set_padding(Padding p) { encoder.set_padding(p); }

  /// Visits every parameter with its canonical name; `trainable` is false for
  /// a frozen classifier.
  void for_each_parameter(const std::function<void(const std::string&, Parameter<T>&, bool trainable)>& fn);
  void for_each_buffer(const std::function<void(const std::string&, Mat<T>&)>& fn);

  StateDict state_dict();
  void load_state_dict(const StateDict& state, bool strict = true);
  StateDict classifier_state();
  void load_classifier_state(const StateDict& state);

  InceptionEncoder<T> encoder;
  Linear<T> projection;
  PseudoClassifier<T> classifier;

 private:
  BundleConfig cfg_;
  LeadSubset subset_;
  int feature_dim_;
};

template <typename T>
ModelBundle<T> init_bundle(const BundleConfig& cfg, const LeadSubset& subset, std::uint64_t seed);

/// Plain (non-template) projection and classification used by the
/// operation-level API: embedding = W * concat(feature, meta) + b.
std::vector<double> project(const std::vector<double>& feature, const std::vector<double>& meta,
                            const Mat<double>& weight, const std::vector<double>& bias);

extern template class InceptionBlock<float>;
extern template class InceptionBlock<double>;
extern template class Shortcut<float>;
extern template class Shortcut<double>;
extern template class InceptionEncoder<float>;
extern template class InceptionEncoder<double>;
extern template class PseudoClassifier<float>;
extern template class PseudoClassifier<double>;
extern template class ModelBundle<float>;
extern template class ModelBundle<double>;

}  // namespace ecgcl
