#include "ecgcl/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace ecgcl {

int EncoderConfig::max_kernel() const {
  return *std::max_element(kernel_lengths.begin(), kernel_lengths.end());
}

void EncoderConfig::validate() const {
  if (input_leads < 1) throw std::invalid_argument("encoder needs at least one input lead");
  if (depth < 1) throw std::invalid_argument("encoder depth must be >= 1");
  if (filters_per_branch < 1 || bottleneck_channels < 1)
    throw std::invalid_argument("filter and bottleneck counts must be positive");
  if (residual_every < 1) throw std::invalid_argument("residual_every must be >= 1");
  for (int k : kernel_lengths) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel lengths must be odd and positive");
  }
}

void BundleConfig::validate() const {
  encoder.validate();
  if (metadata_dim < 0 || embedding_dim < 1 || hidden_dim < 1 || num_classes < 1)
    throw std::invalid_argument("invalid bundle dimensions");
}

// ---------------------------------------------------------------------------

template <typename T>
InceptionBlock<T>::InceptionBlock(int in_channels, const EncoderConfig& cfg)
    : filters_(cfg.filters_per_branch),
      bottleneck_(in_channels, cfg.bottleneck_channels, 1, cfg.padding),
      convs_{Conv1d<T>(cfg.bottleneck_channels, cfg.filters_per_branch, cfg.kernel_lengths[0], cfg.padding),
             Conv1d<T>(cfg.bottleneck_channels, cfg.filters_per_branch, cfg.kernel_lengths[1], cfg.padding),
             Conv1d<T>(cfg.bottleneck_channels, cfg.filters_per_branch, cfg.kernel_lengths[2], cfg.padding)},
      pool_conv_(in_channels, cfg.filters_per_branch, 1, cfg.padding),
      bn_(4 * cfg.filters_per_branch, cfg.padding) {
  pool_.set_padding(cfg.padding);
}

template <typename T>
Sequence<T> InceptionBlock<T>::forward(const Sequence<T>& x, Mode mode) {
  const Sequence<T> b = bottleneck_.forward(x);
  Sequence<T> cat = Sequence<T>::like(x, 4 * filters_);
  for (int i = 0; i < 3; ++i) cat.data.middleCols(i * filters_, filters_) = convs_[i].forward(b).data;
  cat.data.middleCols(3 * filters_, filters_) = pool_conv_.forward(pool_.forward(x)).data;
  Sequence<T> y = bn_.forward(cat, mode);
  y.data = relu(y.data);
  output_ = y.data;
  return y;
}

template <typename T>
Sequence<T> InceptionBlock<T>::backward(const Sequence<T>& dy) {
  const Sequence<T> dz{relu_backward(dy.data, output_), dy.batch, dy.length, dy.pad};
  const Sequence<T> dcat = bn_.backward(dz);
  auto slice = [&](int i) {
    return Sequence<T>{dcat.data.middleCols(i * filters_, filters_), dy.batch, dy.length, dy.pad};
  };
  Sequence<T> db = convs_[0].backward(slice(0));
  db.data += convs_[1].backward(slice(1)).data;
  db.data += convs_[2].backward(slice(2)).data;
  Sequence<T> dx = bottleneck_.backward(db);
  dx.data += pool_.backward(pool_conv_.backward(slice(3))).data;
  return dx;
}

template <typename T>
void InceptionBlock<T>::reset(std::mt19937_64& rng) {
  bottleneck_.reset(rng);
  for (auto& c : convs_) c.reset(rng);
  pool_conv_.reset(rng);
}

template <typename T>
void InceptionBlock<T>::set_padding(Padding p) {
  bottleneck_.set_padding(p);
  for (auto& c : convs_) c.set_padding(p);
  pool_.set_padding(p);
  pool_conv_.set_padding(p);
  bn_.set_padding(p);
}

template <typename T>
void InceptionBlock<T>::visit(const std::string& prefix,
                              const std::function<void(const std::string&, Parameter<T>&)>& fn) {
  fn(prefix + "bottleneck.weight", bottleneck_.weight);
  for (int i = 0; i < 3; ++i) fn(prefix + "conv" + std::to_string(i) + ".weight", convs_[i].weight);
  fn(prefix + "pool_conv.weight", pool_conv_.weight);
  fn(prefix + "bn.gamma", bn_.gamma);
  fn(prefix + "bn.beta", bn_.beta);
}

template <typename T>
void InceptionBlock<T>::visit_buffers(const std::string& prefix,
                                      const std::function<void(const std::string&, Mat<T>&)>& fn) {
  fn(prefix + "bn.running_mean", bn_.running_mean);
  fn(prefix + "bn.running_var", bn_.running_var);
}

// ---------------------------------------------------------------------------

template <typename T>
Shortcut<T>::Shortcut(int in_channels, int out_channels, Padding p)
    : conv_(in_channels, out_channels, 1, p), bn_(out_channels, p) {}

template <typename T>
Sequence<T> Shortcut<T>::forward(const Sequence<T>& x, Mode mode) {
  return bn_.forward(conv_.forward(x), mode);
}

template <typename T>
Sequence<T> Shortcut<T>::backward(const Sequence<T>& dy) {
  return conv_.backward(bn_.backward(dy));
}

template <typename T>
void Shortcut<T>::visit(const std::string& prefix,
                        const std::function<void(const std::string&, Parameter<T>&)>& fn) {
  fn(prefix + "conv.weight", conv_.weight);
  fn(prefix + "bn.gamma", bn_.gamma);
  fn(prefix + "bn.beta", bn_.beta);
}

template <typename T>
void Shortcut<T>::visit_buffers(const std::string& prefix,
                                const std::function<void(const std::string&, Mat<T>&)>& fn) {
  fn(prefix + "bn.running_mean", bn_.running_mean);
  fn(prefix + "bn.running_var", bn_.running_var);
}

// ---------------------------------------------------------------------------

template <typename T>
InceptionEncoder<T>::InceptionEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int width = cfg_.feature_dim();
  int res_channels = cfg_.input_leads;
  for (int d = 0; d < cfg_.depth; ++d) {
    blocks_.emplace_back(d == 0 ? cfg_.input_leads : width, cfg_);
    if (has_residual(d)) {
      shortcuts_.emplace_back(res_channels, width, cfg_.padding);
      res_channels = width;
    }
  }
}

template <typename T>
Mat<T> InceptionEncoder<T>::forward(const Sequence<T>& signal, Mode mode) {
  if (signal.channels() != cfg_.input_leads)
    throw ShapeError("encoder expects " + std::to_string(cfg_.input_leads) + " leads, got " +
                     std::to_string(signal.channels()));
  if (signal.length < cfg_.max_kernel())
    throw ShapeError("signal length " + std::to_string(signal.length) + " is shorter than the longest kernel");
  if (signal.pad < required_pad()) throw ShapeError("input sequence padding is narrower than the encoder needs");

  residual_out_.clear();
  last_batch_ = signal.batch;
  last_length_ = signal.length;
  last_pad_ = signal.pad;
  Sequence<T> x = signal;
  Sequence<T> res = signal;
  std::size_t s = 0;
  for (int d = 0; d < cfg_.depth; ++d) {
    x = blocks_[d].forward(x, mode);
    if (has_residual(d)) {
      x.data = relu(x.data + shortcuts_[s++].forward(res, mode).data);
      residual_out_.push_back(x.data);
      res = x;
    }
  }
  Mat<T> features(x.batch, x.channels());
  for (int b = 0; b < x.batch; ++b) features.row(b) = x.sample(b).colwise().mean();
  return features;
}

template <typename T>
Sequence<T> InceptionEncoder<T>::backward(const Mat<T>& dfeatures) {
  const int L = last_length_;
  const int B = last_batch_;
  const int width = cfg_.feature_dim();

  // grads[level] accumulates d(loss)/d(input of block `level`); level depth is the output.
  std::vector<Sequence<T>> grads(cfg_.depth + 1);
  grads[cfg_.depth] = Sequence<T>::zeros(B, L, last_pad_, width);
  for (int b = 0; b < B; ++b) grads[cfg_.depth].sample(b).rowwise() = dfeatures.row(b) / T(L);

  // level at which each residual's shortcut input was taken
  std::vector<int> res_level;
  int level = 0;
  for (int d = 0; d < cfg_.depth; ++d) {
    if (has_residual(d)) {
      res_level.push_back(level);
      level = d + 1;
    }
  }

  auto accumulate = [&](int lvl, const Sequence<T>& g) {
    if (grads[lvl].data.size() == 0) {
      grads[lvl] = g;
    } else {
      grads[lvl].data += g.data;
    }
  };

  int s = static_cast<int>(shortcuts_.size());
  for (int d = cfg_.depth - 1; d >= 0; --d) {
    Sequence<T> g = grads[d + 1];
    if (has_residual(d)) {
      --s;
      g.data = relu_backward(g.data, residual_out_[s]);
      accumulate(res_level[s], shortcuts_[s].backward(g));
    }
    accumulate(d, blocks_[d].backward(g));
  }
  return grads[0];
}

template <typename T>
void InceptionEncoder<T>::reset(std::mt19937_64& rng) {
  for (auto& b : blocks_) b.reset(rng);
  for (auto& s : shortcuts_) s.reset(rng);
}

template <typename T>
void InceptionEncoder<T>::set_padding(Padding p) {
  cfg_.padding = p;
  for (auto& b : blocks_) b.set_padding(p);
  for (auto& s : shortcuts_) s.set_padding(p);
}

template <typename T>
void InceptionEncoder<T>::visit(const std::string& prefix,
                                const std::function<void(const std::string&, Parameter<T>&)>& fn) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit(prefix + "block" + std::to_string(i) + ".", fn);
  for (std::size_t i = 0; i < shortcuts_.size(); ++i)
    shortcuts_[i].visit(prefix + "shortcut" + std::to_string(i) + ".", fn);
}

template <typename T>
void InceptionEncoder<T>::visit_buffers(const std::string& prefix,
                                        const std::function<void(const std::string&, Mat<T>&)>& fn) {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].visit_buffers(prefix + "block" + std::to_string(i) + ".", fn);
  for (std::size_t i = 0; i < shortcuts_.size(); ++i)
    shortcuts_[i].visit_buffers(prefix + "shortcut" + std::to_string(i) + ".", fn);
}

// ---------------------------------------------------------------------------

template <typename T>
PseudoClassifier<T>::PseudoClassifier(int embedding_dim, int hidden_dim, int num_classes)
    : fc1_(embedding_dim, hidden_dim), fc2_(hidden_dim, num_classes) {}

template <typename T>
Mat<T> PseudoClassifier<T>::forward(const Mat<T>& embedding) {
  hidden_ = relu(fc1_.forward(embedding));
  return fc2_.forward(hidden_);
}

template <typename T>
Mat<T> PseudoClassifier<T>::backward(const Mat<T>& dlogits) {
  return fc1_.backward(relu_backward(fc2_.backward(dlogits), hidden_));
}

template <typename T>
void PseudoClassifier<T>::reset(std::mt19937_64& rng) {
  fc1_.reset(rng);
  fc2_.reset(rng);
}

template <typename T>
void PseudoClassifier<T>::visit(const std::string& prefix,
                                const std::function<void(const std::string&, Parameter<T>&)>& fn) {
  fn(prefix + "fc1.weight", fc1_.weight);
  fn(prefix + "fc1.bias", fc1_.bias);
  fn(prefix + "fc2.weight", fc2_.weight);
  fn(prefix + "fc2.bias", fc2_.bias);
}

// ---------------------------------------------------------------------------

template <typename T>
ModelBundle<T>::ModelBundle(const BundleConfig& cfg, LeadSubset subset)
    : encoder(cfg.encoder),
      projection(cfg.encoder.feature_dim() + cfg.metadata_dim, cfg.embedding_dim),
      classifier(cfg.embedding_dim, cfg.hidden_dim, cfg.num_classes),
      cfg_(cfg),
      subset_(std::move(subset)),
      feature_dim_(cfg.encoder.feature_dim()) {
  cfg_.validate();
  if (cfg_.encoder.input_leads != subset_.size())
    throw ShapeError("encoder input_leads (" + std::to_string(cfg_.encoder.input_leads) +
                     ") does not match lead subset size (" + std::to_string(subset_.size()) + ")");
}

template <typename T>
Mat<T> ModelBundle<T>::embed(const Sequence<T>& signal, const Mat<T>& metadata, Mode mode) {
  if (metadata.rows() != signal.batch || metadata.cols() != cfg_.metadata_dim)
    throw ShapeError("metadata batch must be [" + std::to_string(signal.batch) + " x " +
                     std::to_string(cfg_.metadata_dim) + "]");
  const Mat<T> features = encoder.forward(signal, mode);
  Mat<T> joined(features.rows(), feature_dim_ + cfg_.metadata_dim);
  joined << features, metadata;
  return projection.forward(joined);
}

template <typename T>
BundleOutput<T> ModelBundle<T>::forward(const Sequence<T>& signal, const Mat<T>& metadata, Mode mode) {
  BundleOutput<T> out;
  out.embedding = embed(signal, metadata, mode);
  out.logits = classifier.forward(out.embedding);
  return out;
}

template <typename T>
void ModelBundle<T>::backward(const Mat<T>& dlogits, const Mat<T>* dembedding) {
  Mat<T> demb = classifier.backward(dlogits);
  if (dembedding != nullptr) demb += *dembedding;
  const Mat<T> djoined = projection.backward(demb);
  encoder.backward(djoined.leftCols(feature_dim_));
}

template <typename T>
void ModelBundle<T>::zero_grad() {
  for_each_parameter([](const std::string&, Parameter<T>& p, bool) { p.zero_grad(); });
}

template <typename T>
void ModelBundle<T>::for_each_parameter(
    const std::function<void(const std::string&, Parameter<T>&, bool)>& fn) {
  encoder.visit("encoder.", [&](const std::string& n, Parameter<T>& p) { fn(n, p, true); });
  fn("projection.weight", projection.weight, true);
  fn("projection.bias", projection.bias, true);
  const bool trainable = !classifier.frozen;
  classifier.visit("classifier.", [&](const std::string& n, Parameter<T>& p) { fn(n, p, trainable); });
}

template <typename T>
void ModelBundle<T>::for_each_buffer(const std::function<void(const std::string&, Mat<T>&)>& fn) {
  encoder.visit_buffers("encoder.", fn);
}

template <typename T>
StateDict ModelBundle<T>::state_dict() {
  StateDict out;
  for_each_parameter([&](const std::string& n, Parameter<T>& p, bool) { out[n] = p.value.template cast<float>(); });
  for_each_buffer([&](const std::string& n, Mat<T>& b) { out[n] = b.template cast<float>(); });
  return out;
}

template <typename T>
void ModelBundle<T>::load_state_dict(const StateDict& state, bool strict) {
  auto assign = [&](const std::string& n, Mat<T>& dst) {
    auto it = state.find(n);
    if (it == state.end()) {
      if (strict) throw std::runtime_error("state is missing tensor '" + n + "'");
      return;
    }
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols())
      throw ShapeError("tensor '" + n + "' has incompatible shape");
    dst = it->second.template cast<T>();
  };
  for_each_parameter([&](const std::string& n, Parameter<T>& p, bool) { assign(n, p.value); });
  for_each_buffer([&](const std::string& n, Mat<T>& b) { assign(n, b); });
}

template <typename T>
StateDict ModelBundle<T>::classifier_state() {
  StateDict out;
  classifier.visit("classifier.", [&](const std::string& n, Parameter<T>& p) { out[n] = p.value.template cast<float>(); });
  return out;
}

template <typename T>
void ModelBundle<T>::load_classifier_state(const StateDict& state) {
  classifier.visit("classifier.", [&](const std::string& n, Parameter<T>& p) {
    auto it = state.find(n);
    if (it == state.end()) throw std::runtime_error("classifier state is missing tensor '" + n + "'");
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw ShapeError("classifier tensor '" + n + "' has incompatible shape");
    p.value = it->second.template cast<T>();
  });
}

template <typename T>
ModelBundle<T> init_bundle(const BundleConfig& cfg, const LeadSubset& subset, std::uint64_t seed) {
  ModelBundle<T> bundle(cfg, subset);
  std::mt19937_64 rng(seed);
  bundle.encoder.reset(rng);
  bundle.projection.reset(rng);
  bundle.classifier.reset(rng);
  return bundle;
}

std::vector<double> project(const std::vector<double>& feature, const std::vector<double>& meta,
                            const Mat<double>& weight, const std::vector<double>& bias) {
  const auto width = static_cast<Eigen::Index>(feature.size() + meta.size());
  if (weight.cols() != width || weight.rows() != static_cast<Eigen::Index>(bias.size()))
    throw ShapeError("projection weight must be [" + std::to_string(bias.size()) + " x " + std::to_string(width) + "]");
  Vec<double> joined(width);
  for (std::size_t i = 0; i < feature.size(); ++i) joined(static_cast<Eigen::Index>(i)) = feature[i];
  for (std::size_t i = 0; i < meta.size(); ++i) joined(static_cast<Eigen::Index>(feature.size() + i)) = meta[i];
  const Vec<double> out = weight * joined + Eigen::Map<const Vec<double>>(bias.data(), static_cast<Eigen::Index>(bias.size()));
  return {out.data(), out.data() + out.size()};
}

template class InceptionBlock<float>;
template class InceptionBlock<double>;
template class Shortcut<float>;
template class Shortcut<double>;
template class InceptionEncoder<float>;
template class InceptionEncoder<double>;
template class PseudoClassifier<float>;
template class PseudoClassifier<double>;
template class ModelBundle<float>;
template class ModelBundle<double>;
template ModelBundle<float> init_bundle<float>(const BundleConfig&, const LeadSubset&, std::uint64_t);
template ModelBundle<double> init_bundle<double>(const BundleConfig&, const LeadSubset&, std::uint64_t);

}  // namespace ecgcl
