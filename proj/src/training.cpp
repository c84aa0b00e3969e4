#include "ecgcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ecgcl/io.hpp"
#include "ecgcl/optim.hpp"

namespace ecgcl {

using nlohmann::json;

void OptimizerConfig::validate() const {
  if (kind != "adam") throw std::invalid_argument("unsupported optimizer '" + kind + "' (only adam)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("max epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

void RunConfig::validate() const {
  split.validate();
  (void)lead_subset();  // throws for sizes other than 2, 3, 4, 6, 12
  bundle_config().validate();
  metadata.validate();
  loss.validate();
  optimizer.validate();
  if (student_arch != "inception")
    throw std::invalid_argument("student_arch '" + student_arch + "' is not implemented (only inception)");
}

BundleConfig RunConfig::bundle_config() const {
  BundleConfig b;
  b.encoder = encoder;
  b.encoder.input_leads = subset;
  b.metadata_dim = use_metadata ? metadata.length() : 0;
  b.embedding_dim = embedding_dim;
  b.hidden_dim = hidden_dim;
  b.num_classes = kNumClasses;
  return b;
}

RunConfig desk_config() {
  RunConfig c;
  c.encoder.depth = 3;
  c.encoder.filters_per_branch = 8;
  c.encoder.bottleneck_channels = 8;
  c.encoder.kernel_lengths = {9, 5, 3};
  c.embedding_dim = 32;
  c.optimizer.batch_size = 32;
  c.optimizer.learning_rate = 3e-3;
  c.optimizer.max_epochs = 6;
  c.loss.alpha = 0.3;
  return c;
}

std::string RunConfig::hash() const {
  json j = *this;
  j.erase("paths");
  return io::sha1_hex(j.dump());
}

void to_json(json& j, const RunConfig& c) {
  j = json{
      {"split", {{"train_folds", c.split.train_folds}, {"eval_fold", c.split.eval_fold}, {"holdout_fold", c.split.holdout_fold}}},
      {"encoder",
       {{"depth", c.encoder.depth},
        {"filters_per_branch", c.encoder.filters_per_branch},
        {"kernel_lengths", c.encoder.kernel_lengths},
        {"bottleneck_channels", c.encoder.bottleneck_channels},
        {"residual_every", c.encoder.residual_every},
        {"padding", c.encoder.padding == Padding::zeros ? "zeros" : "circular"}}},
      {"embedding_dim", c.embedding_dim},
      {"hidden_dim", c.hidden_dim},
      {"use_metadata", c.use_metadata},
      {"metadata", c.metadata},
      {"loss", {{"sim_kind", to_string(c.loss.sim_kind)}, {"alpha", c.loss.alpha}}},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"learning_rate", c.optimizer.learning_rate},
        {"batch_size", c.optimizer.batch_size},
        {"max_epochs", c.optimizer.max_epochs},
        {"patience", c.optimizer.patience}}},
      {"seed", c.seed},
      {"subset", c.subset},
      {"teacher_on_the_fly", c.teacher_on_the_fly},
      {"student_arch", c.student_arch},
      {"paths", {{"data", c.data_dir}, {"out", c.out_dir}}},
  };
}

namespace {

template <typename V>
void take(const json& j, const char* key, V& dst) {
  if (j.contains(key)) j.at(key).get_to(dst);
}

const std::set<std::string> kConfigKeys = {"split", "encoder", "embedding_dim", "hidden_dim", "use_metadata",
                                           "metadata", "loss", "optimizer", "seed", "subset",
                                           "teacher_on_the_fly", "student_arch", "paths"};

}  // namespace

void from_json(const json& j, RunConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    take(s, "train_folds", c.split.train_folds);
    take(s, "eval_fold", c.split.eval_fold);
    take(s, "holdout_fold", c.split.holdout_fold);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    take(e, "depth", c.encoder.depth);
    take(e, "filters_per_branch", c.encoder.filters_per_branch);
    take(e, "kernel_lengths", c.encoder.kernel_lengths);
    take(e, "bottleneck_channels", c.encoder.bottleneck_channels);
    take(e, "residual_every", c.encoder.residual_every);
    if (e.contains("padding")) {
      const auto p = e["padding"].get<std::string>();
      if (p != "zeros" && p != "circular") throw std::invalid_argument("padding must be 'zeros' or 'circular'");
      c.encoder.padding = p == "zeros" ? Padding::zeros : Padding::circular;
    }
  }
  take(j, "embedding_dim", c.embedding_dim);
  take(j, "hidden_dim", c.hidden_dim);
  take(j, "use_metadata", c.use_metadata);
  take(j, "metadata", c.metadata);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    if (l.contains("sim_kind")) c.loss.sim_kind = similarity_kind_from_string(l["sim_kind"].get<std::string>());
    take(l, "alpha", c.loss.alpha);
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    take(o, "kind", c.optimizer.kind);
    take(o, "learning_rate", c.optimizer.learning_rate);
    take(o, "batch_size", c.optimizer.batch_size);
    take(o, "max_epochs", c.optimizer.max_epochs);
    take(o, "patience", c.optimizer.patience);
  }
  take(j, "seed", c.seed);
  take(j, "subset", c.subset);
  take(j, "teacher_on_the_fly", c.teacher_on_the_fly);
  take(j, "student_arch", c.student_arch);
  if (j.contains("paths")) {
    take(j["paths"], "data", c.data_dir);
    take(j["paths"], "out", c.out_dir);
  }
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
  // FNV-1a over the purpose, then a splitmix64 finalizer
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : purpose) h = (h ^ ch) * 0x100000001b3ULL;
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_cls,train_sim,train_total,eval_macro_auc\n";
  for (const auto& e : log)
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g}\n", e.epoch, e.train_cls, e.train_sim, e.train_total,
                       e.eval_macro_auc);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding cache

namespace {
constexpr std::string_view kCacheMagic = "ECGEMB1";
}

std::optional<Eigen::Index> TeacherEmbeddingCache::find(std::int64_t ecg_id) const {
  auto it = std::lower_bound(record_ids.begin(), record_ids.end(), ecg_id);
  if (it == record_ids.end() || *it != ecg_id) return std::nullopt;
  return static_cast<Eigen::Index>(it - record_ids.begin());
}

std::string TeacherEmbeddingCache::to_bytes() const {
  if (static_cast<std::size_t>(matrix.rows()) != record_ids.size())
    throw ShapeError("embedding cache rows do not match its record ids");
  io::ByteWriter w;
  w.str(kCacheMagic);
  w.u32(static_cast<std::uint32_t>(matrix.rows()));
  w.u32(static_cast<std::uint32_t>(matrix.cols()));
  w.f32({matrix.data(), static_cast<std::size_t>(matrix.size())});
  const json manifest = {{"record_ids", record_ids}, {"teacher_hash", teacher_hash}, {"dim", matrix.cols()}};
  w.str(manifest.dump());
  return w.take();
}

TeacherEmbeddingCache TeacherEmbeddingCache::from_bytes(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kCacheMagic);
  const auto n = r.u32();
  const auto d = r.u32();
  TeacherEmbeddingCache c;
  c.matrix.resize(n, d);
  r.f32({c.matrix.data(), static_cast<std::size_t>(c.matrix.size())});
  const json manifest = json::parse(r.rest());
  manifest.at("record_ids").get_to(c.record_ids);
  manifest.at("teacher_hash").get_to(c.teacher_hash);
  if (c.record_ids.size() != n) throw std::runtime_error("embedding cache manifest lists a different record count");
  if (!std::is_sorted(c.record_ids.begin(), c.record_ids.end()) ||
      std::adjacent_find(c.record_ids.begin(), c.record_ids.end()) != c.record_ids.end())
    throw std::runtime_error("embedding cache record ids must be strictly ascending");
  return c;
}

void TeacherEmbeddingCache::save(const std::filesystem::path& path) const { io::write_file(path, to_bytes()); }

TeacherEmbeddingCache TeacherEmbeddingCache::load(const std::filesystem::path& path) {
  return from_bytes(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Batches

BatchBuilder::BatchBuilder(const std::vector<EcgRecord>& records, const LeadSubset& subset, int pad,
                           const MetadataEncoderConfig& metadata, bool use_metadata)
    : records_(records), subset_(subset), pad_(pad) {
  const int width = use_metadata ? metadata.length() : 0;
  meta_.resize(static_cast<Eigen::Index>(records.size()), width);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].n_leads() != kNumLeads)
      throw ShapeError(fmt::format("record {} has {} leads, expected 12", records[i].ecg_id, records[i].n_leads()));
    if (records[i].n_samples() != records.front().n_samples()) throw ShapeError("records differ in length");
    if (width == 0) continue;
    const auto v = soft_encode(records[i].patient, metadata);
    for (int k = 0; k < width; ++k) meta_(static_cast<Eigen::Index>(i), k) = static_cast<float>(v[k]);
  }
}

Sequence<float> BatchBuilder::signals(std::span<const std::size_t> idx) const {
  const int length = records_.front().n_samples();
  const auto& leads = subset_.indices();
  auto s = Sequence<float>::zeros(static_cast<int>(idx.size()), length, pad_, subset_.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& sig = records_[idx[b]].signal;
    for (std::size_t j = 0; j < leads.size(); ++j) {
      s.sample(static_cast<int>(b)).col(static_cast<Eigen::Index>(j)) = sig.row(leads[j]).transpose();
    }
  }
  return s;
}

Mat<float> BatchBuilder::metadata(std::span<const std::size_t> idx) const {
  Mat<float> m(static_cast<Eigen::Index>(idx.size()), meta_.cols());
  for (std::size_t b = 0; b < idx.size(); ++b) m.row(static_cast<Eigen::Index>(b)) = meta_.row(idx[b]);
  return m;
}

Mat<float> BatchBuilder::labels(std::span<const std::size_t> idx) const {
  Mat<float> y(static_cast<Eigen::Index>(idx.size()), kNumClasses);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    for (int c = 0; c < kNumClasses; ++c) y(static_cast<Eigen::Index>(b), c) = records_[idx[b]].label[c];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

constexpr std::size_t kEvalBatch = 64;

enum class Role { teacher, student, baseline };

const char* role_name(Role r) {
  switch (r) {
    case Role::teacher: return "teacher";
    case Role::student: return "student";
    case Role::baseline: return "baseline";
  }
  return "?";
}

std::vector<std::size_t> fold_indices(const std::vector<EcgRecord>& records, const std::function<bool(int)>& keep) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep(records[i].fold)) out.push_back(i);
  }
  return out;
}

EvalReport evaluate_indices(ModelBundle<float>& model, const BatchBuilder& batches, const std::vector<EcgRecord>& records,
                            const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("evaluation split is empty");
  Mat<double> scores(static_cast<Eigen::Index>(idx.size()), kNumClasses);
  Mat<double> labels(static_cast<Eigen::Index>(idx.size()), kNumClasses);
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(kEvalBatch, idx.size() - start));
    const auto out = model.forward(batches.signals(chunk), batches.metadata(chunk), Mode::eval);
    scores.middleRows(static_cast<Eigen::Index>(start), out.logits.rows()) = out.logits.cast<double>();
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) labels(static_cast<Eigen::Index>(i), c) = records[idx[i]].label[c];
  }
  std::vector<std::string> names(kClassNames.begin(), kClassNames.end());
  EvalReport report = macro_auc(scores, labels, names);
  report.subset = model.subset().name();
  return report;
}

// Source of v12 targets for a batch.
using TargetFn = std::function<Mat<float>(std::span<const std::size_t>)>;

TrainResult run_training(const RunConfig& config, const std::vector<EcgRecord>& records, ModelBundle<float>& model,
                         Role role, const TargetFn& targets, json extra_manifest, const EpochCallback& on_epoch) {
  const auto train_idx = fold_indices(records, [&](int f) { return config.split.is_train(f); });
  const auto eval_idx = fold_indices(records, [&](int f) { return f == config.split.eval_fold; });
  if (train_idx.empty()) throw std::invalid_argument("no records in the train folds");
  if (eval_idx.empty()) throw std::invalid_argument("no records in the eval fold");

  const BatchBuilder batches(records, model.subset(), model.encoder.required_pad(), config.metadata,
                             config.use_metadata);
  Adam<float> adam(config.optimizer.learning_rate);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, role == Role::teacher ? "teacher.shuffle" : "reduced.shuffle"));
  const std::string frozen_before = model.classifier.frozen ? state_hash(model.classifier_state()) : std::string();

  TrainResult result;
  EvalReport best_report = evaluate_indices(model, batches, records, eval_idx);
  StateDict best_model = model.state_dict();
  StateDict best_optim;
  long best_steps = 0;
  int best_epoch = 0;
  spdlog::info("{} subset {} seed {}: initial eval macro-AUC {:.4f}", role_name(role), config.subset, config.seed,
               best_report.macro_auc);

  std::vector<std::size_t> order = train_idx;
  const auto bs = static_cast<std::size_t>(config.optimizer.batch_size);
  for (int epoch = 1; epoch <= config.optimizer.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_cls = 0.0, sum_sim = 0.0, sum_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(bs, order.size() - start));
      model.zero_grad();
      const auto out = model.forward(batches.signals(batch), batches.metadata(batch), Mode::train);
      const Mat<float> y = batches.labels(batch);
      Mat<float> dlogits;
      LossTerms terms;
      if (targets) {
        Mat<float> dvx;
        terms = total_loss(out.logits, y, targets(batch), out.embedding, config.loss, &dlogits, &dvx);
        if (std::isfinite(terms.total)) model.backward(dlogits, &dvx);
      } else {
        terms.cls = classification_loss(out.logits, y, &dlogits);
        terms.total = terms.cls;
        if (std::isfinite(terms.total)) model.backward(dlogits);
      }
      if (!std::isfinite(terms.total))
        throw TrainingDivergence(fmt::format("{} training diverged at epoch {}, batch starting at {}: cls={} sim={}",
                                             role_name(role), epoch, start, terms.cls, terms.sim));
      adam.step(model);
      const auto w = static_cast<double>(batch.size());
      sum_cls += w * terms.cls;
      sum_sim += w * terms.sim;
      sum_total += w * terms.total;
    }
    const auto n = static_cast<double>(order.size());
    EpochLog entry{epoch, sum_cls / n, sum_sim / n, sum_total / n, 0.0};
    const EvalReport report = evaluate_indices(model, batches, records, eval_idx);
    entry.eval_macro_auc = report.macro_auc;
    result.log.push_back(entry);
    spdlog::info("{} subset {} seed {} epoch {}: cls {:.4f} sim {:.4f} total {:.4f} eval AUC {:.4f}", role_name(role),
                 config.subset, config.seed, epoch, entry.train_cls, entry.train_sim, entry.train_total,
                 entry.eval_macro_auc);
    if (on_epoch) on_epoch(entry);
    if (report.macro_auc > best_report.macro_auc) {
      best_report = report;
      best_model = model.state_dict();
      best_optim = adam.state();
      best_steps = adam.steps();
      best_epoch = epoch;
    } else if (epoch - best_epoch >= config.optimizer.patience) {
      spdlog::info("early stop after epoch {} (best epoch {})", epoch, best_epoch);
      break;
    }
  }

  if (model.classifier.frozen) {
    if (state_hash(model.classifier_state()) != frozen_before)
      throw FreezeViolation("frozen pseudo-classifier parameters changed during training");
  }

  model.load_state_dict(best_model);
  result.best_epoch = best_epoch;
  result.eval = best_report;
  result.eval.pseudo = role == Role::student || role == Role::teacher;
  result.checkpoint.model = std::move(best_model);
  result.checkpoint.optimizer = std::move(best_optim);
  json& m = result.checkpoint.manifest;
  m = std::move(extra_manifest);
  m["kind"] = role_name(role);
  m["config"] = config;
  m["config_hash"] = config.hash();
  m["seed"] = config.seed;
  m["subset"] = config.subset;
  m["epoch"] = best_epoch;
  m["epochs_run"] = static_cast<int>(result.log.size());
  m["best_metric"] = best_report.macro_auc;
  m["optimizer_steps"] = best_steps;
  m["classifier_hash"] = state_hash(model.classifier_state());
  return result;
}

}  // namespace

TrainResult train_teacher(const RunConfig& config, const std::vector<EcgRecord>& records, const EpochCallback& on_epoch) {
  config.validate();
  if (config.subset != 12) throw std::invalid_argument("the teacher is trained on all 12 leads (subset must be 12)");
  auto model = init_bundle<float>(config.bundle_config(), config.lead_subset(), derive_seed(config.seed, "teacher.init"));
  return run_training(config, records, model, Role::teacher, {}, json::object(), on_epoch);
}

TeacherEmbeddingCache export_teacher_embeddings(const Checkpoint& teacher, const std::vector<EcgRecord>& records) {
  const RunConfig config = checkpoint_config(teacher);
  auto model = bundle_from_checkpoint(teacher);
  if (model.subset().size() != 12) throw std::invalid_argument("embeddings must come from a 12-lead teacher");

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int f = records[i].fold;
    if (config.split.is_train(f) || f == config.split.eval_fold) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return records[a].ecg_id < records[b].ecg_id; });
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (records[idx[i]].ecg_id == records[idx[i - 1]].ecg_id)
      throw std::invalid_argument(fmt::format("duplicate ecg_id {}", records[idx[i]].ecg_id));
  }

  const BatchBuilder batches(records, model.subset(), model.encoder.required_pad(), config.metadata,
                             config.use_metadata);
  TeacherEmbeddingCache cache;
  cache.teacher_hash = teacher.content_hash();
  cache.matrix.resize(static_cast<Eigen::Index>(idx.size()), config.embedding_dim);
  for (std::size_t start = 0; start < idx.size(); start += kEvalBatch) {
    const std::span<const std::size_t> chunk(idx.data() + start, std::min(kEvalBatch, idx.size() - start));
    const Mat<float> emb = model.embed(batches.signals(chunk), batches.metadata(chunk), Mode::eval);
    cache.matrix.middleRows(static_cast<Eigen::Index>(start), emb.rows()) = emb;
  }
  for (auto i : idx) cache.record_ids.push_back(records[i].ecg_id);
  return cache;
}

TrainResult train_student(const RunConfig& config, const std::vector<EcgRecord>& records,
                          const TeacherEmbeddingCache* cache, const Checkpoint& teacher, const EpochCallback& on_epoch) {
  config.validate();
  if (config.subset == 12 || config.subset < 2) throw std::invalid_argument("student subset must be one of 2, 3, 4, 6");

  const RunConfig teacher_cfg = checkpoint_config(teacher);
  if (teacher_cfg.embedding_dim != config.embedding_dim)
    throw std::invalid_argument(fmt::format("teacher embedding dim {} differs from the student's {}",
                                            teacher_cfg.embedding_dim, config.embedding_dim));
  if (teacher_cfg.hidden_dim != config.hidden_dim)
    throw std::invalid_argument("teacher and student pseudo-classifier widths differ");

  auto model = init_bundle<float>(config.bundle_config(), config.lead_subset(), derive_seed(config.seed, "reduced.init"));
  model.load_classifier_state(teacher.model);
  model.classifier.frozen = true;

  json extra = {{"teacher_hash", teacher.content_hash()}};
  TargetFn targets;
  std::optional<ModelBundle<float>> live_teacher;
  std::optional<BatchBuilder> teacher_batches;
  std::vector<Eigen::Index> cache_row(records.size(), -1);
  if (config.teacher_on_the_fly) {
    live_teacher.emplace(bundle_from_checkpoint(teacher));
    teacher_batches.emplace(records, live_teacher->subset(), live_teacher->encoder.required_pad(), teacher_cfg.metadata,
                            teacher_cfg.use_metadata);
    targets = [&](std::span<const std::size_t> batch) {
      return live_teacher->embed(teacher_batches->signals(batch), teacher_batches->metadata(batch), Mode::eval);
    };
    extra["targets"] = "on_the_fly";
  } else {
    if (cache == nullptr) throw std::invalid_argument("student training needs a teacher embedding cache");
    if (cache->dim() != config.embedding_dim)
      throw std::invalid_argument(
          fmt::format("embedding cache dim {} differs from embedding_dim {}", cache->dim(), config.embedding_dim));
    if (cache->teacher_hash != teacher.content_hash())
      spdlog::warn("embedding cache was exported from a different teacher checkpoint");
    std::size_t missing = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!config.split.is_train(records[i].fold)) continue;
      if (auto row = cache->find(records[i].ecg_id)) cache_row[i] = *row;
      else ++missing;
    }
    if (missing > 0)
      throw std::invalid_argument(fmt::format("embedding cache lacks rows for {} training records", missing));
    targets = [&](std::span<const std::size_t> batch) {
      Mat<float> v(static_cast<Eigen::Index>(batch.size()), cache->dim());
      for (std::size_t b = 0; b < batch.size(); ++b) v.row(static_cast<Eigen::Index>(b)) = cache->matrix.row(cache_row[batch[b]]);
      return v;
    };
    extra["targets"] = "cache";
    extra["cache_teacher_hash"] = cache->teacher_hash;
  }
  return run_training(config, records, model, Role::student, targets, std::move(extra), on_epoch);
}

TrainResult train_baseline(const RunConfig& config, const std::vector<EcgRecord>& records, const EpochCallback& on_epoch) {
  config.validate();
  if (config.subset == 12 || config.subset < 2) throw std::invalid_argument("baseline subset must be one of 2, 3, 4, 6");
  auto model = init_bundle<float>(config.bundle_config(), config.lead_subset(), derive_seed(config.seed, "reduced.init"));
  return run_training(config, records, model, Role::baseline, {}, json::object(), on_epoch);
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  if (!ckpt.manifest.contains("config")) throw std::invalid_argument("checkpoint manifest has no config");
  RunConfig c;
  from_json(ckpt.manifest.at("config"), c);
  return c;
}

ModelBundle<float> bundle_from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig c = checkpoint_config(ckpt);
  ModelBundle<float> model(c.bundle_config(), c.lead_subset());
  model.load_state_dict(ckpt.model);
  model.classifier.frozen = ckpt.manifest.value("kind", "") == "student";
  return model;
}

EvalReport evaluate(ModelBundle<float>& model, const RunConfig& config, const std::vector<EcgRecord>& records, int fold) {
  const BatchBuilder batches(records, model.subset(), model.encoder.required_pad(), config.metadata,
                             config.use_metadata);
  return evaluate_indices(model, batches, records, fold_indices(records, [&](int f) { return f == fold; }));
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<EcgRecord>& records, int fold) {
  auto model = bundle_from_checkpoint(ckpt);
  EvalReport r = evaluate(model, checkpoint_config(ckpt), records, fold);
  const auto kind = ckpt.manifest.value("kind", "");
  r.pseudo = kind == "student" || kind == "teacher";
  return r;
}

}  // namespace ecgcl
