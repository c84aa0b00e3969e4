#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecgcl/checkpoint.hpp"
#include "ecgcl/dataset.hpp"
#include "ecgcl/loss.hpp"
#include "ecgcl/metadata.hpp"
#include "ecgcl/metrics.hpp"
#include "ecgcl/model.hpp"

namespace ecgcl {

struct OptimizerConfig {
  std::string kind = "adam";
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 50;
  int patience = 10;

  void validate() const;
};

/// Everything that defines a run. The hash covers every field except the
/// data/output paths, so moving a run directory does not change its identity.
struct RunConfig {
  SplitSpec split;
  EncoderConfig encoder;  // input_leads is overridden by the subset
  int embedding_dim = 128;
  int hidden_dim = 64;
  bool use_metadata = true;
  MetadataEncoderConfig metadata;
  LossConfig loss;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  int subset = 12;
  bool teacher_on_the_fly = false;
  std::string student_arch = "inception";  // reserved; no other encoder yet
  std::string data_dir;
  std::string out_dir;

  void validate() const;
  LeadSubset lead_subset() const { return LeadSubset::standard(subset); }
  BundleConfig bundle_config() const;
  std::string hash() const;
};

/// Small CPU configuration used by the synthetic acceptance runs.
RunConfig desk_config();

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their current value, so a partial document overrides defaults.
void from_json(const nlohmann::json& j, RunConfig& c);

/// Independent stream for one purpose (init, shuffling, ...) of a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose);

class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FreezeViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct EpochLog {
  int epoch = 0;
  double train_cls = 0.0;
  double train_sim = 0.0;
  double train_total = 0.0;
  double eval_macro_auc = 0.0;
};

std::string training_log_csv(const std::vector<EpochLog>& log);

struct TrainResult {
  Checkpoint checkpoint;  // best-eval state
  std::vector<EpochLog> log;
  EvalReport eval;        // of the returned state
  int best_epoch = 0;
};

/// Teacher embeddings v12 for train and eval records, rows in ascending ecg_id.
struct TeacherEmbeddingCache {
  Mat<float> matrix;  // [n x d]
  std::vector<std::int64_t> record_ids;
  std::string teacher_hash;

  int dim() const { return static_cast<int>(matrix.cols()); }
  std::optional<Eigen::Index> find(std::int64_t ecg_id) const;

  std::string to_bytes() const;
  static TeacherEmbeddingCache from_bytes(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TeacherEmbeddingCache load(const std::filesystem::path& path);
};

/// Called after each epoch; used for progress output.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Records must be 12-lead and already normalized. Step 1: 12-lead model, BCE only.
TrainResult train_teacher(const RunConfig& config, const std::vector<EcgRecord>& records,
                          const EpochCallback& on_epoch = {});

TeacherEmbeddingCache export_teacher_embeddings(const Checkpoint& teacher, const std::vector<EcgRecord>& records);

/// Step 2: fresh encoder and projection, teacher classifier copied and frozen,
/// loss = BCE + alpha * sim(v12, vx). `cache` may be null only when
/// config.teacher_on_the_fly is set.
TrainResult train_student(const RunConfig& config, const std::vector<EcgRecord>& records,
                          const TeacherEmbeddingCache* cache, const Checkpoint& teacher,
                          const EpochCallback& on_epoch = {});

/// "pseudo = False": reduced-lead model trained end to end with BCE only.
TrainResult train_baseline(const RunConfig& config, const std::vector<EcgRecord>& records,
                           const EpochCallback& on_epoch = {});

RunConfig checkpoint_config(const Checkpoint& ckpt);
ModelBundle<float> bundle_from_checkpoint(const Checkpoint& ckpt);

/// Eval-mode macro AUC of `model` on the records of `fold`.
EvalReport evaluate(ModelBundle<float>& model, const RunConfig& config, const std::vector<EcgRecord>& records,
                    int fold);
EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<EcgRecord>& records, int fold);

/// Assembles model inputs for a lead subset: channels-last padded signals,
/// encoded metadata and label rows.
class BatchBuilder {
 public:
  BatchBuilder(const std::vector<EcgRecord>& records, const LeadSubset& subset, int pad,
               const MetadataEncoderConfig& metadata, bool use_metadata);

  Sequence<float> signals(std::span<const std::size_t> idx) const;
  Mat<float> metadata(std::span<const std::size_t> idx) const;
  Mat<float> labels(std::span<const std::size_t> idx) const;

 private:
  const std::vector<EcgRecord>& records_;
  LeadSubset subset_;
  int pad_;
  Mat<float> meta_;  // [n_records x metadata_dim]
};

}  // namespace ecgcl
