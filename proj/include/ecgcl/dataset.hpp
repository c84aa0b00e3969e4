#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ecgcl/leads.hpp"
#include "ecgcl/metadata.hpp"
#include "ecgcl/tensor.hpp"

namespace ecgcl {

inline constexpr int kNumClasses = 5;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"NORM", "MI", "STTC", "CD", "HYP"};
inline constexpr double kRecordSeconds = 10.0;

using Label = std::array<std::uint8_t, kNumClasses>;

/// One 10-second ECG with patient metadata and its super-diagnostic label.
struct EcgRecord {
  std::int64_t ecg_id = 0;
  Mat<float> signal;  // [leads x samples], mV
  double sampling_rate = 100.0;
  PatientInfo patient;
  Label label{};
  int fold = 1;
  std::map<std::string, double> scp_codes;  // raw codes; empty for synthetic records

  int n_leads() const { return static_cast<int>(signal.rows()); }
  int n_samples() const { return static_cast<int>(signal.cols()); }
};

class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitSpec {
  std::set<int> train_folds = {1, 2, 3, 4, 5, 6, 7, 8};
  int eval_fold = 9;
  int holdout_fold = 10;

  void validate() const;
  bool is_train(int fold) const { return train_folds.count(fold) > 0; }
};

/// Diagnostic code -> superclass index, from scp_statements.csv.
class ScpStatements {
 public:
  static ScpStatements load(const std::filesystem::path& csv_path);
  static ScpStatements from_map(std::map<std::string, std::optional<int>> codes);

  bool known(const std::string& code) const { return codes_.count(code) > 0; }
  /// Superclass of a diagnostic code; nullopt for rhythm/form statements.
  std::optional<int> superclass(const std::string& code) const;

 private:
  std::map<std::string, std::optional<int>> codes_;
};

/// Parses PTB-XL's serialized dict, e.g. "{'NORM': 100.0, 'SR': 0.0}".
std::map<std::string, double> parse_scp_codes(std::string_view text);

/// Multi-hot superclass label. Codes with likelihood below `min_likelihood`
/// and non-diagnostic codes are ignored; unknown codes are ignored with a warning.
Label aggregate_superclasses(const std::map<std::string, double>& scp_codes, const ScpStatements& statements,
                             double min_likelihood = 0.0);

struct IngestionReport {
  std::size_t database_rows = 0;
  std::size_t loaded = 0;
  std::size_t excluded_no_superclass = 0;
  std::size_t skipped_corrupt = 0;
  std::set<std::string> unknown_codes;
};

struct LoadOptions {
  double sampling_rate = 100.0;
  double min_likelihood = 0.0;
  std::size_t max_records = 0;  // 0 = all
};

/// Reads ptbxl_database.csv, scp_statements.csv and the WFDB records.
/// Returns records sorted by ecg_id.
std::vector<EcgRecord> load_ptbxl(const std::filesystem::path& data_dir, const LoadOptions& options,
                                  IngestionReport* report = nullptr);

/// Rows of the 12-lead signal at `subset`, order preserved.
EcgRecord select_leads(const EcgRecord& record, const LeadSubset& subset);

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

NormalizationStats fit_normalizer(const std::vector<EcgRecord>& records, const SplitSpec& split);
EcgRecord apply_normalizer(const EcgRecord& record, const NormalizationStats& stats);
EcgRecord invert_normalizer(const EcgRecord& record, const NormalizationStats& stats);
/// Fits on the train folds and normalizes every record in place.
NormalizationStats normalize_corpus(std::vector<EcgRecord>& records, const SplitSpec& split);

/// Deterministic desk-scale corpus: class components at class-specific
/// frequencies, strong on leads outside {I, II, V2} and attenuated plus extra
/// noise on I, II and V2.
struct SyntheticOptions {
  double weak_class_gain = 0.4;  // coupling of class components into I, II, V2
  double base_noise = 0.05;
  double weak_extra_noise = 0.1;
  double label_rate = 0.3;
  // Per-bit flip probability of the recorded label on folds below
  // clean_from_fold; later folds keep the true label (as in PTB-XL, where
  // folds 9 and 10 were validated by a cardiologist).
  double label_noise = 0.1;
  int clean_from_fold = 9;
};
std::vector<EcgRecord> make_synthetic_corpus(int n_records, std::uint64_t seed, const SyntheticOptions& opt = {});

/// Class frequencies used by the synthetic generator (Hz).
std::array<double, kNumClasses> synthetic_class_frequencies();

/// On-disk corpus: signals.bin (float32 tensor) + manifest.csv + info.json.
struct CorpusInfo {
  std::string source;
  bool normalized = false;
  std::optional<NormalizationStats> stats;
};

void save_corpus(const std::filesystem::path& dir, const std::vector<EcgRecord>& records, const CorpusInfo& info);
std::vector<EcgRecord> load_corpus(const std::filesystem::path& dir, CorpusInfo* info = nullptr);

}  // namespace ecgcl
