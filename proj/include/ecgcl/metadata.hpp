#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ecgcl {

enum class Sex { male, female };

/// Gaussian soft binning of one scalar attribute.
struct SoftBins {
  std::vector<double> edges;  // strictly increasing; bins = edges.size() - 1
  double sigma = 1.0;
  double clamp_lo = 0.0;
  double clamp_hi = 0.0;

  static SoftBins uniform(double lo, double hi, int bins, double sigma, double clamp_lo, double clamp_hi);

  int bins() const { return static_cast<int>(edges.size()) - 1; }
  std::vector<double> centers() const;
  void validate(const char* what) const;
};

struct MetadataEncoderConfig {
  SoftBins age = SoftBins::uniform(0, 100, 10, 10.0, 0, 120);
  SoftBins height = SoftBins::uniform(140, 200, 10, 6.0, 50, 250);
  SoftBins weight = SoftBins::uniform(40, 140, 10, 10.0, 20, 300);
  bool include_missing_flag = true;

  /// age bins, sex one-hot (male, female), height bins, weight bins, then
  /// missing flags (age, sex, height, weight) when enabled.
  int length() const;
  void validate() const;
};

struct PatientInfo {
  std::optional<double> age;
  std::optional<Sex> sex;
  std::optional<double> height;
  std::optional<double> weight;
};

/// Stateless soft-label encoding of patient metadata.
std::vector<double> soft_encode(const PatientInfo& info, const MetadataEncoderConfig& config);

/// Normalized Gaussian weights of `value` over the bin centers (after clamping).
std::vector<double> soft_bin_weights(double value, const SoftBins& bins);

void to_json(nlohmann::json& j, const SoftBins& b);
void from_json(const nlohmann::json& j, SoftBins& b);
void to_json(nlohmann::json& j, const MetadataEncoderConfig& c);
void from_json(const nlohmann::json& j, MetadataEncoderConfig& c);

}  // namespace ecgcl
