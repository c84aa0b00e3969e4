#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ecgcl {

inline constexpr int kNumLeads = 12;
inline constexpr std::array<std::string_view, kNumLeads> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

/// A named selection of rows from the canonical 12-lead order.
class LeadSubset {
 public:
  /// Reduced-lead sets of the PhysioNet/CinC 2021 convention.
  static LeadSubset standard(int size);
  /// Custom membership; indices must be strictly increasing in 0..11.
  static LeadSubset custom(std::vector<int> indices);
  static LeadSubset from_names(const std::vector<std::string>& names);

  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<int>& indices() const { return indices_; }
  std::string name() const { return std::to_string(size()); }
  std::vector<std::string> lead_names() const;

  bool operator==(const LeadSubset&) const = default;

 private:
  explicit LeadSubset(std::vector<int> indices) : indices_(std::move(indices)) {}
  std::vector<int> indices_;
};

int lead_index(std::string_view name);

}  // namespace ecgcl
