#include "ecgcl/leads.hpp"

#include <algorithm>
#include <stdexcept>

namespace ecgcl {

LeadSubset LeadSubset::standard(int size) {
  switch (size) {
    case 12: return LeadSubset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    case 6: return LeadSubset({0, 1, 2, 3, 4, 5});
    case 4: return LeadSubset({0, 1, 2, 7});
    case 3: return LeadSubset({0, 1, 7});
    case 2: return LeadSubset({0, 1});
    default: throw std::invalid_argument("no standard lead subset of size " + std::to_string(size));
  }
}

LeadSubset LeadSubset::custom(std::vector<int> indices) {
  if (indices.empty()) throw std::invalid_argument("lead subset must not be empty");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= kNumLeads)
      throw std::invalid_argument("lead index out of range: " + std::to_string(indices[i]));
    if (i > 0 && indices[i] <= indices[i - 1])
      throw std::invalid_argument("lead indices must be strictly increasing");
  }
  return LeadSubset(std::move(indices));
}

LeadSubset LeadSubset::from_names(const std::vector<std::string>& names) {
  std::vector<int> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(lead_index(n));
  std::sort(idx.begin(), idx.end());
  return custom(std::move(idx));
}

std::vector<std::string> LeadSubset::lead_names() const {
  std::vector<std::string> out;
  for (int i : indices_) out.emplace_back(kLeadNames[i]);
  return out;
}

int lead_index(std::string_view name) {
  for (int i = 0; i < kNumLeads; ++i) {
    if (kLeadNames[i] == name) return i;
  }
  throw std::invalid_argument("unknown lead name: " + std::string(name));
}

}  // namespace ecgcl
