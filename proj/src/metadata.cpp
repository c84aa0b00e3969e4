#include "ecgcl/metadata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace ecgcl {

SoftBins SoftBins::uniform(double lo, double hi, int bins, double sigma, double clamp_lo, double clamp_hi) {
  SoftBins b;
  b.sigma = sigma;
  b.clamp_lo = clamp_lo;
  b.clamp_hi = clamp_hi;
  for (int i = 0; i <= bins; ++i) b.edges.push_back(lo + (hi - lo) * i / bins);
  return b;
}

std::vector<double> SoftBins::centers() const {
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c.push_back(0.5 * (edges[i] + edges[i + 1]));
  return c;
}

void SoftBins::validate(const char* what) const {
  if (edges.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument(std::string(what) + ": bin edges must increase");
  }
  if (!(sigma > 0)) throw std::invalid_argument(std::string(what) + ": sigma must be > 0");
  if (!(clamp_hi > clamp_lo)) throw std::invalid_argument(std::string(what) + ": invalid clamp range");
}

int MetadataEncoderConfig::length() const {
  return age.bins() + 2 + height.bins() + weight.bins() + (include_missing_flag ? 4 : 0);
}

void MetadataEncoderConfig::validate() const {
  age.validate("age");
  height.validate("height");
  weight.validate("weight");
}

std::vector<double> soft_bin_weights(double value, const SoftBins& bins) {
  const double v = std::clamp(value, bins.clamp_lo, bins.clamp_hi);
  const auto centers = bins.centers();
  std::vector<double> w(centers.size());
  // shift by the smallest exponent so the nearest bin never underflows
  double min_e = INFINITY;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = v - centers[k];
    w[k] = d * d / (2.0 * bins.sigma * bins.sigma);
    min_e = std::min(min_e, w[k]);
  }
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(-(x - min_e));
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

namespace {

std::optional<double> finite_or_missing(const std::optional<double>& v, const char* what) {
  if (v && !std::isfinite(*v)) {
    spdlog::warn("non-finite {} treated as missing", what);
    return std::nullopt;
  }
  return v;
}

}  // namespace

std::vector<double> soft_encode(const PatientInfo& info, const MetadataEncoderConfig& config) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(config.length()));
  std::vector<double> flags;

  auto numeric = [&](const std::optional<double>& raw, const SoftBins& bins, const char* what) {
    const auto v = finite_or_missing(raw, what);
    if (v) {
      const auto w = soft_bin_weights(*v, bins);
      out.insert(out.end(), w.begin(), w.end());
    } else {
      out.insert(out.end(), static_cast<std::size_t>(bins.bins()), 0.0);
    }
    flags.push_back(v ? 0.0 : 1.0);
  };

  numeric(info.age, config.age, "age");
  out.push_back(info.sex == Sex::male ? 1.0 : 0.0);
  out.push_back(info.sex == Sex::female ? 1.0 : 0.0);
  flags.push_back(info.sex ? 0.0 : 1.0);
  numeric(info.height, config.height, "height");
  numeric(info.weight, config.weight, "weight");
  if (config.include_missing_flag) out.insert(out.end(), flags.begin(), flags.end());
  return out;
}

void to_json(nlohmann::json& j, const SoftBins& b) {
  j = {{"edges", b.edges}, {"sigma", b.sigma}, {"clamp", {b.clamp_lo, b.clamp_hi}}};
}

void from_json(const nlohmann::json& j, SoftBins& b) {
  j.at("edges").get_to(b.edges);
  j.at("sigma").get_to(b.sigma);
  b.clamp_lo = j.at("clamp").at(0).get<double>();
  b.clamp_hi = j.at("clamp").at(1).get<double>();
}

void to_json(nlohmann::json& j, const MetadataEncoderConfig& c) {
  j = {{"age", c.age}, {"height", c.height}, {"weight", c.weight}, {"include_missing_flag", c.include_missing_flag}};
}

void from_json(const nlohmann::json& j, MetadataEncoderConfig& c) {
  if (j.contains("age")) j.at("age").get_to(c.age);
  if (j.contains("height")) j.at("height").get_to(c.height);
  if (j.contains("weight")) j.at("weight").get_to(c.weight);
  if (j.contains("include_missing_flag")) j.at("include_missing_flag").get_to(c.include_missing_flag);
}

}  // namespace ecgcl
