#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ecgcl/tensor.hpp"

namespace ecgcl::wfdb {

struct SignalSpec {
  std::string file_name;
  int format = 16;
  double gain = 200.0;
  int baseline = 0;
  std::string units = "mV";
  std::string description;
};

struct Header {
  std::string record_name;
  int n_signals = 0;
  double sampling_frequency = 250.0;
  long n_samples = 0;
  std::vector<SignalSpec> signals;
};

Header parse_header(const std::string& text);

/// Reads `<record>.hea` and its format-16 sample file(s) and returns
/// physical values [signals x samples]: (digital - baseline) / gain.
Mat<float> read_record(const std::filesystem::path& record_base, Header* header_out = nullptr);

/// Writes a format-16 record (single .dat, interleaved) with the given gain.
/// Used for fixtures and tests.
void write_record(const std::filesystem::path& record_base, const Mat<float>& physical, double sampling_frequency,
                  double gain, const std::vector<std::string>& descriptions);

}  // namespace ecgcl::wfdb
