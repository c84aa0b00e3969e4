#include "ecgcl/wfdb.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ecgcl::wfdb {

static_assert(std::endian::native == std::endian::little, "format-16 I/O assumes a little-endian host");

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

// "1000.0(0)/mV" -> gain 1000, baseline 0, units mV
void parse_gain(const std::string& tok, SignalSpec& s, bool& has_baseline) {
  std::string g = tok;
  if (auto slash = g.find('/'); slash != std::string::npos) {
    s.units = g.substr(slash + 1);
    g = g.substr(0, slash);
  }
  if (auto paren = g.find('('); paren != std::string::npos) {
    const auto close = g.find(')', paren);
    if (close == std::string::npos) throw std::runtime_error("wfdb: malformed gain field '" + tok + "'");
    s.baseline = std::stoi(g.substr(paren + 1, close - paren - 1));
    has_baseline = true;
    g = g.substr(0, paren);
  }
  s.gain = std::stod(g);
  if (s.gain == 0.0) s.gain = 200.0;
}

}  // namespace

Header parse_header(const std::string& text) {
  std::istringstream is(text);
  Header h;
  bool have_record_line = false;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tok = tokens(line);
    if (tok.empty()) continue;
    if (!have_record_line) {
      have_record_line = true;
      h.record_name = tok[0];
      if (tok[0].find('/') != std::string::npos) throw std::runtime_error("wfdb: multi-segment records unsupported");
      if (tok.size() < 2) throw std::runtime_error("wfdb: record line lacks signal count");
      h.n_signals = std::stoi(tok[1]);
      if (tok.size() > 2) h.sampling_frequency = std::stod(tok[2].substr(0, tok[2].find_first_of("/(")));
      if (tok.size() > 3) h.n_samples = std::stol(tok[3]);
      continue;
    }
    SignalSpec s;
    s.file_name = tok.at(0);
    if (tok.size() < 2) throw std::runtime_error("wfdb: signal line lacks format");
    s.format = std::stoi(tok[1].substr(0, tok[1].find_first_of("x:+")));
    if (tok[1].find_first_of("x:+") != std::string::npos)
      throw std::runtime_error("wfdb: sample multipliers, skews and byte offsets are unsupported");
    bool has_baseline = false;
    if (tok.size() > 2) parse_gain(tok[2], s, has_baseline);
    // adc_zero is tok[4]; it doubles as the baseline when none is given
    if (!has_baseline && tok.size() > 4) s.baseline = std::stoi(tok[4]);
    if (tok.size() > 8) {
      std::string desc;
      for (std::size_t i = 8; i < tok.size(); ++i) desc += (i > 8 ? " " : "") + tok[i];
      s.description = desc;
    }
    h.signals.push_back(s);
  }
  if (!have_record_line) throw std::runtime_error("wfdb: empty header");
  if (static_cast<int>(h.signals.size()) != h.n_signals)
    throw std::runtime_error("wfdb: header declares " + std::to_string(h.n_signals) + " signals but lists " +
                             std::to_string(h.signals.size()));
  return h;
}

Mat<float> read_record(const std::filesystem::path& record_base, Header* header_out) {
  auto hea = record_base;
  hea += ".hea";
  std::ifstream hin(hea);
  if (!hin) throw std::runtime_error("wfdb: cannot open " + hea.string());
  std::ostringstream ss;
  ss << hin.rdbuf();
  const Header h = parse_header(ss.str());

  // signals sharing a file are interleaved frame by frame
  std::map<std::string, std::vector<int>> by_file;
  std::vector<std::string> file_order;
  for (int i = 0; i < h.n_signals; ++i) {
    if (h.signals[i].format != 16)
      throw std::runtime_error("wfdb: unsupported format " + std::to_string(h.signals[i].format));
    auto& group = by_file[h.signals[i].file_name];
    if (group.empty()) file_order.push_back(h.signals[i].file_name);
    group.push_back(i);
  }

  Mat<float> out(h.n_signals, h.n_samples);
  const auto dir = record_base.parent_path();
  for (const auto& fname : file_order) {
    const auto& group = by_file[fname];
    std::ifstream din(dir / fname, std::ios::binary);
    if (!din) throw std::runtime_error("wfdb: cannot open " + (dir / fname).string());
    const std::size_t frame = group.size();
    std::vector<std::int16_t> raw(frame * static_cast<std::size_t>(h.n_samples));
    din.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::int16_t)));
    if (static_cast<std::size_t>(din.gcount()) != raw.size() * sizeof(std::int16_t))
      throw std::runtime_error("wfdb: " + fname + " is shorter than the header's sample count");
    for (long t = 0; t < h.n_samples; ++t) {
      for (std::size_t j = 0; j < frame; ++j) {
        const int sig = group[j];
        const std::int16_t d = raw[static_cast<std::size_t>(t) * frame + j];
        if (d == -32768) throw std::runtime_error("wfdb: invalid sample in " + fname);
        out(sig, t) = static_cast<float>((static_cast<double>(d) - h.signals[sig].baseline) / h.signals[sig].gain);
      }
    }
  }
  if (header_out) *header_out = h;
  return out;
}

void write_record(const std::filesystem::path& record_base, const Mat<float>& physical, double sampling_frequency,
                  double gain, const std::vector<std::string>& descriptions) {
  const std::string name = record_base.filename().string();
  std::filesystem::create_directories(record_base.parent_path());
  std::vector<std::int16_t> raw(static_cast<std::size_t>(physical.size()));
  for (Eigen::Index t = 0; t < physical.cols(); ++t) {
    for (Eigen::Index s = 0; s < physical.rows(); ++s) {
      const double d = std::round(static_cast<double>(physical(s, t)) * gain);
      if (d < -32767 || d > 32767) throw std::runtime_error("wfdb: sample out of 16-bit range");
      raw[static_cast<std::size_t>(t * physical.rows() + s)] = static_cast<std::int16_t>(d);
    }
  }
  auto dat = record_base;
  dat += ".dat";
  std::ofstream dout(dat, std::ios::binary);
  dout.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::int16_t)));

  auto hea = record_base;
  hea += ".hea";
  std::ofstream hout(hea);
  hout << name << ' ' << physical.rows() << ' ' << sampling_frequency << ' ' << physical.cols() << '\n';
  for (Eigen::Index s = 0; s < physical.rows(); ++s) {
    hout << name << ".dat 16 " << gain << "(0)/mV 16 0 "
         << raw[static_cast<std::size_t>(s)] << " 0 0 "
         << (static_cast<std::size_t>(s) < descriptions.size() ? descriptions[s] : "") << '\n';
  }
}

}  // namespace ecgcl::wfdb
