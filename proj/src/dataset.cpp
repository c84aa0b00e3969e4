#include "ecgcl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ecgcl/csv.hpp"
#include "ecgcl/io.hpp"
#include "ecgcl/wfdb.hpp"

namespace fs = std::filesystem;

namespace ecgcl {

void SplitSpec::validate() const {
  if (train_folds.empty()) throw std::invalid_argument("split has no train folds");
  auto in_range = [](int f) { return f >= 1 && f <= 10; };
  for (int f : train_folds) {
    if (!in_range(f)) throw std::invalid_argument("fold out of range: " + std::to_string(f));
  }
  if (!in_range(eval_fold) || !in_range(holdout_fold)) throw std::invalid_argument("fold out of range");
  if (train_folds.count(eval_fold) || train_folds.count(holdout_fold) || eval_fold == holdout_fold)
    throw std::invalid_argument("train, eval and holdout folds must be disjoint");
}

// ---------------------------------------------------------------------------
// SCP statements

namespace {

std::optional<int> class_index(std::string_view name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (kClassNames[c] == name) return c;
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::optional<double> parse_optional(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty() || s == "nan" || s == "NaN") return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

ScpStatements ScpStatements::load(const fs::path& csv_path) {
  const auto table = csv::read(csv_path);
  if (table.header.empty()) throw IngestionError("empty scp_statements table: " + csv_path.string());
  const std::size_t cls_col = table.column("diagnostic_class");
  const bool has_diag = table.has_column("diagnostic");
  const std::size_t diag_col = has_diag ? table.column("diagnostic") : 0;
  std::map<std::string, std::optional<int>> codes;
  for (const auto& row : table.rows) {
    const std::string code = trim(row[0]);
    std::optional<int> cls;
    const bool diagnostic = !has_diag || parse_optional(row[diag_col]).value_or(0.0) == 1.0;
    if (diagnostic) cls = class_index(trim(row[cls_col]));
    codes[code] = cls;
  }
  return from_map(std::move(codes));
}

ScpStatements ScpStatements::from_map(std::map<std::string, std::optional<int>> codes) {
  ScpStatements s;
  s.codes_ = std::move(codes);
  return s;
}

std::optional<int> ScpStatements::superclass(const std::string& code) const {
  auto it = codes_.find(code);
  return it == codes_.end() ? std::nullopt : it->second;
}

std::map<std::string, double> parse_scp_codes(std::string_view text) {
  std::map<std::string, double> out;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  auto fail = [&](const char* what) {
    return std::runtime_error(fmt::format("malformed scp_codes '{}': {}", text, what));
  };
  skip_ws();
  if (i >= text.size() || text[i] != '{') throw fail("expected '{'");
  ++i;
  skip_ws();
  if (i < text.size() && text[i] == '}') return out;
  while (true) {
    skip_ws();
    if (i >= text.size() || (text[i] != '\'' && text[i] != '"')) throw fail("expected quoted code");
    const char q = text[i++];
    const std::size_t end = text.find(q, i);
    if (end == std::string_view::npos) throw fail("unterminated code");
    std::string key(text.substr(i, end - i));
    i = end + 1;
    skip_ws();
    if (i >= text.size() || text[i] != ':') throw fail("expected ':'");
    ++i;
    skip_ws();
    const std::size_t num_end = text.find_first_of(",}", i);
    if (num_end == std::string_view::npos) throw fail("unterminated value");
    const auto value = parse_optional(std::string(text.substr(i, num_end - i)));
    if (!value) throw fail("bad likelihood");
    out[key] = *value;
    i = num_end;
    if (text[i] == '}') break;
    ++i;
  }
  return out;
}

Label aggregate_superclasses(const std::map<std::string, double>& scp_codes, const ScpStatements& statements,
                             double min_likelihood) {
  Label label{};
  for (const auto& [code, likelihood] : scp_codes) {
    if (!statements.known(code)) {
      spdlog::warn("unknown SCP code '{}' ignored", code);
      continue;
    }
    if (likelihood < min_likelihood) continue;
    if (auto cls = statements.superclass(code)) label[*cls] = 1;
  }
  return label;
}

// ---------------------------------------------------------------------------
// PTB-XL ingestion

std::vector<EcgRecord> load_ptbxl(const fs::path& data_dir, const LoadOptions& options, IngestionReport* report) {
  const fs::path db_path = data_dir / "ptbxl_database.csv";
  const fs::path st_path = data_dir / "scp_statements.csv";
  for (const auto& p : {db_path, st_path}) {
    if (!fs::is_regular_file(p)) throw IngestionError("missing PTB-XL file: " + p.string());
  }
  const int expected_samples = static_cast<int>(std::lround(options.sampling_rate * kRecordSeconds));
  const char* file_column = nullptr;
  if (options.sampling_rate == 100.0) {
    file_column = "filename_lr";
  } else if (options.sampling_rate == 500.0) {
    file_column = "filename_hr";
  } else {
    throw IngestionError(fmt::format("unsupported sampling rate {} (PTB-XL ships 100 and 500 Hz)", options.sampling_rate));
  }

  const auto statements = ScpStatements::load(st_path);
  csv::Table db;
  std::size_t c_id, c_codes, c_age, c_sex, c_height, c_weight, c_fold, c_file;
  try {
    db = csv::read(db_path);
    c_id = db.column("ecg_id");
    c_codes = db.column("scp_codes");
    c_age = db.column("age");
    c_sex = db.column("sex");
    c_height = db.column("height");
    c_weight = db.column("weight");
    c_fold = db.column("strat_fold");
    c_file = db.column(file_column);
  } catch (const std::runtime_error& e) {
    throw IngestionError(std::string("cannot read ptbxl_database.csv: ") + e.what());
  }

  IngestionReport rep;
  rep.database_rows = db.rows.size();
  std::vector<EcgRecord> records;
  for (const auto& row : db.rows) {
    if (options.max_records && records.size() >= options.max_records) break;
    EcgRecord r;
    r.sampling_rate = options.sampling_rate;
    try {
      r.ecg_id = static_cast<std::int64_t>(std::stod(row[c_id]));
      r.fold = static_cast<int>(std::stod(row[c_fold]));
      r.scp_codes = parse_scp_codes(row[c_codes]);
    } catch (const std::exception& e) {
      spdlog::warn("skipping malformed database row (ecg_id '{}'): {}", row[c_id], e.what());
      ++rep.skipped_corrupt;
      continue;
    }
    for (const auto& [code, _] : r.scp_codes) {
      if (!statements.known(code)) rep.unknown_codes.insert(code);
    }
    r.label = aggregate_superclasses(r.scp_codes, statements, options.min_likelihood);
    if (std::none_of(r.label.begin(), r.label.end(), [](auto v) { return v != 0; })) {
      ++rep.excluded_no_superclass;
      continue;
    }
    r.patient.age = parse_optional(row[c_age]);
    if (auto sex = parse_optional(row[c_sex])) r.patient.sex = *sex == 0.0 ? Sex::male : Sex::female;
    r.patient.height = parse_optional(row[c_height]);
    r.patient.weight = parse_optional(row[c_weight]);
    try {
      r.signal = wfdb::read_record(data_dir / trim(row[c_file]));
    } catch (const std::exception& e) {
      spdlog::warn("skipping ecg_id {}: {}", r.ecg_id, e.what());
      ++rep.skipped_corrupt;
      continue;
    }
    if (r.n_leads() != kNumLeads || r.n_samples() != expected_samples) {
      spdlog::warn("skipping ecg_id {}: signal is {}x{}, expected {}x{}", r.ecg_id, r.n_leads(), r.n_samples(),
                   kNumLeads, expected_samples);
      ++rep.skipped_corrupt;
      continue;
    }
    if (r.fold < 1 || r.fold > 10) {
      spdlog::warn("skipping ecg_id {}: fold {} out of range", r.ecg_id, r.fold);
      ++rep.skipped_corrupt;
      continue;
    }
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.ecg_id < b.ecg_id; });
  rep.loaded = records.size();
  spdlog::info("PTB-XL: {} rows, {} loaded, {} without superclass, {} skipped", rep.database_rows, rep.loaded,
               rep.excluded_no_superclass, rep.skipped_corrupt);
  if (report) *report = std::move(rep);
  return records;
}

// ---------------------------------------------------------------------------

EcgRecord select_leads(const EcgRecord& record, const LeadSubset& subset) {
  if (record.n_leads() != kNumLeads)
    throw ShapeError("select_leads needs a 12-lead record, got " + std::to_string(record.n_leads()) + " leads");
  EcgRecord out = record;
  out.signal.resize(subset.size(), record.n_samples());
  for (int i = 0; i < subset.size(); ++i) out.signal.row(i) = record.signal.row(subset.indices()[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

NormalizationStats fit_normalizer(const std::vector<EcgRecord>& records, const SplitSpec& split) {
  std::vector<const EcgRecord*> train;
  for (const auto& r : records) {
    if (split.is_train(r.fold)) train.push_back(&r);
  }
  if (train.empty()) throw std::invalid_argument("normalizer: no records in the train folds");
  const int leads = train.front()->n_leads();
  NormalizationStats s;
  s.mean.assign(leads, 0.0);
  s.stddev.assign(leads, 0.0);
  std::vector<double> count(leads, 0.0);
  for (const auto* r : train) {
    if (r->n_leads() != leads) throw ShapeError("normalizer: records differ in lead count");
    for (int l = 0; l < leads; ++l) {
      s.mean[l] += r->signal.row(l).template cast<double>().sum();
      count[l] += static_cast<double>(r->n_samples());
    }
  }
  for (int l = 0; l < leads; ++l) s.mean[l] /= count[l];
  for (const auto* r : train) {
    for (int l = 0; l < leads; ++l) {
      s.stddev[l] += (r->signal.row(l).template cast<double>().array() - s.mean[l]).square().sum();
    }
  }
  for (int l = 0; l < leads; ++l) {
    s.stddev[l] = std::sqrt(s.stddev[l] / count[l]);
    if (!(s.stddev[l] > 1e-12)) {
      const std::string name = leads == kNumLeads ? std::string(kLeadNames[l]) : "#" + std::to_string(l);
      throw std::invalid_argument("normalizer: lead " + name + " has zero variance in the train folds");
    }
  }
  return s;
}

EcgRecord apply_normalizer(const EcgRecord& record, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(record.n_leads()) != stats.mean.size()) throw ShapeError("normalizer lead count mismatch");
  EcgRecord out = record;
  for (int l = 0; l < record.n_leads(); ++l) {
    out.signal.row(l) =
        ((record.signal.row(l).template cast<double>().array() - stats.mean[l]) / stats.stddev[l]).template cast<float>();
  }
  return out;
}

NormalizationStats normalize_corpus(std::vector<EcgRecord>& records, const SplitSpec& split) {
  const NormalizationStats stats = fit_normalizer(records, split);
  for (auto& r : records) r = apply_normalizer(r, stats);
  return stats;
}

EcgRecord invert_normalizer(const EcgRecord& record, const NormalizationStats& stats) {
  if (static_cast<std::size_t>(record.n_leads()) != stats.mean.size()) throw ShapeError("normalizer lead count mismatch");
  EcgRecord out = record;
  for (int l = 0; l < record.n_leads(); ++l) {
    out.signal.row(l) =
        (record.signal.row(l).template cast<double>().array() * stats.stddev[l] + stats.mean[l]).template cast<float>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

std::array<double, kNumClasses> synthetic_class_frequencies() { return {6.0, 9.0, 12.0, 15.0, 18.0}; }

namespace {

constexpr std::array<int, 3> kWeakLeads = {0, 1, 7};  // I, II, V2
constexpr std::array<double, kNumLeads> kBeatGain = {1.0, 1.2, 0.4, -1.0, 0.5, 0.8, -0.6, 0.9, 1.1, 1.3, 1.1, 0.9};

bool is_weak(int lead) { return std::find(kWeakLeads.begin(), kWeakLeads.end(), lead) != kWeakLeads.end(); }

double gauss(double x, double mu, double w) { return std::exp(-0.5 * (x - mu) * (x - mu) / (w * w)); }

}  // namespace

std::vector<EcgRecord> make_synthetic_corpus(int n_records, std::uint64_t seed, const SyntheticOptions& opt) {
  if (n_records < 10) throw std::invalid_argument("synthetic corpus needs at least 10 records");
  constexpr double fs = 100.0;
  const int n = static_cast<int>(fs * kRecordSeconds);
  const auto freqs = synthetic_class_frequencies();

  // lead x class coupling is a fixed property of the generator, not of the seed
  std::array<std::array<double, kNumClasses>, kNumLeads> coupling{};
  {
    std::mt19937_64 g(0x5eed0ec6ULL);
    std::uniform_real_distribution<double> u(0.7, 1.0);
    for (int l = 0; l < kNumLeads; ++l) {
      for (int c = 0; c < kNumClasses; ++c) coupling[l][c] = is_weak(l) ? opt.weak_class_gain : u(g);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<EcgRecord> out;
  out.reserve(static_cast<std::size_t>(n_records));
  std::vector<double> beat(n), wander(n), component(n);

  for (int i = 0; i < n_records; ++i) {
    EcgRecord r;
    r.ecg_id = i + 1;
    r.fold = i % 10 + 1;
    r.sampling_rate = fs;

    for (int c = 0; c < kNumClasses; ++c) r.label[c] = unit(rng) < opt.label_rate ? 1 : 0;
    if (std::none_of(r.label.begin(), r.label.end(), [](auto v) { return v != 0; })) {
      r.label[std::min(kNumClasses - 1, static_cast<int>(unit(rng) * kNumClasses))] = 1;
    }

    r.patient.age = std::round(18.0 + 72.0 * unit(rng));
    r.patient.sex = unit(rng) < 0.5 ? Sex::male : Sex::female;
    const double h = 168.0 + 10.0 * normal(rng);
    const double w = 75.0 + 15.0 * normal(rng);
    if (unit(rng) >= 0.1) r.patient.height = std::round(h);
    if (unit(rng) >= 0.1) r.patient.weight = std::round(w);

    // background rhythm: P, QRS and T waves plus baseline wander
    const double period = 60.0 / (55.0 + 40.0 * unit(rng));
    const double offset = period * unit(rng);
    const double wander_phase = 2.0 * std::numbers::pi * unit(rng);
    for (int t = 0; t < n; ++t) {
      const double time = t / fs;
      double phase = std::fmod(time - offset, period);
      if (phase < 0) phase += period;
      if (phase > period / 2) phase -= period;
      beat[t] = 0.15 * gauss(phase, -0.2, 0.025) + gauss(phase, 0.0, 0.012) + 0.3 * gauss(phase, 0.3, 0.05);
      wander[t] = 0.1 * std::sin(2.0 * std::numbers::pi * 0.25 * time + wander_phase);
    }

    r.signal.resize(kNumLeads, n);
    for (int l = 0; l < kNumLeads; ++l) {
      for (int t = 0; t < n; ++t) r.signal(l, t) = static_cast<float>(kBeatGain[l] * beat[t] + wander[t]);
    }
    for (int c = 0; c < kNumClasses; ++c) {
      if (!r.label[c]) continue;
      const double amp = 0.15 + 0.2 * unit(rng);
      const double f = freqs[c] * (1.0 + 0.06 * (unit(rng) - 0.5));
      const double ph = 2.0 * std::numbers::pi * unit(rng);
      for (int t = 0; t < n; ++t) component[t] = amp * std::sin(2.0 * std::numbers::pi * f * t / fs + ph);
      for (int l = 0; l < kNumLeads; ++l) {
        for (int t = 0; t < n; ++t) r.signal(l, t) += static_cast<float>(coupling[l][c] * component[t]);
      }
    }
    for (int l = 0; l < kNumLeads; ++l) {
      const double sigma = is_weak(l) ? opt.base_noise + opt.weak_extra_noise : opt.base_noise;
      for (int t = 0; t < n; ++t) r.signal(l, t) += static_cast<float>(sigma * normal(rng));
    }
    if (opt.label_noise > 0.0 && r.fold < opt.clean_from_fold) {
      Label noisy = r.label;
      for (auto& bit : noisy) {
        if (unit(rng) < opt.label_noise) bit = 1 - bit;
      }
      if (std::any_of(noisy.begin(), noisy.end(), [](auto v) { return v != 0; })) r.label = noisy;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus persistence

namespace {

constexpr std::string_view kSignalMagic = "ECGSIG01";

std::string format_codes(const std::map<std::string, double>& codes) {
  std::string s = "{";
  bool first = true;
  for (const auto& [k, v] : codes) {
    s += fmt::format("{}'{}': {}", first ? "" : ", ", k, v);
    first = false;
  }
  return s + "}";
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

void save_corpus(const fs::path& dir, const std::vector<EcgRecord>& records, const CorpusInfo& info) {
  if (records.empty()) throw std::invalid_argument("refusing to save an empty corpus");
  const int leads = records.front().n_leads();
  const int samples = records.front().n_samples();
  io::ByteWriter w;
  w.str(kSignalMagic);
  w.u32(static_cast<std::uint32_t>(records.size()));
  w.u32(static_cast<std::uint32_t>(leads));
  w.u32(static_cast<std::uint32_t>(samples));
  std::string manifest = "ecg_id,fold,sampling_rate,NORM,MI,STTC,CD,HYP,age,sex,height,weight,scp_codes\n";
  for (const auto& r : records) {
    if (r.n_leads() != leads || r.n_samples() != samples) throw ShapeError("corpus records differ in shape");
    w.f32({r.signal.data(), static_cast<std::size_t>(r.signal.size())});
    manifest += fmt::format("{},{},{}", r.ecg_id, r.fold, r.sampling_rate);
    for (auto b : r.label) manifest += fmt::format(",{}", static_cast<int>(b));
    const std::string sex = r.patient.sex ? (*r.patient.sex == Sex::male ? "0" : "1") : "";
    manifest += fmt::format(",{},{},{},{},{}\n", opt(r.patient.age), sex, opt(r.patient.height), opt(r.patient.weight),
                            csv::escape(format_codes(r.scp_codes)));
  }
  nlohmann::json j = {{"source", info.source}, {"normalized", info.normalized}, {"records", records.size()},
                      {"leads", leads}, {"samples", samples}};
  if (info.stats) j["normalization"] = {{"mean", info.stats->mean}, {"std", info.stats->stddev}};
  io::write_file(dir / "signals.bin", w.data());
  io::write_file(dir / "manifest.csv", manifest);
  io::write_file(dir / "info.json", j.dump(2) + "\n");
}

std::vector<EcgRecord> load_corpus(const fs::path& dir, CorpusInfo* info) {
  for (const char* f : {"signals.bin", "manifest.csv", "info.json"}) {
    if (!fs::is_regular_file(dir / f)) throw IngestionError("corpus directory lacks " + std::string(f) + ": " + dir.string());
  }
  const std::string blob = io::read_file(dir / "signals.bin");
  io::ByteReader rd(blob);
  rd.expect_magic(kSignalMagic);
  const auto n = rd.u32();
  const auto leads = static_cast<int>(rd.u32());
  const auto samples = static_cast<int>(rd.u32());
  const auto table = csv::read(dir / "manifest.csv");
  if (table.rows.size() != n) throw IngestionError("manifest row count does not match signals.bin");

  const auto col = [&](std::string_view name) { return table.column(name); };
  const std::size_t c_id = col("ecg_id"), c_fold = col("fold"), c_rate = col("sampling_rate"), c_age = col("age"),
                    c_sex = col("sex"), c_h = col("height"), c_w = col("weight"), c_codes = col("scp_codes");
  std::vector<EcgRecord> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& r = out[i];
    const auto& row = table.rows[i];
    r.signal.resize(leads, samples);
    rd.f32({r.signal.data(), static_cast<std::size_t>(r.signal.size())});
    r.ecg_id = std::stoll(row[c_id]);
    r.fold = std::stoi(row[c_fold]);
    r.sampling_rate = std::stod(row[c_rate]);
    for (int c = 0; c < kNumClasses; ++c) r.label[c] = static_cast<std::uint8_t>(std::stoi(row[col(kClassNames[c])]));
    r.patient.age = parse_optional(row[c_age]);
    if (auto s = parse_optional(row[c_sex])) r.patient.sex = *s == 0.0 ? Sex::male : Sex::female;
    r.patient.height = parse_optional(row[c_h]);
    r.patient.weight = parse_optional(row[c_w]);
    r.scp_codes = parse_scp_codes(row[c_codes]);
  }
  if (info) {
    const auto j = nlohmann::json::parse(io::read_file(dir / "info.json"));
    info->source = j.value("source", "");
    info->normalized = j.value("normalized", false);
    if (j.contains("normalization")) {
      NormalizationStats s;
      j["normalization"]["mean"].get_to(s.mean);
      j["normalization"]["std"].get_to(s.stddev);
      info->stats = s;
    }
  }
  return out;
}

}  // namespace ecgcl
