#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/QR>

#include "ecgcl/csv.hpp"
#include "ecgcl/dataset.hpp"
#include "ecgcl/io.hpp"
#include "ecgcl/metrics.hpp"
#include "ecgcl/wfdb.hpp"
#include "support.hpp"

using namespace ecgcl;
namespace fs = std::filesystem;

namespace {

ScpStatements mini_statements() {
  return ScpStatements::from_map({{"NORM", 0}, {"IMI", 1}, {"NDT", 2}, {"AFIB", std::nullopt}, {"SR", std::nullopt}});
}

constexpr char kStatementsCsv[] =
    ",description,diagnostic,form,rhythm,diagnostic_class,diagnostic_subclass\n"
    "NORM,normal ECG,1.0,,,NORM,NORM\n"
    "IMI,\"inferior myocardial infarction, any\",1.0,,,MI,IMI\n"
    "NDT,non-diagnostic T abnormalities,1.0,1.0,,STTC,STTC\n"
    "AFIB,atrial fibrillation,,,1.0,,\n"
    "SR,sinus rhythm,,,1.0,,\n";

// Digital sample of lead l at time t in the hand-built records.
std::int16_t digital(int record, int lead, int t) { return static_cast<std::int16_t>(record * 100 + lead * 10 + t % 7 - 3); }

void write_raw_record(const fs::path& base, int record, int samples) {
  fs::create_directories(base.parent_path());
  const std::string name = base.filename().string();
  std::ofstream hea(base.string() + ".hea");
  hea << name << " 12 100 " << samples << "\n";
  const char* leads[] = {"I", "II", "III", "AVR", "AVL", "AVF", "V1", "V2", "V3", "V4", "V5", "V6"};
  for (int l = 0; l < 12; ++l) hea << name << ".dat 16 1000.0(0)/mV 16 0 0 0 0 " << leads[l] << "\n";
  std::ofstream dat(base.string() + ".dat", std::ios::binary);
  for (int t = 0; t < samples; ++t) {
    for (int l = 0; l < 12; ++l) {
      const std::int16_t v = digital(record, l, t);
      dat.write(reinterpret_cast<const char*>(&v), 2);
    }
  }
}

// Three well-formed records (one without a superclass) and one truncated.
void write_mini_ptbxl(const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "scp_statements.csv") << kStatementsCsv;
  std::ofstream db(dir / "ptbxl_database.csv");
  db << "ecg_id,patient_id,age,sex,height,weight,scp_codes,strat_fold,filename_lr,filename_hr\n";
  db << "3,11.0,56.0,1,,63.0,\"{'IMI': 100.0, 'AFIB': 100.0}\",9,records100/00000/00003_lr,records500/00000/00003_hr\n";
  db << "1,10.0,47.0,0,172.0,80.0,\"{'NORM': 100.0, 'SR': 0.0}\",1,records100/00000/00001_lr,records500/00000/00001_hr\n";
  db << "2,12.0,,,,,\"{'SR': 0.0}\",4,records100/00000/00002_lr,records500/00000/00002_hr\n";
  db << "4,13.0,70.0,0,,,\"{'NDT': 50.0}\",2,records100/00000/00004_lr,records500/00000/00004_hr\n";
  write_raw_record(dir / "records100/00000/00001_lr", 1, 1000);
  write_raw_record(dir / "records100/00000/00002_lr", 2, 1000);
  write_raw_record(dir / "records100/00000/00003_lr", 3, 1000);
  write_raw_record(dir / "records100/00000/00004_lr", 4, 600);
}

double goertzel_power(const float* x, int n, double freq, double fs) {
  double re = 0, im = 0;
  for (int t = 0; t < n; ++t) {
    re += x[t] * std::cos(2 * std::numbers::pi * freq * t / fs);
    im += x[t] * std::sin(2 * std::numbers::pi * freq * t / fs);
  }
  return (re * re + im * im) / n;
}

// Least-squares linear probe on per-class band powers of one lead; returns eval macro AUC.
double probe_auc(const std::vector<EcgRecord>& records, int lead) {
  const auto freqs = synthetic_class_frequencies();
  auto features = [&](const EcgRecord& r) {
    Eigen::VectorXd f(kNumClasses + 1);
    for (int c = 0; c < kNumClasses; ++c) {
      double p = 0;
      for (double df : {-0.2, -0.1, 0.0, 0.1, 0.2})
        p += goertzel_power(r.signal.row(lead).data(), r.n_samples(), freqs[c] + df, r.sampling_rate);
      f(c) = std::log(p + 1e-12);
    }
    f(kNumClasses) = 1.0;
    return f;
  };
  std::vector<const EcgRecord*> train, eval;
  for (const auto& r : records) (r.fold <= 8 ? train : eval).push_back(&r);
  Eigen::MatrixXd X(train.size(), kNumClasses + 1), Y(train.size(), kNumClasses);
  for (std::size_t i = 0; i < train.size(); ++i) {
    X.row(i) = features(*train[i]).transpose();
    for (int c = 0; c < kNumClasses; ++c) Y(i, c) = train[i]->label[c];
  }
  const Eigen::MatrixXd W = X.colPivHouseholderQr().solve(Y);
  Mat<double> scores(eval.size(), kNumClasses), labels(eval.size(), kNumClasses);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    scores.row(i) = (features(*eval[i]).transpose() * W);
    for (int c = 0; c < kNumClasses; ++c) labels(i, c) = eval[i]->label[c];
  }
  return macro_auc(scores, labels).macro_auc;
}

}  // namespace

TEST_CASE("scp code parsing") {
  const auto codes = parse_scp_codes("{'NORM': 100.0, 'LVOLT': 0.0, 'SR': 0.0}");
  CHECK(codes.size() == 3);
  CHECK(codes.at("NORM") == 100.0);
  CHECK(parse_scp_codes("{}").empty());
  CHECK_THROWS(parse_scp_codes("NORM: 100"));
}

TEST_CASE("superclass aggregation") {
  const auto st = mini_statements();
  CHECK(aggregate_superclasses({{"NORM", 100.0}}, st) == Label{1, 0, 0, 0, 0});
  CHECK(aggregate_superclasses({}, st) == Label{0, 0, 0, 0, 0});
  CHECK(aggregate_superclasses({{"IMI", 100.0}, {"AFIB", 100.0}}, st) == Label{0, 1, 0, 0, 0});
  CHECK(aggregate_superclasses({{"XYZ", 100.0}, {"NDT", 20.0}}, st) == Label{0, 0, 1, 0, 0});
  CHECK(aggregate_superclasses({{"NDT", 20.0}}, st, 50.0) == Label{0, 0, 0, 0, 0});
}

TEST_CASE("scp statements from csv") {
  TempDir tmp("scp");
  std::ofstream(tmp / "scp_statements.csv") << kStatementsCsv;
  const auto st = ScpStatements::load(tmp / "scp_statements.csv");
  CHECK(st.superclass("IMI") == 1);
  CHECK(st.superclass("NDT") == 2);
  CHECK_FALSE(st.superclass("AFIB").has_value());
  CHECK(st.known("SR"));
  CHECK_FALSE(st.known("XYZ"));
}

TEST_CASE("wfdb reader against hand-written bytes") {
  TempDir tmp("wfdb");
  write_raw_record(tmp / "rec", 5, 20);
  wfdb::Header h;
  const auto sig = wfdb::read_record(tmp / "rec", &h);
  CHECK(h.n_signals == 12);
  CHECK(h.sampling_frequency == 100.0);
  REQUIRE(sig.rows() == 12);
  REQUIRE(sig.cols() == 20);
  for (int l = 0; l < 12; ++l) {
    for (int t = 0; t < 20; ++t) CHECK(sig(l, t) == doctest::Approx(digital(5, l, t) / 1000.0).epsilon(1e-6));
  }
  CHECK(h.signals[3].description == "AVR");
}

TEST_CASE("wfdb header baseline and round trip") {
  const auto h = wfdb::parse_header("r 2 500 10\nr.dat 16 200(-5)/mV 16 0 -5 0 0 I\nr.dat 16 400/uV 16 7 0 0 0 II\n");
  CHECK(h.signals[0].gain == 200.0);
  CHECK(h.signals[0].baseline == -5);
  CHECK(h.signals[1].baseline == 7);
  CHECK(h.signals[1].units == "uV");

  TempDir tmp("wfdb_rt");
  Mat<float> x(2, 50);
  for (int t = 0; t < 50; ++t) {
    x(0, t) = static_cast<float>(std::sin(t * 0.3));
    x(1, t) = static_cast<float>(-0.5 + 0.01 * t);
  }
  wfdb::write_record(tmp / "rt", x, 100.0, 1000.0, {"I", "II"});
  const auto back = wfdb::read_record(tmp / "rt");
  CHECK((back - x).cwiseAbs().maxCoeff() <= 0.5e-3 + 1e-7);
}

TEST_CASE("miniature PTB-XL directory") {
  TempDir tmp("ptbxl");
  write_mini_ptbxl(tmp.path());
  IngestionReport rep;
  const auto records = load_ptbxl(tmp.path(), LoadOptions{}, &rep);
  REQUIRE(records.size() == 2);
  CHECK(records[0].ecg_id == 1);
  CHECK(records[1].ecg_id == 3);
  CHECK(records[0].label == Label{1, 0, 0, 0, 0});
  CHECK(records[1].label == Label{0, 1, 0, 0, 0});
  CHECK(records[1].fold == 9);
  CHECK(*records[0].patient.age == 47.0);
  CHECK(*records[0].patient.sex == Sex::male);
  CHECK(*records[1].patient.sex == Sex::female);
  CHECK_FALSE(records[1].patient.height.has_value());
  CHECK(records[0].n_leads() == 12);
  CHECK(records[0].n_samples() == 1000);
  CHECK(records[0].signal(7, 3) == doctest::Approx(digital(1, 7, 3) / 1000.0));
  CHECK(rep.database_rows == 4);
  CHECK(rep.excluded_no_superclass == 1);
  CHECK(rep.skipped_corrupt == 1);

  const auto again = load_ptbxl(tmp.path(), LoadOptions{});
  REQUIRE(again.size() == records.size());
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].signal == records[i].signal);

  const auto st = ScpStatements::load(tmp / "scp_statements.csv");
  for (const auto& r : records) CHECK(aggregate_superclasses(r.scp_codes, st) == r.label);
}

TEST_CASE("missing database file is an ingestion error") {
  TempDir tmp("ptbxl_missing");
  std::ofstream(tmp / "scp_statements.csv") << kStatementsCsv;
  CHECK_THROWS_AS(load_ptbxl(tmp.path(), LoadOptions{}), IngestionError);
}

TEST_CASE("lead selection") {
  auto records = make_synthetic_corpus(10, 3);
  const auto& r = records[0];
  const auto two = select_leads(r, LeadSubset::standard(2));
  CHECK(two.signal.rows() == 2);
  CHECK(two.signal.row(0) == r.signal.row(0));
  CHECK(two.signal.row(1) == r.signal.row(1));
  const auto three = select_leads(r, LeadSubset::standard(3));
  CHECK(LeadSubset::standard(3).indices() == std::vector<int>{0, 1, 7});
  CHECK(three.signal.row(2) == r.signal.row(7));
  CHECK(select_leads(r, LeadSubset::standard(12)).signal == r.signal);
  CHECK(three.label == r.label);
  CHECK_THROWS_AS(select_leads(two, LeadSubset::standard(2)), ShapeError);
}

TEST_CASE("lead subsets") {
  for (int n : {12, 6, 4, 3, 2}) {
    const auto s = LeadSubset::standard(n);
    CHECK(s.size() == n);
    CHECK(std::is_sorted(s.indices().begin(), s.indices().end()));
  }
  CHECK(LeadSubset::standard(4).lead_names() == std::vector<std::string>{"I", "II", "III", "V2"});
  CHECK(LeadSubset::from_names({"V2", "I"}).indices() == std::vector<int>{0, 7});
  CHECK_THROWS(LeadSubset::custom({3, 1}));
  CHECK_THROWS(LeadSubset::custom({0, 12}));
  CHECK_THROWS(LeadSubset::standard(5));
}

TEST_CASE("split validation") {
  SplitSpec s;
  CHECK_NOTHROW(s.validate());
  s.eval_fold = 3;
  CHECK_THROWS(s.validate());
  s = SplitSpec{};
  s.holdout_fold = 9;
  CHECK_THROWS(s.validate());
}

TEST_CASE("normalizer matches a two-pass oracle and standardizes train folds") {
  std::vector<EcgRecord> records;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 30; ++i) {
    EcgRecord r;
    r.ecg_id = i + 1;
    r.fold = i % 10 + 1;
    r.signal.resize(3, 200);
    for (int l = 0; l < 3; ++l) {
      for (int t = 0; t < 200; ++t) r.signal(l, t) = static_cast<float>(2.0 * l - 1 + (0.5 + l) * n(rng));
    }
    records.push_back(r);
  }
  const SplitSpec split;
  const auto stats = fit_normalizer(records, split);
  for (int l = 0; l < 3; ++l) {
    double sum = 0, cnt = 0;
    for (const auto& r : records) {
      if (r.fold > 8) continue;
      for (int t = 0; t < 200; ++t) sum += r.signal(l, t);
      cnt += 200;
    }
    const double mean = sum / cnt;
    double ss = 0;
    for (const auto& r : records) {
      if (r.fold > 8) continue;
      for (int t = 0; t < 200; ++t) ss += (r.signal(l, t) - mean) * (r.signal(l, t) - mean);
    }
    CHECK(stats.mean[l] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(stats.stddev[l] == doctest::Approx(std::sqrt(ss / cnt)).epsilon(1e-10));
  }

  for (int l = 0; l < 3; ++l) {
    double sum = 0, sq = 0, cnt = 0;
    for (const auto& r : records) {
      if (r.fold > 8) continue;
      const auto z = apply_normalizer(r, stats);
      for (int t = 0; t < 200; ++t) {
        sum += z.signal(l, t);
        sq += static_cast<double>(z.signal(l, t)) * z.signal(l, t);
      }
      cnt += 200;
    }
    const double mean = sum / cnt;
    CHECK(std::fabs(mean) < 1e-6);
    CHECK(std::fabs(std::sqrt(sq / cnt - mean * mean) - 1.0) < 1e-4);
  }

  for (const auto& r : records) {
    const auto back = invert_normalizer(apply_normalizer(r, stats), stats);
    const double rel = (back.signal - r.signal).cwiseAbs().maxCoeff() / r.signal.cwiseAbs().maxCoeff();
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("normalizer rejects a constant lead by name") {
  auto records = make_synthetic_corpus(10, 1);
  for (auto& r : records) r.signal.row(4).setConstant(0.25f);
  try {
    fit_normalizer(records, SplitSpec{});
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("aVL") != std::string::npos);
  }
}

TEST_CASE("standardized data is left unchanged") {
  auto records = make_synthetic_corpus(20, 2);
  normalize_corpus(records, SplitSpec{});
  const auto stats = fit_normalizer(records, SplitSpec{});
  for (int l = 0; l < 12; ++l) {
    CHECK(std::fabs(stats.mean[l]) < 1e-6);
    CHECK(std::fabs(stats.stddev[l] - 1.0) < 1e-4);
  }
  const auto again = apply_normalizer(records[3], stats);
  CHECK((again.signal - records[3].signal).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("synthetic corpus is deterministic and well formed") {
  const auto a = make_synthetic_corpus(100, 7);
  const auto b = make_synthetic_corpus(100, 7);
  REQUIRE(a.size() == 100);
  int missing_height = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].signal == b[i].signal);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].n_leads() == 12);
    CHECK(a[i].n_samples() == 1000);
    CHECK(a[i].fold == static_cast<int>(i % 10) + 1);
    CHECK(std::any_of(a[i].label.begin(), a[i].label.end(), [](auto v) { return v == 1; }));
    missing_height += !a[i].patient.height.has_value();
  }
  CHECK(missing_height > 0);
  CHECK(missing_height < 30);
  CHECK(make_synthetic_corpus(100, 8)[0].signal != a[0].signal);
  CHECK_THROWS(make_synthetic_corpus(9, 1));
}

TEST_CASE("synthetic corpus hides class evidence from lead I") {
  const auto records = make_synthetic_corpus(2000, 1);
  const double lead_i = probe_auc(records, 0);
  const double v5 = probe_auc(records, 10);
  MESSAGE("probe AUC lead I " << lead_i << ", V5 " << v5);
  CHECK(lead_i < v5);
}

TEST_CASE("synthetic label noise only touches training folds") {
  SyntheticOptions clean;
  clean.label_noise = 0.0;
  const auto noisy = make_synthetic_corpus(2000, 3);
  const auto plain = make_synthetic_corpus(2000, 3, clean);
  // mean positive-bit rate per group: train folds, then folds 9 and 10
  auto rates = [](const std::vector<EcgRecord>& rs) {
    std::array<double, 2> pos{}, bits{};
    for (const auto& r : rs) {
      const int g = r.fold >= 9;
      for (auto v : r.label) pos[g] += v;
      bits[g] += static_cast<double>(r.label.size());
    }
    return std::array<double, 2>{pos[0] / bits[0], pos[1] / bits[1]};
  };
  const auto n = rates(noisy);
  const auto p = rates(plain);
  MESSAGE("train bit rate " << p[0] << " -> " << n[0] << ", clean folds " << p[1] << " -> " << n[1]);
  // flipping 10% of bits pulls a rate below one half up by 0.1 * (1 - 2p)
  CHECK(n[0] - p[0] == doctest::Approx(0.1 * (1 - 2 * p[0])).epsilon(0.35));
  CHECK(std::abs(n[1] - p[1]) < 0.025);
  for (const auto& r : noisy) CHECK(std::any_of(r.label.begin(), r.label.end(), [](auto v) { return v == 1; }));
}

TEST_CASE("corpus save and load round trip") {
  TempDir tmp("corpus");
  auto records = make_synthetic_corpus(12, 4);
  records[2].scp_codes = {{"NORM", 100.0}, {"SR", 0.0}};
  CorpusInfo info;
  info.source = "synthetic";
  info.normalized = true;
  info.stats = NormalizationStats{std::vector<double>(12, 0.5), std::vector<double>(12, 2.0)};
  save_corpus(tmp.path(), records, info);
  CorpusInfo back_info;
  const auto back = load_corpus(tmp.path(), &back_info);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].signal == records[i].signal);
    CHECK(back[i].label == records[i].label);
    CHECK(back[i].fold == records[i].fold);
    CHECK(back[i].patient.age == records[i].patient.age);
    CHECK(back[i].patient.height == records[i].patient.height);
    CHECK(back[i].patient.sex == records[i].patient.sex);
  }
  CHECK(back[2].scp_codes == records[2].scp_codes);
  CHECK(back_info.source == "synthetic");
  CHECK(back_info.stats->stddev[3] == 2.0);
  CHECK_THROWS_AS(load_corpus(tmp / "nope"), IngestionError);
}

TEST_CASE("csv parser handles quoting") {
  const auto t = csv::parse("a,b,c\n1,\"x, y\",\"he said \"\"hi\"\"\"\n2,,\"multi\nline\"\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x, y");
  CHECK(t.rows[0][2] == "he said \"hi\"");
  CHECK(t.rows[1][1].empty());
  CHECK(t.rows[1][2] == "multi\nline");
  CHECK(t.column("c") == 2);
  CHECK(csv::escape("a,b") == "\"a,b\"");
}

TEST_CASE("content hash is git compatible") {
  // `printf 'hello\n' | git hash-object --stdin`
  CHECK(io::content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}
