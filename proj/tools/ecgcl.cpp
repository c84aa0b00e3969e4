// ecgcl command-line entry points. Exit codes: 0 ok, 2 usage/input error,
// 3 runtime failure.
#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ecgcl/io.hpp"
#include "ecgcl/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecgcl;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;
const std::vector<double> kAlphaGrid = {0.1, 0.3, 1.0, 3.0};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config assembly: preset, then --config file, then individual flags.
struct ConfigFlags {
  std::string preset = "full";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> subset;
  std::optional<double> alpha;
  std::optional<std::string> sim;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> epochs;
  std::optional<int> patience;
  std::optional<std::string> padding;
  bool no_metadata = false;
  bool on_the_fly = false;

  void add_to(CLI::App* app, bool with_subset) {
    app->add_option("--preset", preset, "Base config before --config and flags")
        ->check(CLI::IsMember({"full", "desk"}));
    app->add_option("--config", config_path, "JSON run config (partial documents override the preset)");
    app->add_option("--seed", seed, "Root seed");
    if (with_subset) app->add_option("--subset", subset, "Lead count (2, 3, 4, 6)")->check(CLI::IsMember({2, 3, 4, 6}));
    app->add_option("--alpha", alpha, "Alignment weight");
    app->add_option("--sim", sim, "Similarity kind")->check(CLI::IsMember({"l1", "l2", "cosine"}));
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--batch-size", batch_size, "Minibatch size");
    app->add_option("--epochs", epochs, "Maximum epochs");
    app->add_option("--patience", patience, "Early-stopping patience in epochs");
    app->add_option("--padding", padding, "Convolution padding")->check(CLI::IsMember({"zeros", "circular"}));
    app->add_flag("--no-metadata", no_metadata, "Drop the metadata branch");
    app->add_flag("--teacher-on-the-fly", on_the_fly, "Compute teacher embeddings per batch instead of the cache");
  }

  RunConfig build(const std::string& data_dir, const std::string& out_dir) const {
    RunConfig c = preset == "desk" ? desk_config() : RunConfig{};
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(io::read_file(config_path));
      } catch (const std::exception& e) {
        throw UsageError(fmt::format("cannot read config {}: {}", config_path, e.what()));
      }
      from_json(j, c);
    }
    if (seed) c.seed = *seed;
    if (subset) c.subset = *subset;
    if (alpha) c.loss.alpha = *alpha;
    if (sim) c.loss.sim_kind = similarity_kind_from_string(*sim);
    if (lr) c.optimizer.learning_rate = *lr;
    if (batch_size) c.optimizer.batch_size = *batch_size;
    if (epochs) c.optimizer.max_epochs = *epochs;
    if (patience) c.optimizer.patience = *patience;
    if (padding) c.encoder.padding = *padding == "zeros" ? Padding::zeros : Padding::circular;
    if (no_metadata) c.use_metadata = false;
    if (on_the_fly) c.teacher_on_the_fly = true;
    c.data_dir = data_dir;
    c.out_dir = out_dir;
    return c;
  }
};

std::string env_data_dir() {
  const char* v = std::getenv("ECGCL_DATA_DIR");
  return v ? v : "";
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(fmt::format("{} not given (flag or ECGCL_DATA_DIR)", what));
  if (!fs::is_directory(path)) throw UsageError(fmt::format("{} is not a directory: {}", what, path));
}

void echo_config(const RunConfig& c, const fs::path& out, const std::string& leg) {
  const json j = c;
  spdlog::info("effective config for {} (hash {}):\n{}", leg, c.hash(), j.dump(2));
  io::write_file(out / "logs" / (leg + ".config.json"), j.dump(2) + "\n");
}

std::vector<EcgRecord> load_prepared(const std::string& dir) {
  require_dir(dir, "--data-dir");
  CorpusInfo info;
  auto records = load_corpus(dir, &info);
  if (!info.normalized) throw UsageError("corpus at " + dir + " is not normalized; create it with prepare or synth");
  spdlog::info("loaded {} records from {} ({})", records.size(), dir, info.source);
  return records;
}

json report_json(const EvalReport& r) {
  json classes = json::object();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes[r.class_names[c]] = r.class_auc[c] ? json(*r.class_auc[c]) : json(nullptr);
  }
  return {{"subset", r.subset}, {"pseudo", r.pseudo}, {"macro_auc", r.macro_auc}, {"n_eval", r.n_eval},
          {"class_auc", classes}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.subset = j.at("subset").get<std::string>();
  r.pseudo = j.at("pseudo").get<bool>();
  r.macro_auc = j.at("macro_auc").get<double>();
  r.n_eval = j.at("n_eval").get<int>();
  for (const auto& name : kClassNames) {
    r.class_names.emplace_back(name);
    const auto& v = j.at("class_auc").at(std::string(name));
    r.class_auc.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  return r;
}

// Writes into a sibling directory first so an interrupted leg never looks complete.
void save_leg(const fs::path& dir, Checkpoint& ckpt, const EvalReport& report) {
  ckpt.manifest["eval"] = report_json(report);
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  save_checkpoint(tmp, ckpt);
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
}

std::optional<json> finished_manifest(const fs::path& dir) {
  if (!fs::is_regular_file(dir / "manifest.json")) return std::nullopt;
  try {
    return json::parse(io::read_file(dir / "manifest.json"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string leg_name(const std::string& kind, int subset, std::uint64_t seed) {
  return fmt::format("{}-s{}-seed{}", kind, subset, seed);
}

std::string alpha_tag(double a) { return fmt::format("a{:g}", a); }

struct Workspace {
  fs::path out;
  fs::path checkpoint(const std::string& leg) const { return out / "checkpoints" / leg; }
  fs::path embeddings() const { return out / "embeddings" / "teacher.emb"; }
  fs::path log(const std::string& leg) const { return out / "logs" / (leg + ".csv"); }
};

struct LegResult {
  EvalReport report;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool resumed = false;
};

// Teacher leg, skipped when a checkpoint with the same config hash exists.
LegResult run_teacher(const RunConfig& base, const std::vector<EcgRecord>& records, const Workspace& ws) {
  RunConfig c = base;
  c.subset = 12;
  const auto dir = ws.checkpoint("teacher");
  if (auto m = finished_manifest(dir); m && m->value("config_hash", "") == c.hash() && m->contains("eval")) {
    spdlog::info("teacher: reusing {}", dir.string());
    return {report_from_json(m->at("eval")), c.hash(), c.seed, true};
  }
  echo_config(c, ws.out, "teacher");
  auto r = train_teacher(c, records);
  io::write_file(ws.log("teacher"), training_log_csv(r.log));
  save_leg(dir, r.checkpoint, r.eval);
  return {r.eval, c.hash(), c.seed, false};
}

TeacherEmbeddingCache ensure_embeddings(const Checkpoint& teacher, const std::vector<EcgRecord>& records,
                                        const Workspace& ws) {
  if (fs::is_regular_file(ws.embeddings())) {
    auto cache = TeacherEmbeddingCache::load(ws.embeddings());
    if (cache.teacher_hash == teacher.content_hash()) return cache;
    spdlog::info("embedding cache belongs to another teacher; re-exporting");
  }
  auto cache = export_teacher_embeddings(teacher, records);
  cache.save(ws.embeddings());
  return cache;
}

// One reduced-lead leg. For students with a sweep, every alpha is a sub-leg and
// the best eval AUC is kept.
LegResult run_reduced(const RunConfig& base, bool student, bool sweep, const std::vector<EcgRecord>& records,
                      const Workspace& ws, const Checkpoint* teacher, const TeacherEmbeddingCache* cache) {
  const std::string kind = student ? "student" : "baseline";
  std::vector<std::optional<double>> alphas = {std::nullopt};
  if (student && sweep) alphas.assign(kAlphaGrid.begin(), kAlphaGrid.end());

  std::optional<LegResult> best;
  for (const auto& a : alphas) {
    RunConfig c = base;
    if (a) c.loss.alpha = *a;
    std::string leg = leg_name(kind, c.subset, c.seed);
    if (a) leg += "-" + alpha_tag(*a);
    const auto dir = ws.checkpoint(leg);
    LegResult out;
    auto m = finished_manifest(dir);
    const bool same_teacher = !student || (m && m->value("teacher_hash", "") == teacher->content_hash());
    if (m && m->value("config_hash", "") == c.hash() && same_teacher && m->contains("eval")) {
      spdlog::info("{}: reusing {}", leg, dir.string());
      out = {report_from_json(m->at("eval")), c.hash(), c.seed, true};
    } else {
      echo_config(c, ws.out, leg);
      auto r = student ? train_student(c, records, c.teacher_on_the_fly ? nullptr : cache, *teacher)
                       : train_baseline(c, records);
      io::write_file(ws.log(leg), training_log_csv(r.log));
      save_leg(dir, r.checkpoint, r.eval);
      out = {r.eval, c.hash(), c.seed, false};
    }
    if (a) spdlog::info("{}: alpha {} eval macro-AUC {:.4f}", leg, *a, out.report.macro_auc);
    if (!best || out.report.macro_auc > best->report.macro_auc) best = out;
  }
  return *best;
}

Checkpoint load_teacher(const std::string& path, const Workspace& ws) {
  const fs::path dir = path.empty() ? ws.checkpoint("teacher") : fs::path(path);
  if (!fs::is_directory(dir)) throw UsageError("teacher checkpoint not found: " + dir.string());
  return load_checkpoint(dir);
}

std::string results_csv(const std::vector<LegResult>& legs) {
  std::string s = "subset,pseudo,macro_auc";
  for (const auto& n : kClassNames) s += fmt::format(",auc_{}", n);
  s += ",seed,config_hash\n";
  for (const auto& l : legs) {
    s += fmt::format("{},{},{:.6f}", l.report.subset, l.report.pseudo ? "True" : "False", l.report.macro_auc);
    for (const auto& v : l.report.class_auc) s += v ? fmt::format(",{:.6f}", *v) : std::string(",");
    s += fmt::format(",{},{}\n", l.seed, l.config_hash);
  }
  return s;
}

std::vector<int> parse_subsets(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      const int v = std::stoi(tok);
      if (v != 2 && v != 3 && v != 4 && v != 6) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad --subsets entry '" + tok + "' (expected a list from 6,4,3,2)");
    }
  }
  if (out.empty()) throw UsageError("--subsets is empty");
  return out;
}

// Runs child invocations of this executable, at most `jobs` at a time.
// Returns the exit status per command.
std::vector<int> run_parallel(const std::vector<std::vector<std::string>>& commands, int jobs) {
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  std::vector<int> status(commands.size(), kRuntimeError);
  std::map<pid_t, std::size_t> running;
  std::size_t next = 0;
  while (next < commands.size() || !running.empty()) {
    while (next < commands.size() && static_cast<int>(running.size()) < jobs) {
      std::vector<char*> argv;
      argv.push_back(const_cast<char*>(self.c_str()));
      for (const auto& a : commands[next]) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        // reports are collected from the manifests afterwards
        const int devnull = open("/dev/null", O_WRONLY);
        if (devnull >= 0) dup2(devnull, STDOUT_FILENO);
        execv(self.c_str(), argv.data());
        _exit(127);
      }
      running[pid] = next++;
    }
    int st = 0;
    const pid_t done = waitpid(-1, &st, 0);
    if (done < 0) break;
    if (auto it = running.find(done); it != running.end()) {
      status[it->second] = WIFEXITED(st) ? WEXITSTATUS(st) : kRuntimeError;
      running.erase(it);
    }
  }
  return status;
}

int cmd_prepare(const std::string& data_dir, double rate, const std::string& out, std::size_t max_records) {
  require_dir(data_dir, "--data-dir");
  if (rate != 100.0 && rate != 500.0) throw UsageError("--sampling-rate must be 100 or 500");
  if (out.empty()) throw UsageError("--out is required");
  const fs::path dest(out);
  fs::path tmp = dest;
  tmp += ".partial";
  fs::remove_all(tmp);
  try {
    LoadOptions opt;
    opt.sampling_rate = rate;
    opt.max_records = max_records;
    IngestionReport rep;
    auto records = load_ptbxl(data_dir, opt, &rep);
    if (records.empty()) throw IngestionError("no usable records under " + data_dir);
    const SplitSpec split;
    CorpusInfo info;
    info.source = "ptbxl";
    info.normalized = true;
    info.stats = normalize_corpus(records, split);
    save_corpus(tmp, records, info);
    const json report = {{"database_rows", rep.database_rows},
                         {"loaded", rep.loaded},
                         {"excluded_no_superclass", rep.excluded_no_superclass},
                         {"skipped_corrupt", rep.skipped_corrupt},
                         {"unknown_codes", rep.unknown_codes},
                         {"sampling_rate", rate}};
    io::write_file(tmp / "report.json", report.dump(2) + "\n");
    fs::remove_all(dest);
    fs::rename(tmp, dest);
    std::cout << report.dump(2) << "\n";
    std::cout << "cache hash " << io::content_hash(io::read_file(dest / "signals.bin")) << "\n";
  } catch (const IngestionError& e) {
    fs::remove_all(tmp);
    throw UsageError(e.what());
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
  return 0;
}

int cmd_synth(int n, std::uint64_t seed, const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  if (n < 10) throw UsageError("--n must be at least 10");
  auto records = make_synthetic_corpus(n, seed);
  CorpusInfo info;
  info.source = fmt::format("synthetic n={} seed={}", n, seed);
  info.normalized = true;
  info.stats = normalize_corpus(records, SplitSpec{});
  fs::path tmp(out);
  tmp += ".partial";
  fs::remove_all(tmp);
  save_corpus(tmp, records, info);
  fs::remove_all(out);
  fs::rename(tmp, out);
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("ecgcl"));
  spdlog::set_pattern("[%H:%M:%S] %v");

  CLI::App app{"Reduced-lead ECG classification with 12-lead embedding alignment"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only warnings and errors on stderr");

  std::string data_dir = env_data_dir();
  std::string out;

  auto* prepare = app.add_subcommand("prepare", "Ingest a PTB-XL directory into a normalized cache");
  double rate = 100.0;
  std::size_t max_records = 0;
  prepare->add_option("--data-dir", data_dir, "PTB-XL root (default $ECGCL_DATA_DIR)");
  prepare->add_option("--sampling-rate", rate, "100 or 500");
  prepare->add_option("--out", out, "Cache directory")->required();
  prepare->add_option("--max-records", max_records, "Stop after this many records (0 = all)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic desk-scale corpus");
  int synth_n = 2000;
  std::uint64_t synth_seed = 1;
  synth->add_option("--n", synth_n, "Record count");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out, "Cache directory")->required();

  ConfigFlags flags;
  std::string teacher_path, embeddings_path, checkpoint_path;
  bool sweep = false;
  int fold = 9;
  int seeds = 1;
  int jobs = 1;
  std::string subsets_text = "6,4,3,2";

  auto add_run = [&](const char* name, const char* help, bool with_subset) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--data-dir", data_dir, "Prepared cache (default $ECGCL_DATA_DIR)");
    sub->add_option("--out", out, "Output directory")->required();
    flags.add_to(sub, with_subset);
    return sub;
  };
  auto* teacher_cmd = add_run("train-teacher", "Train the 12-lead teacher", false);
  auto* export_cmd = add_run("export-embeddings", "Cache teacher embeddings for the train and eval folds", false);
  export_cmd->add_option("--teacher", teacher_path, "Teacher checkpoint (default OUT/checkpoints/teacher)");
  auto* student_cmd = add_run("train-student", "Train a reduced-lead student against the frozen teacher", true);
  student_cmd->add_option("--teacher", teacher_path, "Teacher checkpoint (default OUT/checkpoints/teacher)");
  student_cmd->add_option("--embeddings", embeddings_path, "Embedding cache (default OUT/embeddings/teacher.emb)");
  student_cmd->add_flag("--sweep-alpha", sweep, "Try alpha in {0.1, 0.3, 1, 3} and keep the best on the eval fold");
  auto* baseline_cmd = add_run("train-baseline", "Train a reduced-lead model end to end without alignment", true);
  auto* table_cmd = add_run("reproduce-table", "Teacher, embeddings and both arms per subset and seed", false);
  table_cmd->add_option("--seeds", seeds, "Seeds per arm, counting up from --seed")->check(CLI::PositiveNumber);
  table_cmd->add_option("--jobs", jobs, "Parallel leg subprocesses")->check(CLI::PositiveNumber);
  table_cmd->add_option("--subsets", subsets_text, "Comma-separated lead counts");
  table_cmd->add_flag("--sweep-alpha", sweep, "Alpha sweep for every student leg");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one fold");
  eval_cmd->add_option("--data-dir", data_dir, "Prepared cache (default $ECGCL_DATA_DIR)");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint directory")->required();
  eval_cmd->add_option("--fold", fold, "Fold to score (9 = eval, 10 = holdout)")->check(CLI::Range(1, 10));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (prepare->parsed()) return cmd_prepare(data_dir, rate, out, max_records);
    if (synth->parsed()) return cmd_synth(synth_n, synth_seed, out);

    if (eval_cmd->parsed()) {
      const auto records = load_prepared(data_dir);
      if (!fs::is_directory(checkpoint_path)) throw UsageError("checkpoint not found: " + checkpoint_path);
      const auto ckpt = load_checkpoint(checkpoint_path);
      const auto r = evaluate_checkpoint(ckpt, records, fold);
      json j = report_json(r);
      j["fold"] = fold;
      j["checkpoint"] = checkpoint_path;
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    const Workspace ws{out};
    RunConfig config = flags.build(data_dir, out);
    config.validate();
    const auto records = load_prepared(data_dir);

    if (teacher_cmd->parsed()) {
      const auto r = run_teacher(config, records, ws);
      std::cout << report_json(r.report).dump(2) << "\n";
      return 0;
    }
    if (export_cmd->parsed()) {
      const auto teacher = load_teacher(teacher_path, ws);
      const auto cache = export_teacher_embeddings(teacher, records);
      cache.save(ws.embeddings());
      std::cout << "wrote " << cache.matrix.rows() << " x " << cache.dim() << " embeddings to "
                << ws.embeddings().string() << "\n";
      return 0;
    }
    if (student_cmd->parsed() || baseline_cmd->parsed()) {
      if (config.subset == 12) throw UsageError("--subset is required (2, 3, 4 or 6)");
      const bool student = student_cmd->parsed();
      std::optional<Checkpoint> teacher;
      std::optional<TeacherEmbeddingCache> cache;
      if (student) {
        teacher = load_teacher(teacher_path, ws);
        if (!config.teacher_on_the_fly) {
          const fs::path p = embeddings_path.empty() ? ws.embeddings() : fs::path(embeddings_path);
          if (!fs::is_regular_file(p)) throw UsageError("embedding cache not found: " + p.string());
          cache = TeacherEmbeddingCache::load(p);
        }
      }
      const auto r = run_reduced(config, student, sweep, records, ws, teacher ? &*teacher : nullptr,
                                 cache ? &*cache : nullptr);
      std::cout << report_json(r.report).dump(2) << "\n";
      return 0;
    }

    // reproduce-table
    const auto subsets = parse_subsets(subsets_text);
    echo_config(config, ws.out, "reproduce");
    io::write_file(ws.out / "config.json", json(config).dump(2) + "\n");
    std::vector<LegResult> legs;
    int failures = 0;
    LegResult teacher_leg;
    try {
      teacher_leg = run_teacher(config, records, ws);
      legs.push_back(teacher_leg);
    } catch (const std::exception& e) {
      spdlog::error("teacher leg failed: {}", e.what());
      io::write_file(ws.out / "results.csv", results_csv(legs));
      io::write_file(ws.out / "table.md", assemble_table({}).to_markdown());
      return kRuntimeError;
    }
    const auto teacher = load_checkpoint(ws.checkpoint("teacher"));
    const auto cache = ensure_embeddings(teacher, records, ws);

    struct Leg {
      int subset;
      std::uint64_t seed;
      bool student;
    };
    std::vector<Leg> plan;
    for (int s : subsets) {
      for (int k = 0; k < seeds; ++k) {
        plan.push_back({s, config.seed + static_cast<std::uint64_t>(k), true});
        plan.push_back({s, config.seed + static_cast<std::uint64_t>(k), false});
      }
    }

    if (jobs > 1) {
      std::vector<std::vector<std::string>> commands;
      for (const auto& l : plan) {
        std::vector<std::string> cmd = {"-q", l.student ? "train-student" : "train-baseline",
                                        "--data-dir", data_dir, "--out", out, "--config", (ws.out / "config.json").string(),
                                        "--subset", std::to_string(l.subset), "--seed", std::to_string(l.seed)};
        if (l.student && sweep) cmd.emplace_back("--sweep-alpha");
        commands.push_back(std::move(cmd));
      }
      const auto status = run_parallel(commands, jobs);
      for (std::size_t i = 0; i < status.size(); ++i) {
        if (status[i] != 0) {
          spdlog::warn("{} exited with {}, retrying in this process",
                       leg_name(plan[i].student ? "student" : "baseline", plan[i].subset, plan[i].seed), status[i]);
        }
      }
    }

    for (const auto& l : plan) {
      RunConfig c = config;
      c.subset = l.subset;
      c.seed = l.seed;
      try {
        // after --jobs this mostly collects finished checkpoints
        legs.push_back(run_reduced(c, l.student, sweep, records, ws, &teacher, &cache));
      } catch (const std::exception& e) {
        ++failures;
        spdlog::error("{} failed: {}", leg_name(l.student ? "student" : "baseline", l.subset, l.seed), e.what());
      }
    }

    std::vector<EvalReport> reports;
    for (const auto& l : legs) reports.push_back(l.report);
    const auto table = assemble_table(reports);
    io::write_file(ws.out / "results.csv", results_csv(legs));
    io::write_file(ws.out / "table.md", table.to_markdown());
    std::cout << table.to_markdown();
    if (failures) {
      spdlog::error("{} leg(s) failed and are reported as N/A", failures);
      return kRuntimeError;
    }
    return 0;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const IngestionError& e) {
    spdlog::error("{}", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
}
