#include <doctest.h>

#include <cmath>
#include <set>

#include "ecgcl/training.hpp"
#include "support.hpp"

using namespace ecgcl;

namespace {

RunConfig tiny_run(int subset = 12, std::uint64_t seed = 1) {
  RunConfig c;
  c.encoder.depth = 2;
  c.encoder.filters_per_branch = 4;
  c.encoder.bottleneck_channels = 4;
  c.encoder.kernel_lengths = {9, 5, 3};
  c.embedding_dim = 16;
  c.hidden_dim = 8;
  c.optimizer.batch_size = 16;
  c.optimizer.learning_rate = 3e-3;
  c.optimizer.max_epochs = 2;
  c.subset = subset;
  c.seed = seed;
  return c;
}

const std::vector<EcgRecord>& corpus() {
  static const std::vector<EcgRecord> records = [] {
    auto r = make_synthetic_corpus(120, 5);
    normalize_corpus(r, SplitSpec{});
    return r;
  }();
  return records;
}

const TrainResult& teacher() {
  static const TrainResult t = train_teacher(tiny_run(), corpus());
  return t;
}

}  // namespace

TEST_CASE("teacher log and manifest") {
  const auto& t = teacher();
  REQUIRE(t.log.size() == 2);
  CHECK(t.log[0].epoch == 1);
  CHECK(t.log[0].train_sim == 0.0);
  CHECK(t.log[0].train_total == t.log[0].train_cls);
  const auto& m = t.checkpoint.manifest;
  CHECK(m.at("kind") == "teacher");
  CHECK(m.at("config_hash") == tiny_run().hash());
  CHECK(m.at("epoch").get<int>() == t.best_epoch);
  CHECK(t.eval.pseudo);
  CHECK(t.eval.subset == "12");
}

TEST_CASE("zero epochs returns the initial model") {
  auto c = tiny_run();
  c.optimizer.max_epochs = 0;
  const auto r = train_teacher(c, corpus());
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
  CHECK(r.eval.macro_auc >= 0.0);
  CHECK(r.eval.macro_auc <= 1.0);
  CHECK(state_hash(r.checkpoint.model) ==
        state_hash(init_bundle<float>(c.bundle_config(), c.lead_subset(), derive_seed(1, "teacher.init")).state_dict()));
}

TEST_CASE("training is deterministic and seed sensitive") {
  const auto again = train_teacher(tiny_run(), corpus());
  CHECK(again.checkpoint.content_hash() == teacher().checkpoint.content_hash());
  const auto other = train_teacher(tiny_run(12, 2), corpus());
  CHECK(other.checkpoint.content_hash() != teacher().checkpoint.content_hash());
  CHECK(other.log[0].train_cls != teacher().log[0].train_cls);
}

TEST_CASE("embedding cache equals a direct forward pass") {
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  CHECK(cache.teacher_hash == teacher().checkpoint.content_hash());
  CHECK(cache.dim() == 16);
  // train folds 1-8 plus eval fold 9
  CHECK(cache.record_ids.size() == 108);
  CHECK(std::is_sorted(cache.record_ids.begin(), cache.record_ids.end()));
  CHECK_FALSE(cache.find(10).has_value());  // fold 10

  auto model = bundle_from_checkpoint(teacher().checkpoint);
  const RunConfig c = tiny_run();
  const BatchBuilder b(corpus(), model.subset(), model.encoder.required_pad(), c.metadata, true);
  for (std::size_t i : {0u, 4u, 57u}) {
    const std::size_t one[] = {i};
    const Mat<float> direct = model.embed(b.signals(one), b.metadata(one), Mode::eval);
    const auto row = cache.find(corpus()[i].ecg_id);
    REQUIRE(row.has_value());
    CHECK((direct - cache.matrix.row(*row)).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("embedding cache byte round trip") {
  TempDir tmp("cache");
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  cache.save(tmp / "emb.bin");
  const auto back = TeacherEmbeddingCache::load(tmp / "emb.bin");
  CHECK(back.matrix == cache.matrix);
  CHECK(back.record_ids == cache.record_ids);
  CHECK(back.teacher_hash == cache.teacher_hash);
  CHECK(back.to_bytes() == cache.to_bytes());
  CHECK(cache.to_bytes().substr(0, 7) == "ECGEMB1");

  std::string bad = cache.to_bytes();
  bad[0] = 'X';
  CHECK_THROWS(TeacherEmbeddingCache::from_bytes(bad));
}

TEST_CASE("student copies and keeps the teacher classifier") {
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  auto c = tiny_run(3);
  c.loss.alpha = 0.5;
  const auto s = train_student(c, corpus(), &cache, teacher().checkpoint);
  CHECK(s.checkpoint.manifest.at("classifier_hash") == teacher().checkpoint.manifest.at("classifier_hash"));
  for (const auto& [name, t] : s.checkpoint.model) {
    if (name.rfind("classifier.", 0) == 0) CHECK(t == teacher().checkpoint.model.at(name));
  }
  CHECK(s.checkpoint.manifest.at("teacher_hash") == teacher().checkpoint.content_hash());
  CHECK(s.eval.pseudo);
  CHECK(s.eval.subset == "3");

  // the logged total decomposes into its parts
  for (const auto& e : s.log) {
    CHECK(e.train_sim > 0.0);
    CHECK(std::fabs(e.train_total - (e.train_cls + 0.5 * e.train_sim)) < 1e-6);
  }
}

TEST_CASE("alpha zero leaves only the classification term") {
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  auto c = tiny_run(2);
  c.loss.alpha = 0.0;
  c.optimizer.max_epochs = 1;
  const auto s = train_student(c, corpus(), &cache, teacher().checkpoint);
  CHECK(s.log[0].train_total == s.log[0].train_cls);
}

TEST_CASE("on-the-fly targets match cached targets") {
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  auto c = tiny_run(2);
  c.optimizer.max_epochs = 1;
  const auto cached = train_student(c, corpus(), &cache, teacher().checkpoint);
  c.teacher_on_the_fly = true;
  const auto live = train_student(c, corpus(), nullptr, teacher().checkpoint);
  CHECK(live.checkpoint.manifest.at("targets") == "on_the_fly");
  CHECK(live.log[0].train_sim == doctest::Approx(cached.log[0].train_sim).epsilon(1e-5));
}

TEST_CASE("student argument checks") {
  const auto cache = export_teacher_embeddings(teacher().checkpoint, corpus());
  CHECK_THROWS_AS(train_student(tiny_run(12), corpus(), &cache, teacher().checkpoint), std::invalid_argument);
  CHECK_THROWS_AS(train_student(tiny_run(3), corpus(), nullptr, teacher().checkpoint), std::invalid_argument);

  auto wide = tiny_run(3);
  wide.embedding_dim = 32;
  CHECK_THROWS_AS(train_student(wide, corpus(), &cache, teacher().checkpoint), std::invalid_argument);

  TeacherEmbeddingCache partial = cache;
  partial.matrix = cache.matrix.bottomRows(cache.matrix.rows() - 1);
  partial.record_ids.erase(partial.record_ids.begin());
  try {
    train_student(tiny_run(3), corpus(), &partial, teacher().checkpoint);
    FAIL("missing cache rows were accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("lacks rows for 1 training records") != std::string::npos);
  }
}

TEST_CASE("baseline trains all parameters with plain BCE") {
  auto c = tiny_run(2);
  const auto b = train_baseline(c, corpus());
  CHECK_FALSE(b.eval.pseudo);
  CHECK(b.checkpoint.manifest.at("kind") == "baseline");
  for (const auto& e : b.log) CHECK(e.train_sim == 0.0);
  if (b.best_epoch > 0) {
    auto init = init_bundle<float>(c.bundle_config(), c.lead_subset(), derive_seed(1, "reduced.init"));
    CHECK(b.checkpoint.model.at("classifier.fc1.weight") != init.state_dict().at("classifier.fc1.weight"));
  }
}

TEST_CASE("checkpoint reload reproduces the eval metric") {
  TempDir tmp("reload");
  save_checkpoint(tmp / "t", teacher().checkpoint);
  const auto loaded = load_checkpoint(tmp / "t");
  const auto r = evaluate_checkpoint(loaded, corpus(), 9);
  CHECK(std::fabs(r.macro_auc - teacher().eval.macro_auc) < 1e-6);
  CHECK(r.pseudo);
}

TEST_CASE("run config json round trip and hash") {
  RunConfig c = tiny_run(4, 7);
  c.loss.sim_kind = SimilarityKind::cosine;
  c.encoder.padding = Padding::circular;
  c.data_dir = "/data";
  c.out_dir = "/out";
  const nlohmann::json j = c;
  RunConfig back;
  from_json(j, back);
  CHECK(nlohmann::json(back) == j);
  CHECK(back.hash() == c.hash());

  RunConfig moved = c;
  moved.data_dir = "/elsewhere";
  CHECK(moved.hash() == c.hash());
  moved.loss.alpha = 0.3;
  CHECK(moved.hash() != c.hash());

  RunConfig partial;
  from_json(nlohmann::json{{"optimizer", {{"batch_size", 64}}}}, partial);
  CHECK(partial.optimizer.batch_size == 64);
  CHECK(partial.optimizer.learning_rate == 1e-3);
  CHECK(partial.encoder.depth == 6);

  CHECK_THROWS_AS(from_json(nlohmann::json{{"alpah", 1}}, partial), std::invalid_argument);
  CHECK_THROWS_AS(from_json(nlohmann::json{{"encoder", {{"padding", "reflect"}}}}, partial), std::invalid_argument);
}

TEST_CASE("run config defaults and validation") {
  const RunConfig d;
  CHECK(d.optimizer.batch_size == 128);
  CHECK(d.optimizer.max_epochs == 50);
  CHECK(d.optimizer.patience == 10);
  CHECK(d.embedding_dim == 128);
  CHECK(d.bundle_config().metadata_dim == 36);
  CHECK(d.student_arch == "inception");
  d.validate();

  RunConfig bad = d;
  bad.student_arch = "resnet";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.optimizer.kind = "sgd";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.subset = 5;
  CHECK_THROWS(bad.validate());
  bad = d;
  bad.use_metadata = false;
  CHECK(bad.bundle_config().metadata_dim == 0);
}

TEST_CASE("derived seeds are distinct per purpose and root") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t root : {0ULL, 1ULL, 2ULL}) {
    for (const char* p : {"teacher.init", "teacher.shuffle", "reduced.init", "reduced.shuffle"}) seen.insert(derive_seed(root, p));
  }
  CHECK(seen.size() == 12);
  CHECK(derive_seed(1, "teacher.init") == derive_seed(1, "teacher.init"));
}

TEST_CASE("training log csv") {
  const std::vector<EpochLog> log = {{1, 0.5, 0.25, 0.625, 0.75}};
  CHECK(training_log_csv(log) == "epoch,train_cls,train_sim,train_total,eval_macro_auc\n1,0.5,0.25,0.625,0.75\n");
}

TEST_CASE("batch builder selects leads and rejects ragged corpora") {
  const auto sub = LeadSubset::standard(3);
  const MetadataEncoderConfig meta;
  const BatchBuilder b(corpus(), sub, 4, meta, true);
  const std::size_t idx[] = {2, 9};
  const auto s = b.signals(idx);
  CHECK(s.channels() == 3);
  CHECK(s.data(s.row(1, 10), 2) == corpus()[9].signal(7, 10));
  CHECK(s.data(s.row(0, -1), 0) == 0.0f);
  CHECK(b.metadata(idx).cols() == 36);
  CHECK(b.labels(idx)(0, 0) == corpus()[2].label[0]);

  auto ragged = corpus();
  ragged[1].signal.conservativeResize(12, 500);
  CHECK_THROWS_AS(BatchBuilder(ragged, sub, 4, meta, true), ShapeError);
}
