#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ecgcl/training.hpp"

namespace py = pybind11;
using namespace ecgcl;

namespace {

py::dict report_dict(const EvalReport& r) {
  py::dict classes;
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes[py::str(r.class_names[c])] = r.class_auc[c] ? py::cast(*r.class_auc[c]) : py::none();
  }
  py::dict d;
  d["subset"] = r.subset;
  d["pseudo"] = r.pseudo;
  d["macro_auc"] = r.macro_auc;
  d["n_eval"] = r.n_eval;
  d["class_auc"] = classes;
  return d;
}

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reduced-lead ECG toolkit: losses, metrics, metadata encoding and training entry points";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<TrainingDivergence>(m, "TrainingDivergence", PyExc_RuntimeError);

  m.def(
      "similarity",
      [](const Mat<double>& v12, const Mat<double>& vx, const std::string& kind) {
        return similarity(v12, vx, similarity_kind_from_string(kind));
      },
      py::arg("v12"), py::arg("vx"), py::arg("kind") = "l2", "Batch mean of the per-row distance (l1, l2 or cosine).");
  m.def(
      "classification_loss", [](const Mat<double>& logits, const Mat<double>& targets) {
        return classification_loss(logits, targets);
      },
      py::arg("logits"), py::arg("targets"), "Mean binary cross-entropy over every element.");
  m.def(
      "total_loss",
      [](const Mat<double>& logits, const Mat<double>& targets, const Mat<double>& v12, const Mat<double>& vx,
         const std::string& kind, double alpha) {
        const auto t = total_loss(logits, targets, v12, vx, LossConfig{similarity_kind_from_string(kind), alpha});
        py::dict d;
        d["cls"] = t.cls;
        d["sim"] = t.sim;
        d["total"] = t.total;
        return d;
      },
      py::arg("logits"), py::arg("targets"), py::arg("v12"), py::arg("vx"), py::arg("kind") = "l2",
      py::arg("alpha") = 1.0);

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) -> std::optional<double> {
        if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
        return roc_auc(std::span<const double>(scores), std::span<const int>(labels));
      },
      py::arg("scores"), py::arg("labels"), "Mann-Whitney AUC with ties as one half; None for a single class.");
  m.def(
      "macro_auc", [](const Mat<double>& scores, const Mat<double>& labels) { return report_dict(macro_auc(scores, labels)); },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "soft_encode",
      [](std::optional<double> age, std::optional<std::string> sex, std::optional<double> height,
         std::optional<double> weight) {
        PatientInfo p{age, std::nullopt, height, weight};
        if (sex) {
          if (*sex == "male" || *sex == "M") p.sex = Sex::male;
          else if (*sex == "female" || *sex == "F") p.sex = Sex::female;
          else throw std::invalid_argument("sex must be 'male' or 'female'");
        }
        return soft_encode(p, MetadataEncoderConfig{});
      },
      py::arg("age") = py::none(), py::arg("sex") = py::none(), py::arg("height") = py::none(),
      py::arg("weight") = py::none(), "Default 36-value soft encoding of patient metadata.");

  m.def("lead_subset", [](int size) { return LeadSubset::standard(size).indices(); }, py::arg("size"));

  m.def(
      "make_synthetic_corpus",
      [](int n, std::uint64_t seed) {
        const auto records = make_synthetic_corpus(n, seed);
        py::list out;
        for (const auto& r : records) {
          py::dict d;
          d["ecg_id"] = r.ecg_id;
          d["fold"] = r.fold;
          d["signal"] = Mat<float>(r.signal);
          d["label"] = std::vector<int>(r.label.begin(), r.label.end());
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("seed"), "Synthetic 12 x 1000 records as dicts (signal is a float32 array).");

  m.def("desk_config", [] { return json_to_py(desk_config()); }, "Small CPU run config as a dict.");
  m.def(
      "config_hash",
      [](const py::object& cfg) {
        RunConfig c;
        from_json(py_to_json(cfg), c);
        return c.hash();
      },
      py::arg("config"));

  m.def(
      "load_manifest", [](const std::string& dir) { return json_to_py(load_checkpoint(dir).manifest); }, py::arg("dir"),
      "Manifest of a checkpoint directory after verifying its content hash.");
  m.def(
      "evaluate_checkpoint",
      [](const std::string& checkpoint, const std::string& corpus, int fold) {
        const auto ckpt = load_checkpoint(checkpoint);
        return report_dict(evaluate_checkpoint(ckpt, load_corpus(corpus), fold));
      },
      py::arg("checkpoint"), py::arg("corpus"), py::arg("fold") = 9);
  m.def(
      "load_embeddings",
      [](const std::string& path) {
        const auto c = TeacherEmbeddingCache::load(path);
        return py::make_tuple(c.matrix, c.record_ids, c.teacher_hash);
      },
      py::arg("path"), "Teacher embedding cache as (matrix, record_ids, teacher_hash).");
}
