#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hypercaps/baselines.hpp"
#include "hypercaps/importer.hpp"
#include "hypercaps/model_check.hpp"
#include "hypercaps/training.hpp"

namespace py = pybind11;
using namespace hypercaps;

namespace {

using PairTuple = std::tuple<std::string, std::string, int>;

Label to_label(int v) {
  if (v != 0 && v != 1) throw py::value_error("labels must be 0 or 1, got " + std::to_string(v));
  return v == 1 ? Label::positive : Label::negative;
}

std::vector<corpus::EntityPair> to_pairs(const std::vector<PairTuple>& rows) {
  std::vector<corpus::EntityPair> out;
  out.reserve(rows.size());
  for (const auto& [x1, x2, label] : rows) out.push_back({x1, x2, to_label(label)});
  return out;
}

std::vector<PairTuple> from_pairs(const std::vector<corpus::EntityPair>& pairs) {
  std::vector<PairTuple> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.emplace_back(p.hypernym, p.hyponym, static_cast<int>(p.label));
  return out;
}

// Unlabelled input is allowed for prediction.
std::vector<corpus::EntityPair> to_unlabelled(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<corpus::EntityPair> out;
  for (const auto& [x1, x2] : rows) out.push_back({x1, x2, Label::negative});
  return out;
}

struct Model {
  training::Checkpoint checkpoint;
  std::vector<training::EpochLog> log;
  std::string status = "loaded";
};

py::dict log_entry(const training::EpochLog& e) {
  py::dict d;
  d["epoch"] = e.epoch;
  d["train_loss"] = e.train_loss;
  d["val_precision"] = e.validation.precision;
  d["val_recall"] = e.validation.recall;
  d["val_f1"] = e.validation.f1;
  d["seconds"] = e.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hypercaps, m) {
  m.doc() = "Bi-GRU capsule network for compound-entity hypernymy detection";

  py::register_exception<corpus::CorpusError>(m, "CorpusError", PyExc_ValueError);
  py::register_exception<training::CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<numerics::DimensionError>(m, "DimensionError", PyExc_ValueError);

  m.def(
      "tokenize", [](const std::string& text, const std::string& mode) { return corpus::tokenize(text, corpus::parse_token_mode(mode)); },
      py::arg("text"), py::arg("mode") = "word", "Tokens with a trailing <EOS>.");

  m.def(
      "lcs_masks",
      [](const std::vector<std::string>& first, const std::vector<std::string>& second) {
        const auto masks = attention::lcs_membership<std::string>(first, second);
        return py::make_tuple(std::vector<int>(masks.first.begin(), masks.first.end()),
                              std::vector<int>(masks.second.begin(), masks.second.end()), masks.lcs_length);
      },
      py::arg("first"), py::arg("second"), "Per-token difference weights (0 on the LCS) and the LCS length; no EOS.");

  m.def(
      "attention_weights",
      [](const std::vector<int>& mask, double a, double b, bool softmax) {
        std::vector<std::uint8_t> w;
        for (int v : mask) {
          if (v != 0 && v != 1) throw py::value_error("mask entries must be 0 or 1");
          w.push_back(static_cast<std::uint8_t>(v));
        }
        return attention::attention_weights(w, attention::AttentionConfig{a, b, softmax, false});
      },
      py::arg("mask"), py::arg("a") = 1.0, py::arg("b") = 0.0, py::arg("softmax") = false);

  m.def(
      "squash",
      [](const std::vector<double>& s) {
        if (s.empty()) throw py::value_error("squash needs at least one value");
        return capsnet::squash_values(numerics::Tensor<double>::vector(s)).storage();
      },
      py::arg("s"));

  m.def(
      "margin_loss",
      [](double len_hypernymy, double len_none, int label, double m_plus, double m_minus, double absent_weight) {
        capsnet::LossConfig cfg{m_plus, m_minus, absent_weight};
        cfg.validate();
        return capsnet::margin_loss(len_hypernymy, len_none, to_label(label), cfg);
      },
      py::arg("len_hypernymy"), py::arg("len_none"), py::arg("label"), py::arg("m_plus") = 0.9,
      py::arg("m_minus") = 0.1, py::arg("absent_weight") = 1.0);

  m.def(
      "classify", [](double a, double b) { return static_cast<int>(capsnet::classify(a, b)); }, py::arg("len_hypernymy"),
      py::arg("len_none"));

  m.def(
      "string_containing",
      [](const std::string& x1, const std::string& x2, const std::string& mode) {
        return baselines::string_containing(x1, x2, corpus::parse_token_mode(mode));
      },
      py::arg("x1"), py::arg("x2"), py::arg("mode") = "word");
  m.def(
      "set_containing",
      [](const std::string& x1, const std::string& x2, const std::string& mode) {
        return baselines::set_containing(x1, x2, corpus::parse_token_mode(mode));
      },
      py::arg("x1"), py::arg("x2"), py::arg("mode") = "word");

  py::class_<training::Metrics>(m, "Metrics")
      .def_readonly("precision", &training::Metrics::precision)
      .def_readonly("recall", &training::Metrics::recall)
      .def_readonly("f1", &training::Metrics::f1)
      .def_property_readonly("tp", [](const training::Metrics& x) { return x.counts.tp; })
      .def_property_readonly("fp", [](const training::Metrics& x) { return x.counts.fp; })
      .def_property_readonly("fn", [](const training::Metrics& x) { return x.counts.fn; })
      .def_property_readonly("tn", [](const training::Metrics& x) { return x.counts.tn; })
      .def("accuracy", &training::Metrics::accuracy)
      .def("__repr__", [](const training::Metrics& x) {
        return "Metrics(precision=" + std::to_string(x.precision) + ", recall=" + std::to_string(x.recall) +
               ", f1=" + std::to_string(x.f1) + ")";
      });

  m.def(
      "score",
      [](const std::vector<int>& predicted, const std::vector<int>& gold) {
        std::vector<Label> p, g;
        for (int v : predicted) p.push_back(to_label(v));
        for (int v : gold) g.push_back(to_label(v));
        return training::score(p, g);
      },
      py::arg("predicted"), py::arg("gold"));

  m.def(
      "run_baseline",
      [](const std::string& method, const std::vector<PairTuple>& pairs, const std::string& mode) {
        return baselines::run_baseline(baselines::parse_method(method), to_pairs(pairs), corpus::parse_token_mode(mode));
      },
      py::arg("method"), py::arg("pairs"), py::arg("mode") = "word");

  m.def(
      "load_corpus", [](const std::filesystem::path& path) { return from_pairs(corpus::load_corpus(path)); },
      py::arg("path"), "List of (X1, X2, label) tuples.");

  m.def(
      "import_corpora",
      [](const std::filesystem::path& src, const std::filesystem::path& out) {
        std::vector<std::tuple<std::string, std::string, std::size_t, std::size_t>> rows;
        for (const auto& r : importer::import_corpora(src, out).rows) {
          rows.emplace_back(r.corpus, r.split, r.counts.positive, r.counts.negative);
        }
        return rows;
      },
      py::arg("src"), py::arg("out"), "Rows of (corpus, split, positive, negative).");

  m.def(
      "grad_check",
      [](std::uint64_t seed, std::size_t embed_dim, std::size_t hidden, std::size_t capsule_dim, std::size_t max_len,
         double eps) {
        model::ModelCheckConfig cfg;
        cfg.embed_dim = embed_dim;
        cfg.hidden_dim = hidden;
        cfg.capsule_dim = capsule_dim;
        cfg.max_length = max_len;
        cfg.eps = eps;
        const auto r = model::model_grad_check(cfg, seed);
        return py::make_tuple(r.report.max_relative_error, r.worst_param);
      },
      py::arg("seed") = 1, py::arg("embed_dim") = 8, py::arg("hidden") = 6, py::arg("capsule_dim") = 5,
      py::arg("max_len") = 4, py::arg("eps") = 1e-4, "Max relative error of the full-model gradient and its tensor.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("best_epoch", [](const Model& x) { return x.checkpoint.best_epoch; })
      .def_property_readonly("status", [](const Model& x) { return x.status; })
      .def_property_readonly("vocabulary_size", [](const Model& x) { return x.checkpoint.vocabulary.size(); })
      .def_property_readonly("log",
                             [](const Model& x) {
                               py::list out;
                               for (const auto& e : x.log) out.append(log_entry(e));
                               return out;
                             })
      .def(
          "evaluate",
          [](const Model& x, const std::vector<PairTuple>& pairs) {
            const auto p = to_pairs(pairs);
            py::gil_scoped_release release;
            return training::evaluate(x.checkpoint, p);
          },
          py::arg("pairs"))
      .def(
          "predict",
          [](const Model& x, const std::vector<std::pair<std::string, std::string>>& pairs) {
            const auto p = to_unlabelled(pairs);
            std::vector<model::Prediction> preds;
            {
              py::gil_scoped_release release;
              preds = training::predict(x.checkpoint, p);
            }
            std::vector<std::tuple<int, double, double>> out;
            for (const auto& q : preds) out.emplace_back(static_cast<int>(q.label), q.length_hypernymy, q.length_none);
            return out;
          },
          py::arg("pairs"), "(label, ||v1||, ||v2||) per (X1, X2).")
      .def("save", [](const Model& x, const std::filesystem::path& path) { training::save_checkpoint(path, x.checkpoint); })
      .def("to_bytes", [](const Model& x) { return py::bytes(training::serialize_checkpoint(x.checkpoint)); });

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        Model x;
        x.checkpoint = training::load_checkpoint(path);
        return x;
      },
      py::arg("path"));

  m.def(
      "train",
      [](const std::vector<PairTuple>& train_rows, const std::vector<PairTuple>& validation_rows, const std::string& mode,
         std::uint64_t seed, std::size_t batch_size, const std::string& attn, int routing_iters, std::size_t embed_dim,
         std::size_t hidden, std::size_t capsule_dim, std::size_t patience, std::size_t max_epochs,
         const std::string& precision, std::size_t workers) {
        training::TrainConfig cfg;
        cfg.mode = corpus::parse_token_mode(mode);
        cfg.seed = seed;
        cfg.batch_size = batch_size;
        cfg.model.attention = attn.find(',') == std::string::npos ? attention::named_variant(attn)
                                                                   : attention::parse_attention(attn);
        cfg.model.routing_iterations = routing_iters;
        cfg.model.embed_dim = embed_dim;
        cfg.model.hidden_dim = hidden;
        cfg.model.capsule_dim = capsule_dim;
        cfg.patience = patience;
        cfg.max_epochs = max_epochs;
        cfg.precision = training::parse_precision(precision);
        cfg.workers = workers;
        const auto tr = to_pairs(train_rows);
        const auto va = to_pairs(validation_rows);
        training::TrainResult result;
        {
          py::gil_scoped_release release;
          result = training::train(cfg, tr, va);
        }
        Model x;
        x.checkpoint = std::move(result.best);
        x.log = std::move(result.log);
        x.status = result.status == training::TrainStatus::completed       ? "completed"
                   : result.status == training::TrainStatus::early_stopped ? "early_stopped"
                                                                            : "diverged: " + result.diagnostic;
        return x;
      },
      py::arg("train"), py::arg("validation") = std::vector<PairTuple>{}, py::kw_only(), py::arg("mode") = "word",
      py::arg("seed") = 1, py::arg("batch_size") = 128, py::arg("attn") = "1,0", py::arg("routing_iters") = 2,
      py::arg("embed_dim") = 256, py::arg("hidden") = 64, py::arg("capsule_dim") = 64, py::arg("patience") = 5,
      py::arg("max_epochs") = 100, py::arg("precision") = "float32", py::arg("workers") = 0);
}
