#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hner/checkpoint.hpp"
#include "hner/cli.hpp"
#include "hner/crf.hpp"
#include "hner/data.hpp"
#include "hner/gradcheck.hpp"
#include "hner/metrics.hpp"
#include "hner/model.hpp"
#include "hner/tensor.hpp"
#include "hner/tokenizer.hpp"
#include "hner/trainer.hpp"

namespace py = pybind11;
using namespace hner;

namespace {

TensorPtr tensor_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("empty matrix");
    const int m = static_cast<int>(rows.size());
    const int n = static_cast<int>(rows[0].size());
    auto t = make_tensor({m, n});
    for (int i = 0; i < m; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw std::invalid_argument("ragged matrix");
        for (int j = 0; j < n; ++j) t->at(i, j) = rows[i][j];
    }
    return t;
}

CrfParameters crf_from_lists(const std::vector<std::vector<double>>& transitions,
                             const std::vector<double>& start,
                             const std::vector<double>& end) {
    CrfParameters crf;
    crf.transitions = tensor_from_rows(transitions);
    crf.start_scores = make_tensor({1, static_cast<int>(start.size())}, 0.0);
    crf.start_scores->data = start;
    crf.end_scores = make_tensor({1, static_cast<int>(end.size())}, 0.0);
    crf.end_scores->data = end;
    return crf;
}

}  // namespace

PYBIND11_MODULE(_hner, m) {
    m.doc() = "hierarchical NER core: tokenizer, CRF, metrics, model, training";

    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("from_entries", &Vocabulary::from_entries, py::arg("entries"),
                    py::arg("continuation_prefix") = "##")
        .def_static("load", &Vocabulary::load)
        .def("__len__", &Vocabulary::size)
        .def("id_of", &Vocabulary::id_of)
        .def("piece", &Vocabulary::piece)
        .def_property_readonly("entries", &Vocabulary::entries);

    py::class_<TokenizedSentence>(m, "TokenizedSentence")
        .def_readonly("words", &TokenizedSentence::words)
        .def_readonly("subword_ids", &TokenizedSentence::subword_ids)
        .def_readonly("word_first_index", &TokenizedSentence::word_first_index);

    m.def("tokenize_word", &tokenize_word);
    m.def("tokenize_sentence", &tokenize_sentence, py::arg("words"), py::arg("vocab"),
          py::arg("add_boundaries") = true);

    py::class_<LabelScheme>(m, "LabelScheme")
        .def(py::init<std::vector<std::string>>())
        .def_property_readonly("labels", &LabelScheme::labels)
        .def("id_of", &LabelScheme::id_of)
        .def("label", &LabelScheme::label)
        .def_property_readonly("num_labels", &LabelScheme::num_labels);

    m.def("logsumexp", [](const std::vector<double>& v) { return logsumexp(v); });
    m.def("softmax", [](const std::vector<double>& v) { return softmax(v); });

    m.def("viterbi_decode",
          [](const std::vector<std::vector<double>>& emissions,
             const std::vector<std::vector<double>>& transitions,
             const std::vector<double>& start, const std::vector<double>& end,
             const LabelScheme& scheme) {
              auto crf = crf_from_lists(transitions, start, end);
              auto mask = build_constraint_mask(scheme);
              return viterbi_decode(*tensor_from_rows(emissions), crf, mask);
          },
          py::arg("emissions"), py::arg("transitions"), py::arg("start"), py::arg("end"),
          py::arg("scheme"));

    m.def("log_partition",
          [](const std::vector<std::vector<double>>& emissions,
             const std::vector<std::vector<double>>& transitions,
             const std::vector<double>& start, const std::vector<double>& end) {
              auto crf = crf_from_lists(transitions, start, end);
              return log_partition(nullptr, tensor_from_rows(emissions), crf)->data[0];
          });

    m.def("crf_nll",
          [](const std::vector<std::vector<double>>& emissions,
             const std::vector<std::vector<double>>& transitions,
             const std::vector<double>& start, const std::vector<double>& end,
             const std::vector<int>& gold) {
              auto crf = crf_from_lists(transitions, start, end);
              return nll_loss(nullptr, tensor_from_rows(emissions), crf, gold)->data[0];
          });

    py::class_<EntitySpan>(m, "EntitySpan")
        .def_readonly("entity_type", &EntitySpan::entity_type)
        .def_readonly("start", &EntitySpan::start)
        .def_readonly("end", &EntitySpan::end)
        .def("__repr__", [](const EntitySpan& s) {
            return s.entity_type + "[" + std::to_string(s.start) + "," +
                   std::to_string(s.end) + ")";
        });

    m.def("extract_spans", &extract_spans, py::arg("tags"), py::arg("strict") = false);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("micro_precision", &EvalReport::micro_precision)
        .def_readonly("micro_recall", &EvalReport::micro_recall)
        .def_readonly("micro_f1", &EvalReport::micro_f1)
        .def_readonly("macro_precision", &EvalReport::macro_precision)
        .def_readonly("macro_recall", &EvalReport::macro_recall)
        .def_readonly("macro_f1", &EvalReport::macro_f1)
        .def("to_json", &EvalReport::to_json)
        .def("to_table", &EvalReport::to_table);

    m.def("evaluate_tags", &evaluate_tags, py::arg("gold_tags"), py::arg("pred_tags"),
          py::arg("strict") = false);

    m.def("ema_closed_form", [](double lam, double shadow0,
                                const std::vector<double>& stream) {
        double s = shadow0;
        for (double x : stream) s = lam * s + (1 - lam) * x;
        return s;
    });

    m.def("gradcheck", [](unsigned long long seed, double eps, const std::string& kind) {
        return gradcheck_model(seed, eps, word_layer_kind_from_string(kind)).max_rel_err;
    }, py::arg("seed") = 7, py::arg("eps") = 1e-5, py::arg("kind") = "transformer");

    m.def("run_cli", &run_cli, py::arg("args"),
          "run the command-line interface; returns the exit code");
}
