#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "brsm/core.hpp"
#include "brsm/data.hpp"
#include "brsm/gradcheck.hpp"
#include "brsm/grammar.hpp"
#include "brsm/learning.hpp"
#include "brsm/metrics.hpp"
#include "brsm/trainer.hpp"

namespace py = pybind11;

namespace {

// Thin stateful wrapper so python callers can step a layer without juggling
// the state object.
class PyRsmModel {
  public:
    PyRsmModel(int groups, int cells_per_group, int winners, int input_dim,
               std::uint64_t seed, const brsm::RsmOptions& opts)
        : rng_(seed),
          layer_(brsm::LayerGeometry{groups, cells_per_group, winners, input_dim, {}}, opts,
                 rng_),
          state_(layer_.make_state()) {}

    py::dict step(const brsm::Vector& input, bool update_stats) {
        const brsm::StepOutput out = layer_.forward(input, state_, update_stats);
        py::dict d;
        d["prediction"] = out.prediction;
        d["activation"] = out.activation;
        d["winners"] = out.winner_cells;
        d["trace"] = state_.trace;
        d["rec_input"] = state_.rec_input;
        return d;
    }

    void reset_state() { state_ = layer_.make_state(); }
    brsm::Vector duty() const { return layer_.duty(); }
    double boost_strength() const { return layer_.boost_strength(); }

  private:
    brsm::Rng rng_;
    brsm::RsmLayer layer_;
    brsm::LayerState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "boosted recurrent sparse memory: core operations";

    py::register_exception<brsm::Error>(m, "BrsmError");

    py::class_<brsm::GrammarSpec>(m, "Grammar")
        .def(py::init([](const std::vector<std::vector<int>>& rows) {
                 brsm::GrammarSpec g;
                 g.rows = rows;
                 int max_label = 0;
                 for (const auto& row : rows)
                     for (int l : row) max_label = std::max(max_label, l);
                 g.alphabet = std::max(10, max_label + 1);
                 g.validate();
                 return g;
             }),
             py::arg("rows"))
        .def_static("builtin_8x9", &brsm::GrammarSpec::builtin_8x9)
        .def_static("from_text", &brsm::GrammarSpec::from_text)
        .def("to_text", &brsm::GrammarSpec::to_text)
        .def_property_readonly("rows",
                               [](const brsm::GrammarSpec& g) { return g.rows; })
        .def_property_readonly("alphabet",
                               [](const brsm::GrammarSpec& g) { return g.alphabet; });

    m.def(
        "gen_grammar",
        [](int m_, int n_, std::uint64_t seed, bool distinct_prefix, int alphabet) {
            brsm::Rng rng(seed);
            return brsm::gen_grammar(m_, n_, rng, distinct_prefix, alphabet);
        },
        py::arg("subsequences"), py::arg("length"), py::arg("seed") = 1,
        py::arg("distinct_prefix") = false, py::arg("alphabet") = 10);

    m.def(
        "sample_stream",
        [](const brsm::GrammarSpec& g, int length, std::uint64_t seed) {
            brsm::Rng rng(seed);
            return brsm::sample_stream(g, length, rng);
        },
        py::arg("grammar"), py::arg("length"), py::arg("seed") = 1);

    m.def("ceiling_exact", &brsm::ceiling_exact, py::arg("grammar"),
          "Expected accuracy of the Bayes-optimal predictor, computed exactly.");

    m.def(
        "ceiling_montecarlo",
        [](const brsm::GrammarSpec& g, long steps, std::uint64_t seed) {
            brsm::Rng rng(seed);
            const brsm::MonteCarloEstimate est = brsm::ceiling_montecarlo(g, steps, rng);
            return py::make_tuple(est.accuracy, est.stderr_est);
        },
        py::arg("grammar"), py::arg("steps"), py::arg("seed") = 1);

    m.def("ngram_accuracy", &brsm::ngram_accuracy, py::arg("stream"), py::arg("order"),
          py::arg("alphabet") = 10);

    m.def("synthetic_embedding", &brsm::synthetic_embedding, py::arg("index"),
          py::arg("vocab_size"));

    m.def("layer_entropy", &brsm::layer_entropy, py::arg("duty"));
    m.def("max_entropy", &brsm::max_entropy, py::arg("winners"), py::arg("groups"),
          py::arg("cells_per_group") = 1);
    m.def("perplexity", &brsm::perplexity, py::arg("log_probs"));
    m.def("accuracy", &brsm::accuracy, py::arg("predicted"), py::arg("truth"));
    m.def("mse_loss", &brsm::mse_loss, py::arg("prediction"), py::arg("target"));

    py::class_<PyRsmModel>(m, "RsmModel")
        .def(py::init([](int groups, int cells_per_group, int winners, int input_dim,
                         std::uint64_t seed, double boost_strength, bool trainable_decay) {
                 brsm::RsmOptions opts;
                 opts.boost_strength = boost_strength;
                 opts.trainable_decay = trainable_decay;
                 if (boost_strength == 0.0) opts.strategy = brsm::UtilizationStrategy::None;
                 return PyRsmModel(groups, cells_per_group, winners, input_dim, seed, opts);
             }),
             py::arg("groups"), py::arg("cells_per_group"), py::arg("winners"),
             py::arg("input_dim"), py::arg("seed") = 1, py::arg("boost_strength") = 1.2,
             py::arg("trainable_decay") = false)
        .def("step", &PyRsmModel::step, py::arg("input"), py::arg("update_stats") = true)
        .def("reset_state", &PyRsmModel::reset_state)
        .def("duty", &PyRsmModel::duty)
        .def("boost_strength", &PyRsmModel::boost_strength);

    m.def(
        "run_gradcheck",
        [](std::uint64_t seed, int instances, double tolerance) {
            brsm::GradCheckOptions opts;
            opts.instances = instances;
            opts.tolerance = tolerance;
            const brsm::GradCheckReport report = brsm::run_gradcheck(seed, opts);
            py::dict d;
            d["passed"] = report.passed();
            d["report"] = report.to_string();
            py::dict tensors;
            for (const auto& t : report.tensors) tensors[t.name.c_str()] = t.max_rel_error;
            d["max_rel_error"] = tensors;
            return d;
        },
        py::arg("seed") = 1, py::arg("instances") = 5, py::arg("tolerance") = 1e-4);
}
