#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "frustra/error.hpp"
#include "frustra/frustration.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/graph_io.hpp"
#include "frustra/inference.hpp"
#include "frustra/model_io.hpp"
#include "frustra/monotonicity.hpp"
#include "frustra/null_models.hpp"
#include "frustra/report.hpp"
#include "frustra/stats.hpp"
#include "frustra/synthetic.hpp"

namespace py = pybind11;
using namespace frustra;

namespace {

using ModelPtr = std::shared_ptr<const Model>;

struct PyNetwork {
  ModelPtr model;
  Network net;
  explicit PyNetwork(ModelPtr m) : model(std::move(m)), net(model->manifest, model->store) {}
};

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

template <typename T, typename U>
py::array_t<T> to_array(std::span<const U> v) {
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::dict trace_dict(const ActivationTrace& t) {
  py::dict d;
  d["logits"] = to_array(t.logits);
  d["predicted_class"] = t.predicted_class;
  d["predicted_tie"] = t.predicted_tie;
  d["state"] = to_array(t.state);
  d["active"] = to_array(t.active);
  return d;
}

}  // namespace

PYBIND11_MODULE(_frustra, m) {
  m.doc() = "Frustration index and near-monotonicity of feed-forward networks";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("input_shape", [](const Model& x) { return x.manifest.input_shape().dims(); })
      .def_property_readonly("output_size", [](const Model& x) { return x.manifest.output_size(); })
      .def_property_readonly("layers",
                             [](const Model& x) {
                               std::vector<std::pair<std::string, std::string>> out;
                               for (const auto& l : x.manifest.layers()) out.emplace_back(l.id, to_string(l.kind));
                               return out;
                             })
      .def("save", [](const Model& x, const std::filesystem::path& p) { save_model(p, x.manifest, x.store); },
           py::arg("manifest_path"))
      .def("manifest_json", [](const Model& x) { return manifest_to_json(x.manifest); });

  m.def("generate_synthetic",
        [](const std::string& name, std::uint64_t seed) {
          return std::make_shared<Model>(generate_synthetic(seed, parse_template(name)));
        },
        py::arg("template") = "tiny_cnn", py::arg("seed") = 1);
  m.def("load_model", [](const std::filesystem::path& p) { return std::make_shared<Model>(load_manifest(p)); },
        py::arg("manifest_path"));

  py::class_<SignedSparseGraph>(m, "Graph")
      .def_property_readonly("node_count", &SignedSparseGraph::node_count)
      .def_property_readonly("edge_count", &SignedSparseGraph::edge_count)
      .def("total_abs_weight", &SignedSparseGraph::total_abs_weight)
      .def("coo",
           [](const SignedSparseGraph& g) {
             return py::make_tuple(to_array(g.edge_rows()), to_array<std::int64_t>(g.cols()),
                                   to_array<double>(g.weights()));
           },
           "(rows, cols, weights); entry (i, j) is the edge j -> i")
      .def("layers",
           [](const SignedSparseGraph& g) {
             std::vector<std::tuple<std::string, std::string, std::int64_t, std::int64_t>> out;
             for (const auto& b : g.layers()) out.emplace_back(b.id, to_string(b.kind), b.begin, b.count);
             return out;
           })
      .def("save", [](const SignedSparseGraph& g, const std::filesystem::path& p) { write_graph(p, g); })
      .def_static("load", [](const std::filesystem::path& p) { return read_graph(p); });

  m.def("build_graph", [](const Model& x) { return assemble(x.manifest, x.store); }, py::arg("model"));
  m.def("from_edges",
        [](std::int64_t n, const std::vector<std::int64_t>& rows, const std::vector<std::int64_t>& cols,
           const std::vector<double>& weights) {
          if (rows.size() != cols.size() || rows.size() != weights.size()) {
            throw ValidationError("rows, cols and weights differ in length");
          }
          std::vector<Triplet> t;
          for (std::size_t k = 0; k < rows.size(); ++k) t.push_back({rows[k], cols[k], weights[k], {}});
          return SignedSparseGraph::from_triplets(n, std::move(t));
        },
        py::arg("node_count"), py::arg("rows"), py::arg("cols"), py::arg("weights"));

  m.def("frustration",
        [](const SignedSparseGraph& g, std::int64_t replicas, std::int64_t initial_flips, std::int64_t max_iterations,
           std::uint64_t seed, bool domain_moves) {
          ReplicaConfig cfg{replicas, initial_flips, max_iterations, seed, domain_moves, false};
          ReplicaSet set;
          {
            py::gil_scoped_release release;
            set = run_replicas(SymmetrizedView(g), cfg);
          }
          std::vector<double> eps;
          for (const auto& r : set.replicas) eps.push_back(r.epsilon);
          py::dict d;
          d["epsilon"] = set.best_result().epsilon;
          d["best_replica"] = set.best;
          d["replicas"] = to_array(eps);
          d["spins"] = to_array(set.best_result().spins);
          return d;
        },
        py::arg("graph"), py::arg("replicas") = 80, py::arg("initial_flips") = 1'000'000,
        py::arg("max_iterations") = 100'000'000, py::arg("seed") = 0, py::arg("domain_moves") = true);
  m.def("brute_force",
        [](const SignedSparseGraph& g, std::int64_t max_nodes) {
          auto r = brute_force_frustration(SymmetrizedView(g), max_nodes);
          return py::make_tuple(r.epsilon, to_array(r.spins));
        },
        py::arg("graph"), py::arg("max_nodes") = 20);

  m.def("null_graph",
        [](const Model& x, const std::string& kind, std::uint64_t seed, std::optional<std::string> init) {
          NullModelSpec spec{parse_null_kind(kind), seed, std::nullopt};
          if (init) spec.n3_init = parse_init_scheme(*init);
          spec.validate();
          if (spec.kind == NullKind::n3) return assemble(x.manifest, n3_reinit(x.manifest, x.store, spec));
          auto g = assemble(x.manifest, x.store);
          return spec.kind == NullKind::n1 ? n1_shuffle(g, seed) : n2_shuffle(g, seed);
        },
        py::arg("model"), py::arg("kind"), py::arg("seed") = 0, py::arg("init") = py::none());

  py::class_<PyNetwork>(m, "Network")
      .def(py::init([](std::shared_ptr<Model> x) { return std::make_unique<PyNetwork>(std::move(x)); }),
           py::arg("model"))
      .def_property_readonly("input_size", [](const PyNetwork& n) { return n.net.input_size(); })
      .def_property_readonly("output_size", [](const PyNetwork& n) { return n.net.output_size(); })
      .def("forward", [](const PyNetwork& n, const std::vector<double>& x) { return trace_dict(n.net.forward(x)); },
           py::arg("x"))
      .def("logits", [](const PyNetwork& n, const std::vector<double>& x) { return to_array(n.net.logits(x)); },
           py::arg("x"));

  m.def("perturb",
        [](const std::vector<double>& x, const std::vector<std::int8_t>& sx, double magnitude, std::uint64_t seed) {
          return to_array(perturb(x, sx, magnitude, seed));
        },
        py::arg("x"), py::arg("s_x"), py::arg("magnitude"), py::arg("seed") = 0);
  m.def("omega",
        [](const std::vector<double>& y1, const std::vector<double>& y2, const std::vector<std::int8_t>& sy) {
          return omega(y1, y2, sy);
        },
        py::arg("y1"), py::arg("y2"), py::arg("s_y"));
  m.def("lambda_from_samples",
        [](const std::vector<double>& w) { return lambda_from_samples(w).lambda; }, py::arg("omegas"));
  m.def("welch_t",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          auto r = welch_t(a, b);
          return py::make_tuple(r.t, r.df, r.p);
        },
        py::arg("a"), py::arg("b"));

  m.def("run_pipeline",
        [](const std::filesystem::path& out_dir, const py::kwargs& kw) {
          ExperimentConfig c;
          c.out_dir = out_dir;
          for (const auto& [key, value] : kw) {
            const auto k = key.cast<std::string>();
            if (k == "model_path") c.model_path = value.cast<std::string>();
            else if (k == "template") c.synthetic = parse_template(value.cast<std::string>());
            else if (k == "synthetic_seed") c.synthetic_seed = value.cast<std::uint64_t>();
            else if (k == "seed") c.seed = value.cast<std::uint64_t>();
            else if (k == "replicas") c.replicas = value.cast<std::int64_t>();
            else if (k == "initial_flips") c.initial_flips = value.cast<std::int64_t>();
            else if (k == "max_iterations") c.max_iterations = value.cast<std::int64_t>();
            else if (k == "domain_moves") c.domain_moves = value.cast<bool>();
            else if (k == "null_instances") c.null_instances = value.cast<std::int64_t>();
            else if (k == "null_replicas") c.null_replicas = value.cast<std::int64_t>();
            else if (k == "n3_init") c.n3_init = parse_init_scheme(value.cast<std::string>());
            else if (k == "image_dir") c.image_dir = value.cast<std::string>();
            else if (k == "image_count") c.image_count = value.cast<std::int64_t>();
            else if (k == "active_images") c.active_images = value.cast<std::int64_t>();
            else if (k == "active_replicas") c.active_replicas = value.cast<std::int64_t>();
            else if (k == "per_image") c.per_image = value.cast<std::int64_t>();
            else if (k == "magnitudes") c.magnitudes = value.cast<std::vector<double>>();
            else if (k == "random_null") c.random_null = value.cast<bool>();
            else if (k == "nulls") {
              c.null_kinds.clear();
              for (const auto& s : value.cast<std::vector<std::string>>()) c.null_kinds.push_back(parse_null_kind(s));
            } else {
              throw ValidationError("unknown pipeline option '" + k + "'");
            }
          }
          std::string summary;
          {
            py::gil_scoped_release release;
            summary = run_pipeline(c).summary.dump();
          }
          return py::module_::import("json").attr("loads")(summary);
        },
        py::arg("out_dir"));
}
