// frustra: command-line front end.
// Exit codes: 0 success, 2 invalid input (including unreadable files),
// 3 numerical failure (also a failed jaccheck).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frustra/error.hpp"
#include "frustra/frustration.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/graph_io.hpp"
#include "frustra/inference.hpp"
#include "frustra/model_io.hpp"
#include "frustra/monotonicity.hpp"
#include "frustra/null_models.hpp"
#include "frustra/random.hpp"
#include "frustra/report.hpp"
#include "frustra/synthetic.hpp"

namespace fs = std::filesystem;
using namespace frustra;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

std::vector<double> read_input(const fs::path& path, const TensorShape& shape) {
  const auto blob = read_blob(path);
  if (static_cast<std::int64_t>(blob.values.size()) != shape.size()) {
    throw ValidationError("input '" + path.string() + "' has " + std::to_string(blob.values.size()) +
                          " values, model expects " + shape.to_string());
  }
  return {blob.values.begin(), blob.values.end()};
}

void write_json(const std::string& path, const ojson& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_text(path, j.dump(2) + "\n");
  }
}

std::vector<double> parse_magnitudes(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("bad magnitude '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frustration and near-monotonicity of feed-forward networks"};
  app.require_subcommand(1);

  // synth
  std::string tmpl = "tiny_cnn", synth_out;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Write a synthetic model (manifest + blobs)");
  synth->add_option("--template", tmpl, "tiny_mlp | tiny_cnn | residual_cnn | grouped_cnn")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--out", synth_out, "manifest path; blobs go next to it")->required();

  // build
  std::string model_path, graph_out;
  auto* build = app.add_subcommand("build", "Expand a model into its signed adjacency matrix");
  build->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  build->add_option("--out", graph_out)->required();

  // frustration
  std::string graph_path, eps_out;
  std::int64_t replicas = 80, nu = 1'000'000, max_iter = 100'000'000;
  std::uint64_t seed = 7;
  bool no_domain = false, exact = false, with_spins = false;
  auto* frus = app.add_subcommand("frustration", "Estimate the frustration index");
  frus->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
  frus->add_option("--replicas", replicas)->capture_default_str();
  frus->add_option("--nu", nu, "initial random gauge flips per replica")->capture_default_str();
  frus->add_option("--max-iter", max_iter)->capture_default_str();
  frus->add_option("--seed", seed)->capture_default_str();
  frus->add_flag("--no-domain-moves", no_domain, "single-flip descent only");
  frus->add_flag("--exact", exact, "also run the exhaustive solver (n <= 20)");
  frus->add_flag("--spins", with_spins, "include best_spins in the output");
  frus->add_option("--out", eps_out, "JSON output (default stdout)");

  // nullmodel
  std::string null_kind, init = "xavier", null_out;
  auto* nullm = app.add_subcommand("nullmodel", "Generate an N1/N2/N3 null-model graph");
  nullm->add_option("--graph", graph_path, "source graph (n1, n2)")->check(CLI::ExistingFile);
  nullm->add_option("--model", model_path, "source model (n3)")->check(CLI::ExistingFile);
  nullm->add_option("--kind", null_kind, "n1 | n2 | n3")->required();
  nullm->add_option("--init", init, "n3: xavier | he")->capture_default_str();
  nullm->add_option("--seed", seed)->capture_default_str();
  nullm->add_option("--out", null_out)->required();

  // active
  std::string input_path, act_out, act_json;
  std::int64_t act_replicas = 8;
  auto* active = app.add_subcommand("active", "Extract the active subnetwork of one input");
  active->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  active->add_option("--graph", graph_path, "default: built from the model")->check(CLI::ExistingFile);
  active->add_option("--input", input_path)->required()->check(CLI::ExistingFile);
  active->add_option("--out", act_out, "active graph file");
  active->add_option("--replicas", act_replicas, "replicas for eps_act (0: skip)")->capture_default_str();
  active->add_option("--nu", nu)->capture_default_str();
  active->add_option("--seed", seed)->capture_default_str();
  active->add_option("--json", act_json, "summary JSON (default stdout)");

  // jaccheck
  JacobianOptions jopt;
  std::string jac_out;
  auto* jac = app.add_subcommand("jaccheck", "Finite-difference check of the Jacobian sign law");
  jac->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  jac->add_option("--graph", graph_path)->check(CLI::ExistingFile);
  jac->add_option("--input", input_path, "default: random kink-free input")->check(CLI::ExistingFile);
  jac->add_option("--step", jopt.step)->capture_default_str();
  jac->add_option("--tol", jopt.tolerance)->capture_default_str();
  jac->add_option("--margin", jopt.kink_margin)->capture_default_str();
  jac->add_option("--max-sources", jopt.max_sources_per_layer, "0 = all")->capture_default_str();
  jac->add_option("--seed", jopt.seed)->capture_default_str();
  jac->add_option("--out", jac_out, "JSON report (default stdout)");

  // monotone
  std::string spins_path, images_dir, magnitudes = "0.5,1,2,4", null_mode = "none", omega_out, lambda_out;
  std::int64_t per_image = 20, image_count = 50;
  auto* mono = app.add_subcommand("monotone", "Run the perturbation protocol");
  mono->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  mono->add_option("--graph", graph_path)->check(CLI::ExistingFile);
  mono->add_option("--spins", spins_path, "frustration JSON with best_spins")->check(CLI::ExistingFile);
  mono->add_option("--images", images_dir, "directory of *.blob inputs")->check(CLI::ExistingDirectory);
  mono->add_option("--image-count", image_count, "random images when --images is absent")->capture_default_str();
  mono->add_option("--per-image", per_image)->capture_default_str();
  mono->add_option("--magnitudes", magnitudes)->capture_default_str();
  mono->add_option("--null", null_mode, "none | random")->capture_default_str();
  mono->add_option("--seed", seed)->capture_default_str();
  mono->add_option("--out", omega_out)->required();
  mono->add_option("--lambda-out", lambda_out);

  // pipeline
  ExperimentConfig cfg;
  std::string pipe_template, pipe_model, n3_init = "xavier", null_list = "n1,n2,n3", pipe_out, pipe_mags = "0.5,1,2,4";
  std::string pipe_images;
  auto* pipe = app.add_subcommand("pipeline", "Run every stage and write the report bundle");
  pipe->add_option("--model", pipe_model)->check(CLI::ExistingFile);
  pipe->add_option("--synthetic", pipe_template, "template used when --model is absent");
  pipe->add_option("--synthetic-seed", cfg.synthetic_seed)->capture_default_str();
  pipe->add_option("--seed", cfg.seed)->capture_default_str();
  pipe->add_option("--replicas", cfg.replicas)->capture_default_str();
  pipe->add_option("--nu", cfg.initial_flips)->capture_default_str();
  pipe->add_option("--max-iter", cfg.max_iterations)->capture_default_str();
  pipe->add_flag("--no-domain-moves", no_domain);
  pipe->add_option("--nulls", null_list)->capture_default_str();
  pipe->add_option("--null-instances", cfg.null_instances)->capture_default_str();
  pipe->add_option("--null-replicas", cfg.null_replicas)->capture_default_str();
  pipe->add_option("--n3-init", n3_init)->capture_default_str();
  pipe->add_option("--images", pipe_images)->check(CLI::ExistingDirectory);
  pipe->add_option("--image-count", cfg.image_count)->capture_default_str();
  pipe->add_option("--active-images", cfg.active_images)->capture_default_str();
  pipe->add_option("--active-replicas", cfg.active_replicas)->capture_default_str();
  pipe->add_option("--per-image", cfg.per_image)->capture_default_str();
  pipe->add_option("--magnitudes", pipe_mags)->capture_default_str();
  pipe->add_option("--out", pipe_out)->required();

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "Rebuild histograms and summary.json from stage outputs");
  report->add_option("--dir", report_dir)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  try {
    if (*synth) {
      const auto model = generate_synthetic(synth_seed, parse_template(tmpl));
      if (const auto parent = fs::path(synth_out).parent_path(); !parent.empty()) fs::create_directories(parent);
      save_model(synth_out, model.manifest, model.store);
    } else if (*build) {
      const auto model = load_manifest(model_path);
      const auto g = assemble(model.manifest, model.store);
      write_graph(graph_out, g);
      std::cout << ojson{{"nodes", g.node_count()}, {"edges", g.edge_count()}}.dump() << "\n";
    } else if (*frus) {
      const auto g = read_graph(graph_path);
      const SymmetrizedView view(g);
      ReplicaConfig rc;
      rc.replica_count = replicas;
      rc.initial_flips = nu;
      rc.max_iterations = max_iter;
      rc.seed = seed;
      rc.domain_moves = !no_domain;
      const auto set = run_replicas(view, rc);
      auto j = replicas_to_json(set, with_spins);
      if (exact) j["exact_epsilon"] = brute_force_frustration(view).epsilon;
      write_json(eps_out, j);
    } else if (*nullm) {
      const auto kind = parse_null_kind(null_kind);
      SignedSparseGraph out;
      if (kind == NullKind::n3) {
        if (model_path.empty()) throw ValidationError("--kind n3 needs --model");
        const auto model = load_manifest(model_path);
        const auto store = n3_reinit(model.manifest, model.store, NullModelSpec{kind, seed, parse_init_scheme(init)});
        out = assemble(model.manifest, store);
      } else {
        if (graph_path.empty()) throw ValidationError("--kind n1/n2 needs --graph");
        const auto g = read_graph(graph_path);
        out = kind == NullKind::n1 ? n1_shuffle(g, seed) : n2_shuffle(g, seed);
      }
      write_graph(null_out, out);
    } else if (*active) {
      const auto model = load_manifest(model_path);
      const auto g = graph_path.empty() ? assemble(model.manifest, model.store) : read_graph(graph_path);
      const Network net(model.manifest, model.store);
      const auto trace = net.forward(read_input(input_path, model.manifest.input_shape()));
      const auto act = extract_active(g, net.layout(), trace);
      if (!act_out.empty()) write_graph(act_out, act.graph);
      ojson j{{"predicted_class", trace.predicted_class},
              {"predicted_tie", trace.predicted_tie},
              {"nodes", act.graph.node_count()},
              {"edges", act.graph.edge_count()},
              {"output_node", act.output_node}};
      if (act_replicas > 0) {
        ReplicaConfig rc;
        rc.replica_count = act_replicas;
        rc.initial_flips = nu;
        rc.seed = seed;
        j["epsilon_act"] = active_frustration(act.graph, rc).epsilon;
      }
      write_json(act_json, j);
    } else if (*jac) {
      const auto model = load_manifest(model_path);
      const auto g = graph_path.empty() ? assemble(model.manifest, model.store) : read_graph(graph_path);
      const Network net(model.manifest, model.store);
      std::vector<double> x;
      if (!input_path.empty()) x = read_input(input_path, model.manifest.input_shape());
      const auto r = jacobian_sign_check(net, g, x, jopt);
      auto violations = ojson::array();
      for (const auto& v : r.violations) {
        violations.push_back(
            ojson{{"layer", v.layer}, {"row", v.row}, {"col", v.col}, {"expected", v.expected}, {"derivative", v.derivative}});
      }
      write_json(jac_out, ojson{{"passed", r.passed()},
                                {"attempts", r.attempts},
                                {"entries", r.entries},
                                {"nonzero_expected", r.nonzero_expected},
                                {"agreements", r.agreements},
                                {"agreement_fraction", r.agreement_fraction()},
                                {"violation_count", r.violation_count},
                                {"violations", violations}});
      if (!r.passed()) return kNumerical;
    } else if (*mono) {
      const auto model = load_manifest(model_path);
      const Network net(model.manifest, model.store);
      if (!graph_path.empty() && read_graph(graph_path).node_count() != net.layout().node_count) {
        throw ValidationError("graph does not match the model");
      }
      PartialOrderPair order;
      if (null_mode == "random") {
        order = random_order(net.input_size(), net.output_size(), seed);
      } else if (null_mode == "none") {
        if (spins_path.empty()) throw ValidationError("--spins is required unless --null random");
        order = order_from_spins(net.layout(), spins_from_json(nlohmann::json::parse(read_text(spins_path))));
      } else {
        throw ValidationError("--null must be none or random");
      }
      std::vector<std::vector<double>> images;
      if (!images_dir.empty()) {
        images = load_images(images_dir, model.manifest.input_shape());
      } else {
        const auto root = derive_seed(seed, "images");
        for (std::int64_t i = 0; i < image_count; ++i) {
          images.push_back(random_input(model.manifest.input_shape(), derive_seed(root, static_cast<std::uint64_t>(i))));
        }
      }
      ProtocolConfig pc;
      pc.per_image = per_image;
      pc.magnitudes = parse_magnitudes(magnitudes);
      pc.seed = seed;
      const auto samples = run_protocol(net, order, images, pc);
      write_omega_csv(omega_out, samples);
      const auto lam = lambda_from_samples(samples);
      if (!lambda_out.empty()) write_text(lambda_out, lambda_to_json(lam).dump(2) + "\n");
      std::cout << ojson{{"samples", samples.records.size()}, {"mean_omega", samples.mean_omega()}, {"lambda", lam.lambda}}.dump()
                << "\n";
    } else if (*pipe) {
      if (!pipe_model.empty()) cfg.model_path = pipe_model;
      if (!pipe_template.empty()) cfg.synthetic = parse_template(pipe_template);
      if (!pipe_images.empty()) cfg.image_dir = pipe_images;
      cfg.domain_moves = !no_domain;
      cfg.null_kinds.clear();
      std::stringstream ss(null_list);
      for (std::string k; std::getline(ss, k, ',');) {
        if (!k.empty()) cfg.null_kinds.push_back(parse_null_kind(k));
      }
      cfg.n3_init = parse_init_scheme(n3_init);
      cfg.magnitudes = parse_magnitudes(pipe_mags);
      cfg.out_dir = pipe_out;
      const auto bundle = run_pipeline(cfg);
      for (const auto& f : bundle.files) std::cout << f.string() << "\n";
    } else if (*report) {
      write_report(report_dir);
    }
  } catch (const NumericalError& e) {
    std::cerr << "frustra: numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "frustra: " << e.what() << "\n";
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "frustra: bad JSON: " << e.what() << "\n";
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "frustra: " << e.what() << "\n";
    return kValidation;
  }
  return 0;
}
