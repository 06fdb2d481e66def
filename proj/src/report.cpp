#include "frustra/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "frustra/error.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/graph_io.hpp"
#include "frustra/inference.hpp"
#include "frustra/model_io.hpp"
#include "frustra/parallel.hpp"
#include "frustra/random.hpp"
#include "frustra/stats.hpp"

namespace frustra {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ExperimentConfig::validate() const {
  if (!model_path.empty() && !fs::exists(model_path)) {
    throw ValidationError("model '" + model_path.string() + "' does not exist");
  }
  if (!image_dir.empty() && !fs::is_directory(image_dir)) {
    throw ValidationError("image directory '" + image_dir.string() + "' does not exist");
  }
  if (out_dir.empty()) throw ValidationError("output directory not set");
  if (replicas < 1 || null_replicas < 1 || active_replicas < 1) throw ValidationError("replica counts must be >= 1");
  if (initial_flips < 0 || max_iterations < 1) throw ValidationError("initial_flips >= 0 and max_iterations >= 1 required");
  if (null_instances < 0 || image_count < 0 || active_images < 0 || per_image < 1) {
    throw ValidationError("instance and image counts must be non-negative, per_image >= 1");
  }
  if (magnitudes.empty()) throw ValidationError("at least one magnitude required");
  for (auto m : magnitudes) {
    if (!(m > 0.0)) throw ValidationError("magnitudes must be > 0");
  }
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["model"] = model_path.empty() ? ojson(nullptr) : ojson(model_path.string());
  j["synthetic"] = model_path.empty() ? ojson(std::string(to_string(synthetic))) : ojson(nullptr);
  j["synthetic_seed"] = synthetic_seed;
  j["seed"] = seed;
  j["replicas"] = replicas;
  j["initial_flips"] = initial_flips;
  j["max_iterations"] = max_iterations;
  j["domain_moves"] = domain_moves;
  auto kinds = ojson::array();
  for (auto k : null_kinds) kinds.push_back(std::string(to_string(k)));
  j["null_kinds"] = kinds;
  j["null_instances"] = null_instances;
  j["null_replicas"] = null_replicas;
  j["n3_init"] = std::string(to_string(n3_init));
  j["n3_biases"] = "zeroed";
  j["images"] = image_dir.empty() ? ojson("uniform[0,1)") : ojson(image_dir.string());
  j["image_count"] = image_count;
  j["active_images"] = active_images;
  j["active_replicas"] = active_replicas;
  j["per_image"] = per_image;
  j["magnitudes"] = magnitudes;
  j["random_null"] = random_null;
  return j;
}

ojson replicas_to_json(const ReplicaSet& set, bool include_spins) {
  ojson j;
  const auto& best = set.best_result();
  j["best_epsilon"] = best.epsilon;
  j["best_replica"] = set.best;
  auto reps = ojson::array();
  for (const auto& r : set.replicas) {
    reps.push_back(ojson{{"seed", r.seed}, {"epsilon", r.epsilon}, {"flips", r.flips}, {"domain_rounds", r.domain_rounds}});
  }
  j["replicas"] = reps;
  if (include_spins) {
    std::vector<int> s(best.spins.begin(), best.spins.end());
    j["best_spins"] = s;
  }
  return j;
}

SpinVector spins_from_json(const nlohmann::json& doc) {
  if (!doc.contains("best_spins") || !doc["best_spins"].is_array()) {
    throw ValidationError("frustration file has no \"best_spins\" array");
  }
  SpinVector s;
  for (const auto& v : doc["best_spins"]) {
    const int x = v.get<int>();
    if (x != 1 && x != -1) throw ValidationError("best_spins entries must be +1 or -1");
    s.push_back(static_cast<std::int8_t>(x));
  }
  return s;
}

void write_omega_csv(const fs::path& path, const OmegaSampleSet& samples) {
  std::string out = "image_id,perturbation_id,magnitude,omega,class_before,class_after\n";
  for (const auto& r : samples.records) {
    out += std::to_string(r.image) + ',' + std::to_string(r.perturbation) + ',' + format_double(r.magnitude) + ',' +
           format_double(r.omega) + ',' + std::to_string(r.class_before) + ',' + std::to_string(r.class_after) + '\n';
  }
  write_text(path, out);
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t columns) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw ValidationError("'" + path.string() + "': expected " + std::to_string(columns) + " columns, got " +
                            std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NA") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("bad number '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ValidationError("bad integer '" + s + "'");
  return v;
}

ojson histogram_json(std::span<const double> values) {
  const auto h = histogram(values, 50);
  return ojson{{"edges", h.edges}, {"counts", h.counts}};
}

ojson describe(std::span<const double> v) {
  ojson j;
  j["n"] = v.size();
  j["mean"] = mean(v);
  j["std"] = v.size() >= 2 ? std::sqrt(sample_variance(v)) : 0.0;
  j["min"] = *std::min_element(v.begin(), v.end());
  j["max"] = *std::max_element(v.begin(), v.end());
  return j;
}

ojson welch_json(std::span<const double> a, std::span<const double> b) {
  try {
    const auto r = welch_t(a, b);
    return ojson{{"t", r.t}, {"df", r.df}, {"p", r.p}};
  } catch (const Error& e) {
    return ojson{{"error", e.what()}};
  }
}

std::vector<double> epsilons_of(const nlohmann::json& doc) {
  std::vector<double> v;
  const auto& list = doc.contains("replicas") ? doc["replicas"] : doc["instances"];
  for (const auto& r : list) v.push_back(r["epsilon"].get<double>());
  return v;
}

template <typename Fn>
void stage(const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage '" + name + "': " + e.what());
  } catch (const IoError& e) {
    throw IoError("stage '" + name + "': " + e.what());
  }
}

}  // namespace

OmegaSampleSet read_omega_csv(const fs::path& path) {
  OmegaSampleSet set;
  for (const auto& c : read_csv(path, 6)) {
    OmegaRecord r;
    r.image = parse_int(c[0]);
    r.perturbation = parse_int(c[1]);
    r.magnitude = parse_double(c[2]);
    r.delta_norm = r.magnitude;
    r.omega = parse_double(c[3]);
    r.class_before = parse_int(c[4]);
    r.class_after = parse_int(c[5]);
    set.records.push_back(r);
  }
  return set;
}

ojson lambda_to_json(const LambdaResult& result) {
  ojson j;
  j["lambda"] = result.lambda;
  auto ccdf = ojson::array();
  for (const auto& [d, g] : result.ccdf) ccdf.push_back({d, g});
  j["ccdf"] = ccdf;
  return j;
}

std::vector<std::vector<double>> load_images(const fs::path& dir, const TensorShape& input_shape) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".blob") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<double>> images;
  for (const auto& f : files) {
    const auto blob = read_blob(f);
    if (static_cast<std::int64_t>(blob.values.size()) != input_shape.size()) {
      throw ValidationError("image '" + f.string() + "' has " + std::to_string(blob.values.size()) +
                            " values, model input " + input_shape.to_string() + " needs " +
                            std::to_string(input_shape.size()));
    }
    images.emplace_back(blob.values.begin(), blob.values.end());
  }
  if (images.empty()) throw ValidationError("no *.blob images in '" + dir.string() + "'");
  return images;
}

ReportBundle run_pipeline(const ExperimentConfig& config) {
  config.validate();
  const auto& dir = config.out_dir;
  fs::create_directories(dir);
  ReportBundle bundle;
  auto emit = [&](const fs::path& name, const std::string& text) {
    write_text(dir / name, text);
    bundle.files.push_back(dir / name);
  };
  emit("run.json", config.to_json().dump(2) + "\n");

  std::optional<Model> model;
  stage("load", [&] {
    model = config.model_path.empty() ? generate_synthetic(config.synthetic_seed, config.synthetic)
                                      : load_manifest(config.model_path);
  });
  const auto& manifest = model->manifest;

  SignedSparseGraph graph;
  stage("build", [&] {
    graph = assemble(manifest, model->store);
    write_graph(dir / "graph.fsg", graph);
    bundle.files.push_back(dir / "graph.fsg");
  });
  const SymmetrizedView view(graph);

  auto replica_config = [&](std::int64_t count, std::uint64_t seed) {
    ReplicaConfig rc;
    rc.replica_count = count;
    rc.initial_flips = config.initial_flips;
    rc.max_iterations = config.max_iterations;
    rc.seed = seed;
    rc.domain_moves = config.domain_moves;
    return rc;
  };

  SpinVector best_spins;
  stage("frustration", [&] {
    const auto set = run_replicas(view, replica_config(config.replicas, derive_seed(config.seed, "real")));
    auto j = replicas_to_json(set, true);
    j["nodes"] = graph.node_count();
    j["edges"] = graph.edge_count();
    emit("eps_real.json", j.dump(2) + "\n");
    best_spins = set.best_result().spins;
  });

  for (auto kind : config.null_kinds) {
    const std::string name(to_string(kind));
    stage("null_" + name, [&] {
      const auto root = derive_seed(config.seed, name);
      std::vector<ojson> rows(static_cast<std::size_t>(config.null_instances));
      // instances run concurrently; each instance's replicas run inline
      parallel_for(rows.size(), [&](std::size_t k) {
        const auto inst_seed = derive_seed(root, static_cast<std::uint64_t>(k));
        SignedSparseGraph g;
        switch (kind) {
          case NullKind::n1: g = n1_shuffle(graph, inst_seed); break;
          case NullKind::n2: g = n2_shuffle(graph, inst_seed); break;
          case NullKind::n3: {
            const auto store = n3_reinit(manifest, model->store, NullModelSpec{kind, inst_seed, config.n3_init});
            g = assemble(manifest, store);
            break;
          }
        }
        const SymmetrizedView v(g);
        const auto set = run_replicas(v, replica_config(config.null_replicas, derive_seed(inst_seed, "replicas")));
        const auto& best = set.best_result();
        rows[k] = ojson{{"instance", k}, {"seed", inst_seed}, {"epsilon", best.epsilon}, {"flips", best.flips}};
      });
      ojson j;
      j["kind"] = name;
      if (kind == NullKind::n3) {
        j["init"] = std::string(to_string(config.n3_init));
        j["biases"] = "zeroed";
      }
      j["instances"] = rows;
      emit("eps_" + name + ".json", j.dump(2) + "\n");
    });
  }

  const Network net(manifest, model->store);
  std::vector<std::vector<double>> images;
  stage("images", [&] {
    if (!config.image_dir.empty()) {
      images = load_images(config.image_dir, manifest.input_shape());
    } else {
      const auto root = derive_seed(config.seed, "images");
      for (std::int64_t i = 0; i < config.image_count; ++i) {
        images.push_back(random_input(manifest.input_shape(), derive_seed(root, static_cast<std::uint64_t>(i))));
      }
    }
  });

  stage("active", [&] {
    const auto count = std::min<std::size_t>(images.size(), static_cast<std::size_t>(config.active_images));
    std::vector<std::string> lines(count);
    const auto root = derive_seed(config.seed, "active");
    parallel_for(count, [&](std::size_t i) {
      const auto trace = net.forward(images[i]);
      const auto act = extract_active(graph, net.layout(), trace);
      std::string eps = "NA";
      if (act.graph.edge_count() > 0) {
        const auto r = active_frustration(
            act.graph, replica_config(config.active_replicas, derive_seed(root, static_cast<std::uint64_t>(i))));
        eps = format_double(r.epsilon);
      }
      lines[i] = std::to_string(i) + ',' + std::to_string(trace.predicted_class) + ',' +
                 std::to_string(act.graph.node_count()) + ',' + std::to_string(act.graph.edge_count()) + ',' + eps +
                 '\n';
    });
    std::string out = "image_id,predicted_class,active_nodes,active_edges,epsilon_act\n";
    for (const auto& l : lines) out += l;
    emit("eps_act.csv", out);
  });

  ProtocolConfig pc;
  pc.per_image = config.per_image;
  pc.magnitudes = config.magnitudes;
  stage("monotone", [&] {
    if (images.empty()) return;
    pc.seed = derive_seed(config.seed, "monotone");
    const auto samples = run_protocol(net, order_from_spins(net.layout(), best_spins), images, pc);
    write_omega_csv(dir / "omega.csv", samples);
    bundle.files.push_back(dir / "omega.csv");
  });
  stage("monotone_null", [&] {
    if (images.empty() || !config.random_null) return;
    pc.seed = derive_seed(config.seed, "monotone_null");
    auto order = random_order(net.input_size(), net.output_size(), 0);
    const auto samples = run_protocol(net, order, images, pc);
    write_omega_csv(dir / "omega_null.csv", samples);
    bundle.files.push_back(dir / "omega_null.csv");
  });

  stage("report", [&] { bundle.summary = write_report(dir); });
  for (const auto* f : {"lambda.json", "lambda_null.json", "histograms.json", "direction_consistency.csv",
                        "class_stability.csv", "summary.json"}) {
    if (fs::exists(dir / f)) bundle.files.push_back(dir / f);
  }
  return bundle;
}

ojson write_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
  ojson summary;
  summary["schema_version"] = kSummarySchemaVersion;
  if (fs::exists(dir / "run.json")) summary["run"] = ojson::parse(read_text(dir / "run.json"));

  ojson hist;
  std::map<std::string, std::vector<double>> eps;
  for (const auto* name : {"real", "n1", "n2", "n3"}) {
    const auto file = dir / ("eps_" + std::string(name) + ".json");
    if (!fs::exists(file)) continue;
    eps[name] = epsilons_of(nlohmann::json::parse(read_text(file)));
    if (eps[name].empty()) {
      eps.erase(name);
      continue;
    }
    hist["eps_" + std::string(name)] = histogram_json(eps[name]);
  }
  ojson eps_j;
  for (const auto* name : {"real", "n1", "n2", "n3"}) {
    if (eps.contains(name)) eps_j[name] = describe(eps[name]);
  }
  summary["epsilon"] = eps_j;

  ojson welch;
  const std::pair<const char*, const char*> pairs[] = {{"real", "n1"}, {"real", "n2"}, {"n1", "n2"}, {"real", "n3"}};
  for (const auto& [a, b] : pairs) {
    if (eps.contains(a) && eps.contains(b)) welch[std::string(a) + "_vs_" + b] = welch_json(eps[a], eps[b]);
  }
  summary["welch"] = welch;
  if (eps.contains("real") && eps.contains("n1") && eps.contains("n2")) {
    const double r = mean(eps["real"]), n1 = mean(eps["n1"]), n2 = mean(eps["n2"]);
    summary["ordering"] = ojson{{"expected", "mean(real) <= mean(n1) <= mean(n2)"}, {"holds", r <= n1 && n1 <= n2}};
  }

  if (fs::exists(dir / "eps_act.csv")) {
    std::vector<double> act;
    std::int64_t rows = 0;
    for (const auto& c : read_csv(dir / "eps_act.csv", 5)) {
      ++rows;
      const double v = parse_double(c[4]);
      if (!std::isnan(v)) act.push_back(v);
    }
    ojson a{{"images", rows}, {"with_edges", act.size()}};
    if (!act.empty()) {
      a["mean_epsilon_act"] = mean(act);
      hist["eps_act"] = histogram_json(act);
    }
    summary["active"] = a;
  }

  ojson mono;
  std::vector<std::string> consistency_cols;
  std::map<std::int64_t, std::vector<std::string>> consistency_rows;
  for (const auto* name : {"omega", "omega_null"}) {
    const auto file = dir / (std::string(name) + ".csv");
    if (!fs::exists(file)) continue;
    const auto samples = read_omega_csv(file);
    if (samples.records.empty()) continue;
    const std::string suffix = std::string(name) == "omega" ? "" : "_null";
    const auto lam = lambda_from_samples(samples);
    write_text(dir / ("lambda" + suffix + ".json"), lambda_to_json(lam).dump(2) + "\n");
    const auto om = samples.omegas();
    hist[name] = histogram_json(om);
    ojson m{{"samples", samples.records.size()}, {"lambda", lam.lambda}, {"mean_omega", samples.mean_omega()}};
    if (samples.records.size() >= 2) m["standard_error"] = samples.standard_error();
    const auto dc = direction_consistency(samples);
    std::vector<double> fr;
    for (const auto& d : dc) {
      fr.push_back(d.fraction);
      consistency_rows[d.image].resize(consistency_cols.size(), "NA");
      consistency_rows[d.image].push_back(format_double(d.fraction));
    }
    consistency_cols.push_back(suffix.empty() ? "ground_state" : "random_null");
    hist["direction_consistency" + suffix] = histogram_json(fr);
    if (suffix.empty()) {
      std::string out = "magnitude,count,fraction_same_class\n";
      auto stab = ojson::array();
      for (const auto& s : class_stability(samples)) {
        out += format_double(s.magnitude) + ',' + std::to_string(s.count) + ',' + format_double(s.fraction) + '\n';
        stab.push_back(ojson{{"magnitude", s.magnitude}, {"fraction", s.fraction}});
      }
      write_text(dir / "class_stability.csv", out);
      m["class_stability"] = stab;
    }
    mono[suffix.empty() ? "ground_state" : "random_null"] = m;
  }
  if (!consistency_cols.empty()) {
    std::string out = "image_id";
    for (const auto& c : consistency_cols) out += "," + c;
    out += '\n';
    for (auto& [img, cells] : consistency_rows) {
      cells.resize(consistency_cols.size(), "NA");
      out += std::to_string(img);
      for (const auto& c : cells) out += "," + c;
      out += '\n';
    }
    write_text(dir / "direction_consistency.csv", out);
  }
  summary["monotonicity"] = mono;

  write_text(dir / "histograms.json", hist.dump(2) + "\n");
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace frustra
