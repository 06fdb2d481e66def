#pragma once

// End-to-end experiment driver and report files.
//
// run_pipeline writes into out_dir:
//   run.json                 configuration echo
//   graph.fsg                adjacency matrix of the real network
//   eps_real.json            replicas of the real network (+ best spins)
//   eps_n1/n2/n3.json        one frustration estimate per null instance
//   eps_act.csv              per-image active-subnetwork frustration
//   omega.csv, omega_null.csv  perturbation protocol, gauge order and random order
// and then write_report adds lambda.json, lambda_null.json, histograms.json,
// direction_consistency.csv, class_stability.csv and summary.json.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "frustra/frustration.hpp"
#include "frustra/monotonicity.hpp"
#include "frustra/null_models.hpp"
#include "frustra/synthetic.hpp"

namespace frustra {

inline constexpr int kSummarySchemaVersion = 1;

struct ExperimentConfig {
  std::filesystem::path model_path;  // empty: use the synthetic template
  SyntheticTemplate synthetic = SyntheticTemplate::tiny_cnn;
  std::uint64_t synthetic_seed = 1;

  std::uint64_t seed = 7;  // root; stage seeds are derive_seed(seed, stage)
  std::int64_t replicas = 80;
  std::int64_t initial_flips = 1'000'000;
  std::int64_t max_iterations = 100'000'000;
  bool domain_moves = true;

  std::vector<NullKind> null_kinds{NullKind::n1, NullKind::n2, NullKind::n3};
  std::int64_t null_instances = 80;
  std::int64_t null_replicas = 1;  // replicas per null instance
  InitScheme n3_init = InitScheme::xavier_uniform;

  std::filesystem::path image_dir;  // *.blob inputs; empty: uniform [0,1) images
  std::int64_t image_count = 50;
  std::int64_t active_images = 10;
  std::int64_t active_replicas = 8;
  std::int64_t per_image = 20;
  std::vector<double> magnitudes{0.5, 1.0, 2.0, 4.0};
  bool random_null = true;

  std::filesystem::path out_dir;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct ReportBundle {
  std::vector<std::filesystem::path> files;
  nlohmann::ordered_json summary;
};

/// Stage errors are rethrown with the stage name prefixed (same error type);
/// files written by earlier stages stay in place.
ReportBundle run_pipeline(const ExperimentConfig& config);

/// Rebuilds the derived files and summary.json from the stage outputs found
/// in `dir` (any subset of them). Returns the summary.
nlohmann::ordered_json write_report(const std::filesystem::path& dir);

/// Shortest round-trip decimal form of v.
std::string format_double(double v);

/// {"best_epsilon", "best_replica", "replicas": [{"seed","epsilon","flips","domain_rounds"}]}
/// plus "best_spins" when requested.
nlohmann::ordered_json replicas_to_json(const ReplicaSet& set, bool include_spins);
/// Spins from "best_spins" of a frustration JSON document.
SpinVector spins_from_json(const nlohmann::json& doc);

void write_omega_csv(const std::filesystem::path& path, const OmegaSampleSet& samples);
OmegaSampleSet read_omega_csv(const std::filesystem::path& path);
nlohmann::ordered_json lambda_to_json(const LambdaResult& result);

/// *.blob files of `dir` in name order, each holding one input tensor.
std::vector<std::vector<double>> load_images(const std::filesystem::path& dir, const TensorShape& input_shape);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace frustra
