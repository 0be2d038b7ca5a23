#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssm/deform.hpp"
#include "ssm/ensemble.hpp"
#include "ssm/generators.hpp"
#include "ssm/metrics.hpp"
#include "ssm/particles.hpp"
#include "ssm/spharm.hpp"

namespace ssm {

// Invalid or inconsistent experiment configuration (the CLI maps this to its
// own exit code, distinct from runtime stage failures).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The four comparison arms. "deform_mean" and "deform_sphere" share the
// deformation settings and differ only in the initial template.
extern const std::vector<std::string> kMethodNames;

struct ExperimentConfig {
  uint64_t seed = 0;
  std::string ensemble_type;  // "box_bump", "appendage", or "input"
  std::string input_dir;      // for ensemble_type == "input"
  BoxBumpParams box_bump;
  AppendageParams appendage;
  PreprocessConfig preprocess;
  std::vector<std::string> methods;
  PbmConfig particles;
  SpharmConfig spherical;
  AtlasConfig deform;
  double deform_coarse_spacing = -1.0;  // < 0 selects 4x the preprocess spacing
  int deform_sphere_level = 2;
  MetricsConfig metrics;
  int cluster_k = 0;  // 0 disables clustering (and with it validation)
  int cluster_restarts = 8;
  bool run_validation = false;
  double p_threshold = 0.01;
  std::string raw_json;  // canonical serialized config, hashed into run.json
};

ExperimentConfig parse_experiment_config(const std::string& path);

// On-disk world state produced by the generate stage.
struct WorldData {
  Ensemble world;
  GroundTruth truth;
  bool has_truth = false;
};

// Individual pipeline stages, each re-entrant from the artifacts the
// previous stages left under out_dir.
void stage_generate(const ExperimentConfig& config, const std::string& out_dir);
WorldData load_world(const std::string& out_dir);
void stage_correspond(const ExperimentConfig& config, const std::string& out_dir,
                      const std::string& method);
void stage_evaluate(const ExperimentConfig& config, const std::string& out_dir,
                    const std::string& method);
void stage_validate(const ExperimentConfig& config, const std::string& out_dir);
void stage_report(const std::string& out_dir);  // rebuilt purely from artifacts

struct MethodOutcome {
  bool succeeded = false;
  std::string error;
};

struct ExperimentResult {
  std::map<std::string, MethodOutcome> outcomes;
  bool generation_ok = false;
  std::string fatal_error;  // set when generation or validation failed

  bool all_succeeded() const;
};

// Composite run: generate -> correspond -> evaluate (per method) ->
// cluster/validate -> report, then a run.json provenance record. A failing
// method is recorded and the remaining methods still run. Rerunning with the
// same config rewrites every file with identical bytes.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir);

uint64_t fnv1a64(const std::string& text);

}  // namespace ssm
