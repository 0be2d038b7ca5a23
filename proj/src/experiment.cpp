#include "ssm/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "ssm/clustering.hpp"
#include "ssm/sdf.hpp"
#include "ssm/validation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssm {

const std::vector<std::string> kMethodNames = {"particles", "spherical", "deform_mean",
                                               "deform_sphere"};

namespace {

// Derived-seed slots; recorded in run.json so every consumed seed is auditable.
constexpr uint64_t kSeedEnsemble = 1;
constexpr uint64_t kSeedParticles = 2;
constexpr uint64_t kSeedMetrics = 3;
constexpr uint64_t kSeedClustering = 4;

const std::vector<double> kModeWalkStops = {-3.0, -1.5, 0.0, 1.5, 3.0};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  return j;
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// One "x y z" line per point, full double precision.
void write_points_file(const Points& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  for (int i = 0; i < points.rows(); ++i)
    out << points(i, 0) << ' ' << points(i, 1) << ' ' << points(i, 2) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// Coarse remesh of every sample from its distance volume, for the
// deformation method whose cost scales with face counts.
Ensemble coarsen_ensemble(const Ensemble& input, double spacing) {
  Ensemble out;
  out.world_frame = input.world_frame;
  out.provenance = input.provenance;
  for (const ShapeSample& s : input.samples) {
    if (!s.has_sdf) throw std::runtime_error("sample '" + s.id + "' has no distance volume");
    Vec3 lo = s.sdf.origin;
    Vec3 extent = (s.sdf.dims.cast<double>() - Vec3::Ones()) * s.sdf.spacing;
    Vec3i dims;
    for (int d = 0; d < 3; ++d)
      dims[d] = std::max(2, static_cast<int>(std::ceil(extent[d] / spacing)) + 1);
    ShapeSample c;
    c.id = s.id;
    c.sdf = resample_volume(s.sdf, dims, spacing, lo);
    c.has_sdf = true;
    c.world_from_input = s.world_from_input;
    c.mesh = extract_level_set(c.sdf, 0.0);
    if (c.mesh.n_faces() == 0)
      throw std::runtime_error("sample '" + s.id + "': level set vanished at coarse spacing");
    out.samples.push_back(std::move(c));
  }
  return out;
}

double coarse_spacing_for(const ExperimentConfig& config) {
  return config.deform_coarse_spacing > 0.0 ? config.deform_coarse_spacing
                                            : 4.0 * config.preprocess.spacing;
}

std::string method_dir(const std::string& out_dir, const std::string& method) {
  return (fs::path(out_dir) / method).string();
}

bool is_deform(const std::string& method) {
  return method == "deform_mean" || method == "deform_sphere";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

uint64_t fnv1a64(const std::string& text) {
  uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

ExperimentConfig parse_experiment_config(const std::string& path) {
  json j = load_json(path);
  ExperimentConfig cfg;
  cfg.raw_json = j.dump(2);
  cfg.seed = field<uint64_t>(j, "seed", 0);

  if (!j.contains("ensemble") || !j["ensemble"].is_object())
    throw ConfigError("config needs an 'ensemble' object");
  const json& ens = j["ensemble"];
  cfg.ensemble_type = field<std::string>(ens, "type", "");
  if (cfg.ensemble_type == "box_bump") {
    cfg.box_bump.n = field<int>(ens, "n", cfg.box_bump.n);
    cfg.box_bump.bump_lo = field<double>(ens, "bump_lo", cfg.box_bump.bump_lo);
    cfg.box_bump.bump_hi = field<double>(ens, "bump_hi", cfg.box_bump.bump_hi);
    cfg.box_bump.radius = field<double>(ens, "radius", cfg.box_bump.radius);
    if (cfg.box_bump.n < 2) throw ConfigError("ensemble.n must be at least 2");
  } else if (cfg.ensemble_type == "appendage") {
    cfg.appendage.n = field<int>(ens, "n", cfg.appendage.n);
    cfg.appendage.jitter = field<double>(ens, "jitter", cfg.appendage.jitter);
    if (cfg.appendage.n < 2) throw ConfigError("ensemble.n must be at least 2");
  } else if (cfg.ensemble_type == "input") {
    cfg.input_dir = field<std::string>(ens, "path", "");
    if (cfg.input_dir.empty()) throw ConfigError("ensemble.path is required for type 'input'");
  } else {
    throw ConfigError("ensemble.type must be 'box_bump', 'appendage', or 'input' (got '" +
                      cfg.ensemble_type + "')");
  }

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    cfg.preprocess.spacing = field<double>(p, "spacing", cfg.preprocess.spacing);
    cfg.preprocess.padding = field<double>(p, "padding", cfg.preprocess.padding);
    cfg.preprocess.smooth_iterations = field<int>(p, "smooth_iterations", cfg.preprocess.smooth_iterations);
    cfg.preprocess.representative = field<int>(p, "representative", cfg.preprocess.representative);
    if (!(cfg.preprocess.spacing > 0.0)) throw ConfigError("preprocess.spacing must be positive");
    if (!(cfg.preprocess.padding >= 0.0)) throw ConfigError("preprocess.padding must be nonnegative");
  }

  cfg.methods = field<std::vector<std::string>>(j, "methods", kMethodNames);
  if (cfg.methods.empty()) throw ConfigError("methods must not be empty");
  for (const std::string& m : cfg.methods) {
    if (std::find(kMethodNames.begin(), kMethodNames.end(), m) == kMethodNames.end()) {
      std::string known;
      for (const std::string& k : kMethodNames) known += (known.empty() ? "" : ", ") + k;
      throw ConfigError("unknown method '" + m + "' (known: " + known + ")");
    }
    if (std::count(cfg.methods.begin(), cfg.methods.end(), m) != 1)
      throw ConfigError("method '" + m + "' listed more than once");
  }

  if (j.contains("particles")) {
    const json& p = j["particles"];
    cfg.particles.target_particles = field<int>(p, "target_particles", cfg.particles.target_particles);
    cfg.particles.iterations_per_level = field<int>(p, "iterations_per_level", cfg.particles.iterations_per_level);
    cfg.particles.relative_weight = field<double>(p, "relative_weight", cfg.particles.relative_weight);
    cfg.particles.alpha0 = field<double>(p, "alpha", cfg.particles.alpha0);
  }
  if (j.contains("spherical")) {
    const json& p = j["spherical"];
    cfg.spherical.l_max = field<int>(p, "l_max", cfg.spherical.l_max);
    cfg.spherical.sample_level = field<int>(p, "sample_level", cfg.spherical.sample_level);
    if (cfg.spherical.l_max < 1) throw ConfigError("spherical.l_max must be at least 1");
    if (cfg.spherical.sample_level < 0 || cfg.spherical.sample_level > 6)
      throw ConfigError("spherical.sample_level must be in 0..6");
  }
  if (j.contains("deform")) {
    const json& p = j["deform"];
    cfg.deform.control_grid = field<int>(p, "control_grid", cfg.deform.control_grid);
    cfg.deform.flow_steps = field<int>(p, "flow_steps", cfg.deform.flow_steps);
    cfg.deform.outer_iterations = field<int>(p, "outer_iterations", cfg.deform.outer_iterations);
    cfg.deform.momenta_steps = field<int>(p, "momenta_steps", cfg.deform.momenta_steps);
    cfg.deform.template_steps = field<int>(p, "template_steps", cfg.deform.template_steps);
    cfg.deform.sigma = field<double>(p, "sigma", cfg.deform.sigma);
    cfg.deform.sigma_w = field<double>(p, "sigma_w", cfg.deform.sigma_w);
    cfg.deform.regularity_weight = field<double>(p, "regularity_weight", cfg.deform.regularity_weight);
    cfg.deform.n_correspondences = field<int>(p, "n_correspondences", cfg.deform.n_correspondences);
    cfg.deform_coarse_spacing = field<double>(p, "coarse_spacing", cfg.deform_coarse_spacing);
    cfg.deform_sphere_level = field<int>(p, "sphere_level", cfg.deform_sphere_level);
    if (cfg.deform.control_grid < 2) throw ConfigError("deform.control_grid must be at least 2");
    if (cfg.deform.flow_steps < 1) throw ConfigError("deform.flow_steps must be at least 1");
    if (cfg.deform_sphere_level < 0 || cfg.deform_sphere_level > 5)
      throw ConfigError("deform.sphere_level must be in 0..5");
  }
  if (j.contains("metrics")) {
    const json& p = j["metrics"];
    cfg.metrics.k_max = field<int>(p, "k_max", cfg.metrics.k_max);
    cfg.metrics.specificity_samples = field<int>(p, "specificity_samples", cfg.metrics.specificity_samples);
    if (cfg.metrics.k_max < 1) throw ConfigError("metrics.k_max must be positive");
    if (cfg.metrics.specificity_samples < 1)
      throw ConfigError("metrics.specificity_samples must be positive");
  }
  if (j.contains("clustering")) {
    const json& p = j["clustering"];
    cfg.cluster_k = field<int>(p, "k", 4);
    cfg.cluster_restarts = field<int>(p, "restarts", cfg.cluster_restarts);
    if (cfg.cluster_k < 1) throw ConfigError("clustering.k must be positive");
    if (cfg.cluster_restarts < 1) throw ConfigError("clustering.restarts must be positive");
  }
  cfg.run_validation = field<bool>(j, "validate", false);
  cfg.p_threshold = field<double>(j, "p_threshold", cfg.p_threshold);
  if (!(cfg.p_threshold > 0.0 && cfg.p_threshold < 1.0))
    throw ConfigError("p_threshold must be in (0, 1)");
  if (cfg.run_validation && cfg.cluster_k == 0)
    throw ConfigError("validation requires a 'clustering' section");
  return cfg;
}

void stage_generate(const ExperimentConfig& config, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "shapes");

  Ensemble raw;
  GroundTruth truth;
  bool has_truth = false;
  if (config.ensemble_type == "box_bump") {
    BoxBumpParams p = config.box_bump;
    p.seed = split_seed(config.seed, kSeedEnsemble);
    std::tie(raw, truth) = gen_box_bump(p);
    has_truth = true;
  } else if (config.ensemble_type == "appendage") {
    AppendageParams p = config.appendage;
    p.seed = split_seed(config.seed, kSeedEnsemble);
    std::tie(raw, truth) = gen_appendage(p);
    has_truth = true;
  } else {
    raw = load_ensemble(config.input_dir);
  }

  Ensemble world = preprocess_ensemble(raw, config.preprocess, has_truth ? &truth : nullptr);
  save_ensemble(world, (fs::path(out_dir) / "shapes").string());
  for (const ShapeSample& s : world.samples)
    write_volume(s.sdf, (fs::path(out_dir) / "shapes" / (s.id + "_sdf")).string());
  if (has_truth) {
    fs::create_directories(fs::path(out_dir) / "truth");
    write_ground_truth(truth, (fs::path(out_dir) / "truth").string());
  }
}

WorldData load_world(const std::string& out_dir) {
  const std::string shapes = (fs::path(out_dir) / "shapes").string();
  if (!fs::is_directory(shapes))
    throw std::runtime_error("no shapes/ under '" + out_dir + "'; run the generate stage first");
  WorldData w;
  w.world = load_ensemble(shapes);
  w.world.world_frame = true;
  for (ShapeSample& s : w.world.samples) {
    s.sdf = read_volume((fs::path(shapes) / (s.id + "_sdf")).string());
    s.has_sdf = true;
  }
  if (fs::exists(fs::path(out_dir) / "truth" / "ground_truth.json")) {
    w.truth = read_ground_truth((fs::path(out_dir) / "truth").string());
    w.has_truth = true;
  }
  return w;
}

void stage_correspond(const ExperimentConfig& config, const std::string& out_dir,
                      const std::string& method) {
  WorldData w = load_world(out_dir);
  const std::string dir = method_dir(out_dir, method);
  fs::create_directories(dir);

  CorrespondenceModel model;
  if (method == "particles") {
    PbmConfig pc = config.particles;
    pc.seed = split_seed(config.seed, kSeedParticles);
    ParticleTrace trace;
    model = optimize_particles(w.world, pc, &trace);
    write_particle_trace(trace, dir + "/trace.csv");
  } else if (method == "spherical") {
    std::map<std::string, SpharmReport> reports;
    model = correspond_spherical(w.world, config.spherical, &reports);
    write_spharm_reports(reports, dir + "/reports.json");
  } else if (is_deform(method)) {
    Ensemble targets = coarsen_ensemble(w.world, coarse_spacing_for(config));
    TriangleMesh init = method == "deform_mean"
                            ? build_mean_template(w.world, coarse_spacing_for(config))
                            : build_sphere_template(w.world, config.deform_sphere_level);
    Atlas atlas = estimate_atlas(targets, init, config.deform);
    write_atlas(atlas, dir + "/atlas");
    model = correspond_deform(
        targets, atlas, std::min(config.deform.n_correspondences, atlas.template_mesh.n_vertices()));
    model.method = method;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  write_correspondences(model, dir + "/correspondences");
}

void stage_evaluate(const ExperimentConfig& config, const std::string& out_dir,
                    const std::string& method) {
  const std::string dir = method_dir(out_dir, method);
  CorrespondenceModel model = read_correspondences(dir + "/correspondences");

  MetricsConfig mc = config.metrics;
  mc.seed = split_seed(config.seed, kSeedMetrics);
  write_metrics_csv(evaluate_model(model, mc), dir + "/metrics.csv");

  PDM pdm = build_pdm(procrustes_align(model).first);
  write_pdm(pdm, dir + "/pdm.json");

  // Shapes sampled along the primary mode, the standard visual check that the
  // mode encodes one coherent deformation.
  fs::create_directories(dir + "/mode_walks");
  for (double t : kModeWalkStops) {
    char name[64];
    std::snprintf(name, sizeof(name), "mode1_t%+.1f.particles", t);
    write_points_file(CorrespondenceModel::unflatten(sample_mode(pdm, 1, t)),
                      dir + "/mode_walks/" + name);
  }
}

void stage_validate(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.cluster_k < 1) return;
  WorldData w = load_world(out_dir);

  std::vector<MeasurementRow> measurements;
  std::vector<PValueRow> pvalues;
  bool any_validated = false;
  for (const std::string& method : config.methods) {
    const std::string dir = method_dir(out_dir, method);
    if (!fs::exists(dir + "/correspondences/model.json")) continue;  // method failed upstream
    CorrespondenceModel model = read_correspondences(dir + "/correspondences");
    std::vector<int> labels =
        cluster_correspondences(model, config.cluster_k, config.cluster_restarts,
                                split_seed(config.seed, kSeedClustering));
    std::ostringstream csv;
    csv << "sample_id,cluster\n";
    for (int i = 0; i < model.n(); ++i) csv << model.ids[i] << ',' << labels[i] << '\n';
    write_text(dir + "/clusters.csv", csv.str());

    if (config.run_validation && w.has_truth) {
      ValidationResult res = validate_method(w.world, w.truth, model, labels, config.cluster_k,
                                             config.p_threshold);
      measurements.insert(measurements.end(), res.measurements.begin(), res.measurements.end());
      pvalues.insert(pvalues.end(), res.pvalues.begin(), res.pvalues.end());
      any_validated = true;
    }
  }
  if (any_validated) {
    fs::create_directories(fs::path(out_dir) / "validation");
    write_measurements_csv(measurements, (fs::path(out_dir) / "validation" / "measurements.csv").string());
    write_pvalues_csv(pvalues, config.cluster_k,
                      (fs::path(out_dir) / "validation" / "pvalues.csv").string());
  }
}

namespace {

// Cross-method summary assembled purely from on-disk artifacts, so the
// report can be rebuilt after the fact; absent pieces become "n/a" cells.
struct ReportAssembly {
  std::string csv;
  std::vector<std::string> missing;
};

ReportAssembly assemble_report(const std::string& out_dir) {
  ReportAssembly out;
  const std::vector<int> ks = {1, 2, 5};

  std::map<std::string, int> families;
  if (fs::exists(fs::path(out_dir) / "truth" / "ground_truth.json")) {
    GroundTruth truth = read_ground_truth((fs::path(out_dir) / "truth").string());
    for (const SampleTruth& t : truth.samples) families[t.id] = t.family;
  } else {
    out.missing.push_back("truth/ground_truth.json");
  }

  // per-method pass counts from the merged p-value table
  std::map<std::string, std::pair<int, int>> tests;  // method -> (passed, tested)
  const std::string pv_path = (fs::path(out_dir) / "validation" / "pvalues.csv").string();
  const bool have_pvalues = fs::exists(pv_path);
  if (have_pvalues) {
    std::ifstream in(pv_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells = split_csv_line(line);
      if (cells.size() < 3) continue;
      const std::string method = cells.front().substr(0, cells.front().find(':'));
      auto& [passed, tested] = tests[method];
      for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
        if (cells[i] == "skipped") continue;
        ++tested;
        if (std::stod(cells[i]) > 0.01) ++passed;
      }
    }
  }

  std::ostringstream csv;
  csv << "method";
  for (int k : ks) csv << ",compactness_" << k;
  for (int k : ks) csv << ",generalization_" << k;
  for (int k : ks) csv << ",specificity_" << k;
  csv << ",ari,ttest_passed,ttest_total\n";

  for (const std::string& method : kMethodNames) {
    const std::string dir = method_dir(out_dir, method);
    if (!fs::exists(dir)) continue;  // method was not part of this run
    csv << method;

    std::map<int, std::vector<std::string>> rows;  // k -> metrics.csv cells
    const std::string metrics_path = dir + "/metrics.csv";
    if (fs::exists(metrics_path)) {
      std::ifstream in(metrics_path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() == 4) rows[std::stoi(cells[0])] = cells;
      }
    } else {
      out.missing.push_back(method + "/metrics.csv");
    }
    for (int col = 1; col <= 3; ++col)
      for (int k : ks) {
        auto it = rows.find(k);
        csv << ',' << (it == rows.end() ? std::string("n/a") : it->second[col]);
      }

    // agreement between shape clusters and generative families
    std::string ari = "n/a";
    const std::string clusters_path = dir + "/clusters.csv";
    if (fs::exists(clusters_path) && !families.empty()) {
      std::ifstream in(clusters_path);
      std::string line;
      std::getline(in, line);
      std::vector<int> labels, truth_labels;
      bool complete = true;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != 2) continue;
        auto it = families.find(cells[0]);
        if (it == families.end()) {
          complete = false;
          break;
        }
        labels.push_back(std::stoi(cells[1]));
        truth_labels.push_back(it->second);
      }
      if (complete && !labels.empty()) {
        std::ostringstream fmt;
        fmt.precision(17);
        fmt << adjusted_rand_index(labels, truth_labels);
        ari = fmt.str();
      }
    } else if (!fs::exists(clusters_path)) {
      out.missing.push_back(method + "/clusters.csv");
    }
    csv << ',' << ari;

    if (have_pvalues && tests.count(method)) {
      csv << ',' << tests[method].first << ',' << tests[method].second;
    } else {
      csv << ",n/a,n/a";
    }
    csv << '\n';
  }
  out.csv = csv.str();
  return out;
}

}  // namespace

void stage_report(const std::string& out_dir) {
  ReportAssembly report = assemble_report(out_dir);
  write_text((fs::path(out_dir) / "report.csv").string(), report.csv);
  std::cout << report.csv;
  for (const std::string& path : report.missing)
    std::cout << "missing artifact: " << path << "\n";
}

bool ExperimentResult::all_succeeded() const {
  if (!generation_ok || !fatal_error.empty()) return false;
  for (const auto& [name, outcome] : outcomes)
    if (!outcome.succeeded) return false;
  return true;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  ExperimentResult result;
  fs::create_directories(out_dir);

  auto write_run_json = [&]() {
    json run;
    run["seed"] = config.seed;
    run["seeds_consumed"] = {{"ensemble", split_seed(config.seed, kSeedEnsemble)},
                             {"particles", split_seed(config.seed, kSeedParticles)},
                             {"metrics", split_seed(config.seed, kSeedMetrics)},
                             {"clustering", split_seed(config.seed, kSeedClustering)}};
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config.raw_json)));
    run["config_fnv1a64"] = hash;
    run["ensemble_type"] = config.ensemble_type;
    run["format_version"] = 1;
    if (!result.fatal_error.empty()) run["fatal_error"] = result.fatal_error;
    json methods = json::array();
    for (const std::string& name : config.methods) {
      json m;
      m["name"] = name;
      auto it = result.outcomes.find(name);
      m["succeeded"] = it != result.outcomes.end() && it->second.succeeded;
      if (it != result.outcomes.end() && !it->second.error.empty()) m["error"] = it->second.error;
      methods.push_back(std::move(m));
    }
    run["methods"] = methods;
    write_text((fs::path(out_dir) / "run.json").string(), run.dump(2) + "\n");
  };

  try {
    stage_generate(config, out_dir);
    result.generation_ok = true;
  } catch (const std::exception& e) {
    result.fatal_error = std::string("generate: ") + e.what();
    std::cerr << "generation failed: " << e.what() << "\n";
    write_run_json();
    return result;
  }

  for (const std::string& method : config.methods) {
    MethodOutcome outcome;
    try {
      stage_correspond(config, out_dir, method);
      stage_evaluate(config, out_dir, method);
      outcome.succeeded = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
      std::cerr << "method '" << method << "' failed: " << e.what() << "\n";
    }
    result.outcomes[method] = outcome;
  }

  try {
    stage_validate(config, out_dir);
  } catch (const std::exception& e) {
    result.fatal_error = std::string("validate: ") + e.what();
    std::cerr << "validation failed: " << e.what() << "\n";
  }

  stage_report(out_dir);
  write_run_json();
  return result;
}

}  // namespace ssm
