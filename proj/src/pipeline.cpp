#include "topopred/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topopred/errors.hpp"
#include "topopred/rng.hpp"

namespace topopred {

namespace fs = std::filesystem;

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_fraction_list(const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void assign_key(Config& c, const std::string& key, const std::string& value) {
  if (key == "environment") c.environment_path = value;
  else if (key == "data") c.data_source = value;
  else if (key == "output") c.output_dir = value;
  else if (key == "T" || key == "timesteps") c.timesteps = std::stoi(value);
  else if (key == "epsilon") c.epsilon = std::stod(value);
  else if (key == "L" || key == "max_order") c.max_order = std::stoi(value);
  else if (key == "sigma_y") c.sigma_y = std::stod(value);
  else if (key == "components") c.components = value;
  else if (key == "reg") c.reg = value == "auto" ? 0.0 : std::stod(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "fractions") c.fractions = parse_fraction_list(value);
  else if (key == "num_trajectories") c.num_trajectories = std::stoi(value);
  else if (key == "grid_resolution") c.grid_resolution = std::stod(value);
  else if (key == "obstacle_radius") c.obstacle_radius = std::stod(value);
  else if (key == "noise_std") c.noise_std = value == "auto" ? -1.0 : std::stod(value);
  else if (key == "train_fraction") c.train_fraction = std::stod(value);
  else if (key == "csv_time_col") c.csv_time_col = std::stoi(value);
  else if (key == "csv_id_col") c.csv_id_col = std::stoi(value);
  else if (key == "csv_x_col") c.csv_x_col = std::stoi(value);
  else if (key == "csv_y_col") c.csv_y_col = std::stoi(value);
  else if (key == "unit_scale") c.unit_scale = std::stod(value);
  else if (key == "gap_threshold_s") c.gap_threshold_s = std::stod(value);
  else if (key == "min_points") c.min_points = std::stoi(value);
  else if (key == "border_tolerance")
    c.border_tolerance = value == "auto" ? -1.0 : std::stod(value);
  else if (key == "em_tol") c.em_tol = std::stod(value);
  else if (key == "em_max_iter") c.em_max_iter = std::stoi(value);
  else if (key == "write_svg") c.write_svg = (value == "true" || value == "1");
  else throw Error("unknown config key: " + key);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "environment", "data", "output", "timesteps", "epsilon", "max_order", "sigma_y",
      "components", "reg", "seed", "fractions", "num_trajectories", "grid_resolution",
      "obstacle_radius", "noise_std", "train_fraction", "csv_time_col", "csv_id_col",
      "csv_x_col", "csv_y_col", "unit_scale", "gap_threshold_s", "min_points",
      "border_tolerance", "em_tol", "em_max_iter", "write_svg"};
  return keys;
}

void validate_config(const Config& c) {
  if (c.timesteps < 2) throw Error("timesteps must be >= 2");
  if (c.epsilon <= 0.0) throw Error("epsilon must be positive");
  if (c.max_order < 1) throw Error("max_order must be >= 1");
  if (c.sigma_y < 0.0) throw Error("sigma_y must be nonnegative");
  if (c.train_fraction <= 0.0 || c.train_fraction >= 1.0)
    throw Error("train_fraction must lie in (0, 1)");
  for (double f : c.fractions)
    if (f <= 0.0 || f > 1.0) throw Error("fractions must lie in (0, 1]");
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_manifest(const Config& config, const std::string& command,
                    const nlohmann::json& extra) {
  nlohmann::json j = nlohmann::json::parse(config_to_json(config));
  j["command"] = command;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  write_text_file((fs::path(config.output_dir) / ("manifest_" + command + ".json")).string(),
                  j.dump(2) + "\n");
}

}  // namespace

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  Config config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim_copy(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) + " is not 'key = value'");
    assign_key(config, trim_copy(stripped.substr(0, eq)), trim_copy(stripped.substr(eq + 1)));
  }
  return config;
}

void apply_env_overrides(Config& config) {
  for (const std::string& key : config_keys()) {
    std::string env_name = "TOPOPRED_" + key;
    std::transform(env_name.begin(), env_name.end(), env_name.begin(),
                   [](unsigned char ch) { return std::toupper(ch); });
    if (const char* value = std::getenv(env_name.c_str())) assign_key(config, key, value);
  }
}

std::string config_to_json(const Config& c) {
  nlohmann::json j;
  j["environment"] = c.environment_path;
  j["data"] = c.data_source;
  j["output"] = c.output_dir;
  j["timesteps"] = c.timesteps;
  j["epsilon"] = c.epsilon;
  j["max_order"] = c.max_order;
  j["sigma_y"] = c.sigma_y;
  j["components"] = c.components;
  j["reg"] = c.reg;
  j["seed"] = c.seed;
  j["fractions"] = c.fractions;
  j["num_trajectories"] = c.num_trajectories;
  j["grid_resolution"] = c.grid_resolution;
  j["obstacle_radius"] = c.obstacle_radius;
  j["noise_std"] = c.noise_std;
  j["train_fraction"] = c.train_fraction;
  j["csv_time_col"] = c.csv_time_col;
  j["csv_id_col"] = c.csv_id_col;
  j["csv_x_col"] = c.csv_x_col;
  j["csv_y_col"] = c.csv_y_col;
  j["unit_scale"] = c.unit_scale;
  j["gap_threshold_s"] = c.gap_threshold_s;
  j["min_points"] = c.min_points;
  j["border_tolerance"] = c.border_tolerance;
  j["em_tol"] = c.em_tol;
  j["em_max_iter"] = c.em_max_iter;
  j["write_svg"] = c.write_svg;
  return j.dump(2) + "\n";
}

ComponentsPolicy components_policy(const Config& config) {
  ComponentsPolicy policy;
  if (config.components == "bic") {
    policy.mode = ComponentsPolicy::Mode::kBic;
  } else if (config.components.rfind("fixed:", 0) == 0) {
    policy.mode = ComponentsPolicy::Mode::kFixed;
    policy.fixed_k = std::stoi(config.components.substr(6));
    if (policy.fixed_k < 1) throw Error("fixed component count must be >= 1");
  } else {
    throw Error("components must be 'bic' or 'fixed:<k>'");
  }
  return policy;
}

int cmd_generate(const Config& config) {
  validate_config(config);
  const Environment env = load_environment(config.environment_path);
  fs::create_directories(config.output_dir);

  TrajectoryDataset ds;
  long filtered_out = 0;
  if (config.data_source == "synthetic") {
    SyntheticOptions opts;
    opts.grid_resolution = config.grid_resolution;
    opts.obstacle_radius = config.obstacle_radius;
    opts.noise_std = config.noise_std;
    ds = generate_synthetic(env, config.num_trajectories, config.seed, opts);
  } else {
    ColumnMap columns{config.csv_time_col, config.csv_id_col, config.csv_x_col,
                      config.csv_y_col};
    const CsvParseResult parsed =
        parse_trajectory_csv(config.data_source, columns, config.unit_scale);
    if (parsed.skipped > 0)
      std::cerr << "warning: skipped " << parsed.skipped << " unparseable csv rows\n";
    std::vector<Trajectory> trajs =
        assemble_trajectories(parsed.records, config.gap_threshold_s, config.min_points);
    const std::size_t before = trajs.size();
    trajs = filter_border_crossing(trajs, env, config.border_tolerance);
    filtered_out = static_cast<long>(before - trajs.size());
    const double tol = config.border_tolerance < 0.0
                           ? 0.01 * env.boundary().extent()
                           : config.border_tolerance;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      ds.labels.push_back(h_signature(trajs[i], env, BoundaryCheck{true, tol}));
      ds.trajectories.push_back(std::move(trajs[i]));
      ds.ids.push_back(static_cast<long long>(i));
    }
  }

  if (ds.size() == 0) std::cerr << "warning: generated dataset is empty\n";
  save_dataset(ds, (fs::path(config.output_dir) / "dataset.jsonl").string());

  std::map<std::string, long> class_counts;
  for (const Word& h : ds.labels) ++class_counts[h.str()];
  nlohmann::json extra;
  extra["dataset"] = "dataset.jsonl";
  extra["num_generated"] = ds.size();
  extra["filtered_out"] = filtered_out;
  extra["class_counts"] = class_counts;
  write_manifest(config, "generate", extra);
  std::cout << "generate: wrote " << ds.size() << " trajectories to "
            << config.output_dir << "/dataset.jsonl\n";
  return 0;
}

TrainedModels train_models(const Config& config, const Environment& env,
                           const TrajectoryDataset& train) {
  const int n = static_cast<int>(env.num_obstacles());
  std::vector<Word> corpus = train.labels;
  const CorpusStats stats = collect_stats(corpus, config.max_order, 2 * n);

  TrainedModels models;
  const PstNode root = build_pst(stats, config.epsilon);
  models.vomp.psa = complete_to_psa(root, stats, config.epsilon);
  models.vomp.lengths = estimate_length_distribution(stats);

  std::map<Word, std::vector<Eigen::VectorXd>> by_class;
  std::vector<Eigen::VectorXd> all_vectors;
  for (std::size_t i = 0; i < train.size(); ++i) {
    Eigen::VectorXd v =
        flatten_trajectory(resample_uniform(train.trajectories[i], config.timesteps));
    by_class[train.labels[i]].push_back(v);
    all_vectors.push_back(std::move(v));
  }
  models.hierarchical =
      fit_hierarchical(by_class, components_policy(config), config.reg, config.em_tol,
                       config.em_max_iter, config.seed, config.timesteps, config.sigma_y);

  // Baseline with the same total number of mixture components.
  const int total = models.hierarchical.total_components();
  const double reg_eff = config.reg > 0.0 ? config.reg : auto_regularization(all_vectors);
  models.flat = fit_em(all_vectors, std::min<int>(total, static_cast<int>(all_vectors.size())),
                       reg_eff, config.em_tol, config.em_max_iter, mix_seed(config.seed, 0));
  return models;
}

int cmd_train(const Config& config) {
  validate_config(config);
  const Environment env = load_environment(config.environment_path);
  const TrajectoryDataset ds =
      load_dataset((fs::path(config.output_dir) / "dataset.jsonl").string());
  revalidate_labels(ds, env);
  const auto [train, test] = split_dataset(ds, config.train_fraction, config.seed);
  if (train.size() == 0) throw EmptyCorpus("training split is empty");

  const TrainedModels models = train_models(config, env, train);

  save_vomp(models.vomp, (fs::path(config.output_dir) / "vomp.json").string());
  save_hierarchical(models.hierarchical,
                    (fs::path(config.output_dir) / "hgmm.json").string());
  save_flat_gmm(models.flat, config.timesteps, config.sigma_y,
                (fs::path(config.output_dir) / "flat_gmm.json").string());

  std::map<std::string, long> train_counts;
  for (const Word& h : train.labels) ++train_counts[h.str()];
  nlohmann::json components;
  for (const auto& [h, gmm] : models.hierarchical.per_class)
    components[h.str()] = gmm.size();
  nlohmann::json extra;
  extra["train_size"] = train.size();
  extra["test_size"] = test.size();
  extra["class_counts"] = train_counts;
  extra["components_per_class"] = components;
  extra["total_components"] = models.hierarchical.total_components();
  extra["psa_states"] = models.vomp.psa.states.size();
  write_manifest(config, "train", extra);
  std::cout << "train: " << models.vomp.psa.states.size() << " sequence-model states, "
            << models.hierarchical.per_class.size() << " classes, "
            << models.hierarchical.total_components() << " components total\n";
  return 0;
}

int cmd_predict(const Config& config, const std::string& prefix_path,
                const std::string& output_path) {
  validate_config(config);
  const Environment env = load_environment(config.environment_path);
  const VompModel vomp = load_vomp((fs::path(config.output_dir) / "vomp.json").string());
  const HierarchicalGmm hier =
      load_hierarchical((fs::path(config.output_dir) / "hgmm.json").string());
  if (hier.timesteps != config.timesteps)
    throw Error("model was trained with T = " + std::to_string(hier.timesteps) +
                " but the configuration requests T = " + std::to_string(config.timesteps));

  const nlohmann::json row = nlohmann::json::parse(read_text_file(prefix_path));
  const auto xs = row.at("x").get<std::vector<double>>();
  const auto ys = row.at("y").get<std::vector<double>>();
  if (xs.size() != ys.size()) throw Error("prefix x/y arrays differ in length");
  if (static_cast<int>(xs.size()) > hier.timesteps)
    throw Error("prefix is longer than the model horizon T = " +
                std::to_string(hier.timesteps));

  Observation obs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    obs.positions.push_back(Point2{xs[i], ys[i]});
    obs.time_indices.push_back(static_cast<int>(i) + 1);
  }

  Word p;
  if (obs.size() >= 2) {
    Trajectory prefix;
    prefix.points = obs.positions;
    for (std::size_t i = 0; i < obs.size(); ++i)
      prefix.timestamps.push_back(static_cast<double>(i));
    p = partial_h_signature(prefix, env);
  }

  std::vector<Word> support;
  for (const auto& [h, gmm] : hier.per_class) support.push_back(h);
  const ClassPosterior posterior =
      posterior_over_full(p, vomp.psa, vomp.lengths, support);
  const Prediction pred = predict(hier, obs, posterior.probs);

  write_text_file(output_path, prediction_to_json(pred, &posterior.probs));
  std::cout << "predict: partial signature " << p.str() << ", wrote " << output_path
            << "\n";
  return 0;
}

int cmd_eval(const Config& config) {
  validate_config(config);
  const Environment env = load_environment(config.environment_path);
  const TrajectoryDataset ds =
      load_dataset((fs::path(config.output_dir) / "dataset.jsonl").string());
  const auto [train, test] = split_dataset(ds, config.train_fraction, config.seed);
  if (test.size() == 0) throw Error("test split is empty");

  TrainedModels models;
  models.vomp = load_vomp((fs::path(config.output_dir) / "vomp.json").string());
  models.hierarchical =
      load_hierarchical((fs::path(config.output_dir) / "hgmm.json").string());
  models.flat = load_flat_gmm((fs::path(config.output_dir) / "flat_gmm.json").string());

  std::vector<double> fractions = config.fractions;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  const MetricReport report = run_experiment(models, env, test, fractions);
  write_report_csv(report, (fs::path(config.output_dir) / "report.csv").string());
  write_aggregate_csv(report, (fs::path(config.output_dir) / "aggregate.csv").string());
  if (config.write_svg)
    write_report_svg(report, (fs::path(config.output_dir) / "metrics.svg").string());

  nlohmann::json extra;
  extra["test_size"] = test.size();
  extra["rows"] = report.rows.size();
  extra["kld_floored_terms"] = report.kld_floored;
  write_manifest(config, "eval", extra);
  std::cout << "eval: " << report.rows.size() << " rows over " << test.size()
            << " test trajectories\n";
  return 0;
}

}  // namespace topopred
