#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "topopred/pipeline.hpp"

namespace {

// CLI flags override environment variables, which override the config
// file. Only flags the user actually passed are applied.
void add_config_options(CLI::App* app, topopred::Config& config) {
  app->add_option("--environment", config.environment_path, "environment json file");
  app->add_option("--data", config.data_source, "'synthetic' or a trajectory csv path");
  app->add_option("--output", config.output_dir, "output directory");
  app->add_option("-T,--timesteps", config.timesteps, "trajectory timesteps T");
  app->add_option("--epsilon", config.epsilon, "suffix-tree growth threshold");
  app->add_option("-L,--max-order", config.max_order, "maximum context length L");
  app->add_option("--sigma-y", config.sigma_y, "measurement noise std [m]");
  app->add_option("--components", config.components, "'bic' or 'fixed:<k>'");
  app->add_option("--reg", config.reg, "covariance ridge (<= 0 for auto)");
  app->add_option("--seed", config.seed, "rng seed");
  app->add_option("--fractions", config.fractions, "observed fractions to evaluate")
      ->delimiter(',');
  app->add_option("--num-trajectories", config.num_trajectories,
                  "synthetic trajectory count");
  app->add_option("--grid-resolution", config.grid_resolution, "lattice spacing [m]");
  app->add_option("--obstacle-radius", config.obstacle_radius,
                  "blocking radius for point obstacles [m]");
  app->add_option("--noise-std", config.noise_std, "waypoint jitter std [m], < 0 for auto");
  app->add_option("--train-fraction", config.train_fraction, "train split fraction");
  app->add_option("--csv-time-col", config.csv_time_col, "csv column of the timestamp");
  app->add_option("--csv-id-col", config.csv_id_col, "csv column of the person id");
  app->add_option("--csv-x-col", config.csv_x_col, "csv column of x");
  app->add_option("--csv-y-col", config.csv_y_col, "csv column of y");
  app->add_option("--unit-scale", config.unit_scale, "source unit to meters factor");
  app->add_option("--gap-threshold", config.gap_threshold_s,
                  "split tracks at time gaps larger than this [s]");
  app->add_option("--min-points", config.min_points, "minimum samples per trajectory");
  app->add_option("--border-tolerance", config.border_tolerance,
                  "border-crossing tolerance [m], < 0 for auto");
  app->add_option("--em-tol", config.em_tol, "EM stopping tolerance");
  app->add_option("--em-max-iter", config.em_max_iter, "EM iteration cap");
  app->add_flag("--svg,!--no-svg", config.write_svg, "write the metrics chart");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topology-informed trajectory prediction"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  app.add_option("-c,--config", config_path, "config file (key = value lines)")
      ->expected(1);

  topopred::Config config;
  CLI::App* generate = app.add_subcommand("generate", "build a labeled dataset");
  CLI::App* train = app.add_subcommand("train", "fit the sequence and mixture models");
  CLI::App* predict = app.add_subcommand("predict", "condition on a trajectory prefix");
  CLI::App* eval = app.add_subcommand("eval", "run the observation-fraction sweep");
  for (CLI::App* sub : {generate, train, predict, eval}) add_config_options(sub, config);

  std::string prefix_path, prediction_out = "prediction.json";
  predict->add_option("prefix", prefix_path, "dataset-row json file with the observed prefix")
      ->required();
  predict->add_option("--out", prediction_out, "prediction output path");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    // Re-resolve: defaults < file < environment < explicit flags.
    topopred::Config resolved;
    if (!config_path.empty()) resolved = topopred::parse_config_file(config_path);
    topopred::apply_env_overrides(resolved);
    // CLI11 already wrote parsed flags into `config`; copy over only what
    // the user passed.
    const auto passed = [&](const std::string& name) {
      return sub->count(name) > 0;
    };
    if (passed("--environment")) resolved.environment_path = config.environment_path;
    if (passed("--data")) resolved.data_source = config.data_source;
    if (passed("--output")) resolved.output_dir = config.output_dir;
    if (passed("--timesteps")) resolved.timesteps = config.timesteps;
    if (passed("--epsilon")) resolved.epsilon = config.epsilon;
    if (passed("--max-order")) resolved.max_order = config.max_order;
    if (passed("--sigma-y")) resolved.sigma_y = config.sigma_y;
    if (passed("--components")) resolved.components = config.components;
    if (passed("--reg")) resolved.reg = config.reg;
    if (passed("--seed")) resolved.seed = config.seed;
    if (passed("--fractions")) resolved.fractions = config.fractions;
    if (passed("--num-trajectories")) resolved.num_trajectories = config.num_trajectories;
    if (passed("--grid-resolution")) resolved.grid_resolution = config.grid_resolution;
    if (passed("--obstacle-radius")) resolved.obstacle_radius = config.obstacle_radius;
    if (passed("--noise-std")) resolved.noise_std = config.noise_std;
    if (passed("--train-fraction")) resolved.train_fraction = config.train_fraction;
    if (passed("--csv-time-col")) resolved.csv_time_col = config.csv_time_col;
    if (passed("--csv-id-col")) resolved.csv_id_col = config.csv_id_col;
    if (passed("--csv-x-col")) resolved.csv_x_col = config.csv_x_col;
    if (passed("--csv-y-col")) resolved.csv_y_col = config.csv_y_col;
    if (passed("--unit-scale")) resolved.unit_scale = config.unit_scale;
    if (passed("--gap-threshold")) resolved.gap_threshold_s = config.gap_threshold_s;
    if (passed("--min-points")) resolved.min_points = config.min_points;
    if (passed("--border-tolerance")) resolved.border_tolerance = config.border_tolerance;
    if (passed("--em-tol")) resolved.em_tol = config.em_tol;
    if (passed("--em-max-iter")) resolved.em_max_iter = config.em_max_iter;
    if (passed("--svg") || passed("--no-svg")) resolved.write_svg = config.write_svg;

    if (sub == generate) return topopred::cmd_generate(resolved);
    if (sub == train) return topopred::cmd_train(resolved);
    if (sub == predict) return topopred::cmd_predict(resolved, prefix_path, prediction_out);
    if (sub == eval) return topopred::cmd_eval(resolved);
    std::cerr << "unknown subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
