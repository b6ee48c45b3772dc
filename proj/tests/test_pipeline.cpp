#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "topopred/pipeline.hpp"

using namespace topopred;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("topopred_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Environment tuned_toy() {
  return Environment(BoundingBox{{0, 0}, {10, 6}},
                     {Obstacle{1, {1.8, 0.6}, {}}, Obstacle{2, {5.0, 1.6}, {}}});
}

Config small_config(const TempDir& dir) {
  Config config;
  config.environment_path = (dir.path / "env.json").string();
  config.output_dir = (dir.path / "out").string();
  config.timesteps = 20;
  config.num_trajectories = 120;
  config.grid_resolution = 0.25;
  config.obstacle_radius = 0.7;
  config.seed = 31;
  config.components = "fixed:1";
  config.fractions = {0.25, 0.5, 1.0};
  config.write_svg = true;
  save_environment(tuned_toy(), config.environment_path);
  return config;
}

}  // namespace

TEST_CASE("config file parsing and overrides") {
  TempDir dir("config");
  const fs::path cfg = dir.path / "run.conf";
  spit(cfg,
       "# comment line\n"
       "environment = env.json\n"
       "timesteps = 40\n"
       "epsilon = 0.02\n"
       "seed = 7\n"
       "fractions = 0.1, 0.5, 1.0\n"
       "components = fixed:3\n"
       "reg = auto\n");
  Config config = parse_config_file(cfg.string());
  CHECK(config.environment_path == "env.json");
  CHECK(config.timesteps == 40);
  CHECK(config.epsilon == 0.02);
  CHECK(config.seed == 7);
  CHECK(config.fractions == std::vector<double>{0.1, 0.5, 1.0});
  CHECK(config.reg == 0.0);
  const ComponentsPolicy policy = components_policy(config);
  CHECK(policy.mode == ComponentsPolicy::Mode::kFixed);
  CHECK(policy.fixed_k == 3);

  // Environment variables override the file.
  setenv("TOPOPRED_TIMESTEPS", "64", 1);
  setenv("TOPOPRED_SEED", "99", 1);
  apply_env_overrides(config);
  unsetenv("TOPOPRED_TIMESTEPS");
  unsetenv("TOPOPRED_SEED");
  CHECK(config.timesteps == 64);
  CHECK(config.seed == 99);

  spit(cfg, "bogus_key = 1\n");
  CHECK_THROWS(parse_config_file(cfg.string()));
  spit(cfg, "no equals sign here\n");
  CHECK_THROWS(parse_config_file(cfg.string()));

  Config bad;
  bad.components = "elbow";
  CHECK_THROWS(components_policy(bad));
}

TEST_CASE("generate, train, eval write their artifacts deterministically") {
  TempDir dir("chain");
  const Config config = small_config(dir);

  REQUIRE(cmd_generate(config) == 0);
  const fs::path out = config.output_dir;
  REQUIRE(fs::exists(out / "dataset.jsonl"));
  REQUIRE(fs::exists(out / "manifest_generate.json"));
  const std::string dataset_once = slurp(out / "dataset.jsonl");
  {
    std::istringstream lines(dataset_once);
    std::string line;
    int count = 0;
    while (std::getline(lines, line))
      if (!line.empty()) ++count;
    CHECK(count == config.num_trajectories);
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest_generate.json"));
  CHECK(manifest.at("command") == "generate");
  CHECK(manifest.at("seed") == 31);
  CHECK(manifest.at("class_counts").size() >= 2);

  REQUIRE(cmd_train(config) == 0);
  REQUIRE(fs::exists(out / "vomp.json"));
  REQUIRE(fs::exists(out / "hgmm.json"));
  REQUIRE(fs::exists(out / "flat_gmm.json"));
  const auto train_manifest = nlohmann::json::parse(slurp(out / "manifest_train.json"));
  CHECK(train_manifest.at("epsilon") == 0.01);
  CHECK(train_manifest.at("max_order") == 5);
  CHECK(train_manifest.at("seed") == 31);
  CHECK(train_manifest.contains("class_counts"));
  // Baseline parity: the flat model carries the summed component count.
  int total = 0;
  for (const auto& [h, k] : train_manifest.at("components_per_class").items())
    total += k.get<int>();
  CHECK(train_manifest.at("total_components") == total);
  const Gmm flat = load_flat_gmm((out / "flat_gmm.json").string());
  CHECK(flat.size() == total);

  REQUIRE(cmd_eval(config) == 0);
  REQUIRE(fs::exists(out / "report.csv"));
  REQUIRE(fs::exists(out / "aggregate.csv"));
  REQUIRE(fs::exists(out / "metrics.svg"));
  const std::string report_once = slurp(out / "report.csv");
  const std::string aggregate_once = slurp(out / "aggregate.csv");
  const std::string vomp_once = slurp(out / "vomp.json");
  const std::string hgmm_once = slurp(out / "hgmm.json");

  // Re-run the whole chain into a fresh directory with the same seed.
  TempDir dir2("chain2");
  Config config2 = small_config(dir2);
  REQUIRE(cmd_generate(config2) == 0);
  REQUIRE(cmd_train(config2) == 0);
  REQUIRE(cmd_eval(config2) == 0);
  const fs::path out2 = config2.output_dir;
  CHECK(slurp(out2 / "dataset.jsonl") == dataset_once);
  CHECK(slurp(out2 / "vomp.json") == vomp_once);
  CHECK(slurp(out2 / "hgmm.json") == hgmm_once);
  CHECK(slurp(out2 / "report.csv") == report_once);
  CHECK(slurp(out2 / "aggregate.csv") == aggregate_once);
}

TEST_CASE("generate with zero trajectories succeeds with an empty dataset") {
  TempDir dir("empty");
  Config config = small_config(dir);
  config.num_trajectories = 0;
  CHECK(cmd_generate(config) == 0);
  CHECK(slurp(fs::path(config.output_dir) / "dataset.jsonl").empty());
}

TEST_CASE("generate ingests csv trajectories") {
  TempDir dir("csv");
  Config config = small_config(dir);
  config.data_source = (dir.path / "tracks.csv").string();
  config.unit_scale = 1.0;
  config.min_points = 3;
  config.border_tolerance = 0.3;

  // Two border-to-border tracks and one that stops mid-domain.
  std::ostringstream csv;
  for (int i = 0; i <= 20; ++i)
    csv << 0.5 * i << ",1," << 0.5 * i << "," << 3.0 + 0.05 * i << "\n";
  for (int i = 0; i <= 20; ++i)
    csv << 0.5 * i << ",2," << 0.5 * i << "," << 0.2 << "\n";
  for (int i = 0; i <= 10; ++i)
    csv << 0.5 * i << ",3," << 0.25 * i << "," << 3.0 << "\n";
  spit(dir.path / "tracks.csv", csv.str());

  REQUIRE(cmd_generate(config) == 0);
  const TrajectoryDataset ds =
      load_dataset((fs::path(config.output_dir) / "dataset.jsonl").string());
  CHECK(ds.size() == 2);  // the third track fails the border requirement
}

TEST_CASE("predict emits a class posterior and conditioned mixture") {
  TempDir dir("predict");
  const Config config = small_config(dir);
  REQUIRE(cmd_generate(config) == 0);
  REQUIRE(cmd_train(config) == 0);
  const fs::path out = config.output_dir;

  // Prefix that has already cleared both rays: the final class is
  // certain.
  nlohmann::json row;
  row["id"] = 0;
  row["t"] = {0.0, 1.0, 2.0, 3.0};
  row["x"] = {0.0, 2.0, 4.0, 6.0};
  row["y"] = {2.5, 2.5, 2.5, 2.5};
  row["h"] = nlohmann::json::array();
  spit(dir.path / "prefix.json", row.dump());
  const fs::path pred_path = dir.path / "prediction.json";
  REQUIRE(cmd_predict(config, (dir.path / "prefix.json").string(), pred_path.string()) == 0);

  const auto pred_json = nlohmann::json::parse(slurp(pred_path));
  std::map<std::string, double> posterior;
  for (const auto& entry : pred_json.at("class_posterior"))
    posterior[nlohmann::json(entry[0]).dump()] = entry[1].get<double>();
  CHECK(posterior.at("[1,2]") == doctest::Approx(1.0).epsilon(1e-9));
  double weight_sum = 0.0;
  for (const auto& jt : pred_json.at("terms")) weight_sum += jt.at("weight").get<double>();
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-9));

  // Empty prefix: the posterior is the unconditioned one.
  nlohmann::json empty_row;
  empty_row["id"] = 0;
  empty_row["t"] = nlohmann::json::array();
  empty_row["x"] = nlohmann::json::array();
  empty_row["y"] = nlohmann::json::array();
  spit(dir.path / "empty.json", empty_row.dump());
  REQUIRE(cmd_predict(config, (dir.path / "empty.json").string(), pred_path.string()) == 0);
  const auto empty_json = nlohmann::json::parse(slurp(pred_path));

  const VompModel vomp = load_vomp((out / "vomp.json").string());
  const HierarchicalGmm hier = load_hierarchical((out / "hgmm.json").string());
  std::vector<Word> support;
  for (const auto& [h, gmm] : hier.per_class) support.push_back(h);
  const ClassPosterior expected =
      posterior_over_full(Word{}, vomp.psa, vomp.lengths, support);
  for (const auto& entry : empty_json.at("class_posterior")) {
    const Word h(entry[0].get<std::vector<Letter>>());
    CHECK(entry[1].get<double>() == doctest::Approx(expected.probs.at(h)).epsilon(1e-12));
  }

  // Longer prefix than the model horizon is a configuration error.
  nlohmann::json long_row;
  long_row["id"] = 0;
  std::vector<double> t, x, y;
  for (int i = 0; i < 50; ++i) {
    t.push_back(i);
    x.push_back(0.1 * i);
    y.push_back(2.0);
  }
  long_row["t"] = t;
  long_row["x"] = x;
  long_row["y"] = y;
  spit(dir.path / "long.json", long_row.dump());
  CHECK_THROWS(cmd_predict(config, (dir.path / "long.json").string(), pred_path.string()));
}
