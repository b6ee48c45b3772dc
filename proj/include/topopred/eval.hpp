#pragma once

#include <string>
#include <vector>

#include "topopred/data.hpp"
#include "topopred/gmm.hpp"
#include "topopred/vomp.hpp"

namespace topopred {

/// Mean Euclidean error of the highest-weight component's conditional
/// mean, in meters. Ties go to the term earliest in (class, component)
/// order. The truth must be resampled to the model's T timesteps.
double ade(const Trajectory& truth, const Prediction& pred);

/// Weight-averaged squared Mahalanobis distance per timestep, using the
/// per-time 2x2 blocks of each conditioned component.
double amd(const Trajectory& truth, const Prediction& pred);

struct KldResult {
  double value = 0.0;  // nats
  long floored = 0;    // terms where the partial weight hit the 1e-12 floor
};

/// KL divergence from the final-trajectory weights to the partial ones,
/// with 0 log 0 = 0. Both vectors must index the same terms.
KldResult kld(const std::vector<double>& final_weights,
              const std::vector<double>& partial_weights);

/// Same, validating that the two predictions share their (class,
/// component) term lists.
KldResult kld(const Prediction& final_pred, const Prediction& partial_pred);

struct MetricRow {
  long long traj_id = 0;
  double fraction = 0.0;
  std::string system;  // "topology" or "naive"
  double ade = 0.0;
  double amd = 0.0;
  double kld = 0.0;
};

struct AggregateRow {
  double fraction = 0.0;
  std::string system;
  std::string metric;  // "ade", "amd", "kld"
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<AggregateRow> aggregates;
  long kld_floored = 0;
};

struct TrainedModels {
  VompModel vomp;
  HierarchicalGmm hierarchical;
  Gmm flat;
};

/// Observation-fraction sweep over a test set: for each trajectory and
/// fraction f, the first ceil(f T) resampled points are observed, both
/// systems are conditioned on them, and ADE/AMD/KLD are recorded. KLD
/// compares each system's weights against its own full-observation
/// weights.
MetricReport run_experiment(const TrainedModels& models, const Environment& env,
                            const TrajectoryDataset& test,
                            const std::vector<double>& fractions);

double quantile(std::vector<double> values, double q);

std::string report_to_csv(const MetricReport& report);
std::string aggregates_to_csv(const MetricReport& report);
void write_report_csv(const MetricReport& report, const std::string& path);
void write_aggregate_csv(const MetricReport& report, const std::string& path);

/// Small-multiples chart of the aggregate curves (one panel per metric,
/// median markers with quartile bars, lower is better).
std::string report_to_svg(const MetricReport& report);
void write_report_svg(const MetricReport& report, const std::string& path);

}  // namespace topopred
