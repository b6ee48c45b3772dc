#include "topopred/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "topopred/errors.hpp"

namespace topopred {

namespace {

constexpr double kWeightFloor = 1e-12;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_truth(const Trajectory& truth, const Prediction& pred) {
  if (pred.terms.empty()) throw std::invalid_argument("prediction has no terms");
  if (2 * static_cast<Eigen::Index>(truth.size()) != pred.terms[0].mean.size())
    throw std::invalid_argument("truth length does not match the prediction horizon");
}

}  // namespace

double ade(const Trajectory& truth, const Prediction& pred) {
  check_truth(truth, pred);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pred.terms.size(); ++i)
    if (pred.terms[i].weight > pred.terms[best].weight) best = i;
  const Eigen::VectorXd& mean = pred.terms[best].mean;
  const std::size_t T = truth.size();
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t)
    total += std::hypot(truth.points[t].x - mean(2 * t), truth.points[t].y - mean(2 * t + 1));
  return total / static_cast<double>(T);
}

double amd(const Trajectory& truth, const Prediction& pred) {
  check_truth(truth, pred);
  const std::size_t T = truth.size();
  double total = 0.0;
  for (const PredictionTerm& term : pred.terms) {
    if (term.weight == 0.0) continue;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double a = term.covariance(2 * t, 2 * t);
      const double b = term.covariance(2 * t, 2 * t + 1);
      const double c = term.covariance(2 * t + 1, 2 * t + 1);
      const double det = a * c - b * b;
      if (!(a > 0.0) || !(det > 0.0))
        throw NumericalFailure("per-time covariance block is not positive definite");
      const double ex = truth.points[t].x - term.mean(2 * t);
      const double ey = truth.points[t].y - term.mean(2 * t + 1);
      sum += (c * ex * ex - 2.0 * b * ex * ey + a * ey * ey) / det;
    }
    total += term.weight * sum / static_cast<double>(T);
  }
  return total;
}

KldResult kld(const std::vector<double>& final_weights,
              const std::vector<double>& partial_weights) {
  if (final_weights.size() != partial_weights.size())
    throw IndexMismatch("weight vectors differ in length");
  KldResult result;
  for (std::size_t i = 0; i < final_weights.size(); ++i) {
    const double wf = final_weights[i];
    if (wf <= 0.0) continue;  // 0 log 0 = 0
    double wp = partial_weights[i];
    if (wp <= 0.0) {  // undefined term, floored and flagged
      wp = kWeightFloor;
      ++result.floored;
    }
    result.value += wf * (std::log(wf) - std::log(wp));
  }
  return result;
}

KldResult kld(const Prediction& final_pred, const Prediction& partial_pred) {
  if (final_pred.terms.size() != partial_pred.terms.size())
    throw IndexMismatch("predictions have different term counts");
  std::vector<double> wf, wp;
  wf.reserve(final_pred.terms.size());
  wp.reserve(partial_pred.terms.size());
  for (std::size_t i = 0; i < final_pred.terms.size(); ++i) {
    if (!(final_pred.terms[i].h == partial_pred.terms[i].h) ||
        final_pred.terms[i].component != partial_pred.terms[i].component)
      throw IndexMismatch("predictions index different (class, component) terms");
    wf.push_back(final_pred.terms[i].weight);
    wp.push_back(partial_pred.terms[i].weight);
  }
  return kld(wf, wp);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

MetricReport run_experiment(const TrainedModels& models, const Environment& env,
                            const TrajectoryDataset& test,
                            const std::vector<double>& fractions) {
  for (std::size_t i = 1; i < fractions.size(); ++i)
    if (!(fractions[i] > fractions[i - 1]))
      throw std::invalid_argument("fractions must be sorted ascending");
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0) throw std::invalid_argument("fractions must lie in (0, 1]");

  const int T = models.hierarchical.timesteps;
  std::vector<Word> support;
  for (const auto& [h, gmm] : models.hierarchical.per_class) support.push_back(h);

  HierarchicalGmm flat_as_class;
  flat_as_class.per_class[Word{}] = models.flat;
  flat_as_class.timesteps = T;
  flat_as_class.sigma_y = models.hierarchical.sigma_y;
  const std::map<Word, double> flat_posterior{{Word{}, 1.0}};

  MetricReport report;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const long long traj_id =
        test.ids.empty() ? static_cast<long long>(i) : test.ids[i];
    const Trajectory truth = resample_uniform(test.trajectories[i], T);

    const auto observe = [&](int t_obs) {
      Observation obs;
      obs.positions.assign(truth.points.begin(), truth.points.begin() + t_obs);
      obs.time_indices.resize(t_obs);
      for (int t = 0; t < t_obs; ++t) obs.time_indices[t] = t + 1;
      return obs;
    };
    const auto partial_word = [&](int t_obs) {
      if (t_obs < 2) return Word{};  // no segment yet, no crossings
      Trajectory prefix;
      prefix.points.assign(truth.points.begin(), truth.points.begin() + t_obs);
      prefix.timestamps.assign(truth.timestamps.begin(), truth.timestamps.begin() + t_obs);
      return partial_h_signature(prefix, env);
    };
    const auto evaluate = [&](int t_obs) {
      const Observation obs = observe(t_obs);
      const ClassPosterior post = posterior_over_full(
          partial_word(t_obs), models.vomp.psa, models.vomp.lengths, support);
      return std::pair<Prediction, Prediction>{
          predict(models.hierarchical, obs, post.probs),
          predict(flat_as_class, obs, flat_posterior)};
    };

    const auto [topo_final, naive_final] = evaluate(T);
    for (double f : fractions) {
      const int t_obs = std::min<int>(T, std::max<int>(1, static_cast<int>(std::ceil(f * T))));
      // A full observation is the final prediction itself; reusing it
      // keeps the divergence at exactly zero.
      const auto [topo, naive] =
          t_obs == T ? std::pair<Prediction, Prediction>{topo_final, naive_final}
                     : evaluate(t_obs);
      const KldResult topo_kld = kld(topo_final, topo);
      const KldResult naive_kld = kld(naive_final, naive);
      report.kld_floored += topo_kld.floored + naive_kld.floored;
      report.rows.push_back(MetricRow{traj_id, f, "topology", ade(truth, topo),
                                      amd(truth, topo), topo_kld.value});
      report.rows.push_back(MetricRow{traj_id, f, "naive", ade(truth, naive),
                                      amd(truth, naive), naive_kld.value});
    }
  }

  for (double f : fractions) {
    for (const std::string system : {"topology", "naive"}) {
      std::map<std::string, std::vector<double>> values;
      for (const MetricRow& row : report.rows) {
        if (row.fraction != f || row.system != system) continue;
        values["ade"].push_back(row.ade);
        values["amd"].push_back(row.amd);
        values["kld"].push_back(row.kld);
      }
      for (const auto& [metric, v] : values)
        report.aggregates.push_back(AggregateRow{f, system, metric, quantile(v, 0.5),
                                                 quantile(v, 0.25), quantile(v, 0.75)});
    }
  }
  return report;
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "traj_id,fraction,system,ade,amd,kld\n";
  for (const MetricRow& row : report.rows)
    out << row.traj_id << ',' << format_double(row.fraction) << ',' << row.system << ','
        << format_double(row.ade) << ',' << format_double(row.amd) << ','
        << format_double(row.kld) << "\n";
  return out.str();
}

std::string aggregates_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "fraction,system,metric,median,q25,q75\n";
  for (const AggregateRow& row : report.aggregates)
    out << format_double(row.fraction) << ',' << row.system << ',' << row.metric << ','
        << format_double(row.median) << ',' << format_double(row.q25) << ','
        << format_double(row.q75) << "\n";
  return out.str();
}

void write_report_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report file: " + path);
  out << report_to_csv(report);
}

void write_aggregate_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report file: " + path);
  out << aggregates_to_csv(report);
}

}  // namespace topopred
