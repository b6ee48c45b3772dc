#include "topopred/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topopred/errors.hpp"
#include "topopred/rng.hpp"

namespace topopred {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> cholesky_or_throw(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalFailure(what);
  return llt;
}

double log_density_with_llt(const Eigen::VectorXd& diff,
                            const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd& L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  return -0.5 * (static_cast<double>(diff.size()) * kLog2Pi + logdet + z.squaredNorm());
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace

int HierarchicalGmm::total_components() const {
  int total = 0;
  for (const auto& [h, gmm] : per_class) total += gmm.size();
  return total;
}

Eigen::VectorXd flatten_trajectory(const Trajectory& traj) {
  Eigen::VectorXd v(2 * static_cast<Eigen::Index>(traj.points.size()));
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    v(2 * i) = traj.points[i].x;
    v(2 * i + 1) = traj.points[i].y;
  }
  return v;
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
  const auto llt = cholesky_or_throw(cov, "covariance is not positive definite");
  return log_density_with_llt(x - mean, llt);
}

namespace {

// k-means++ seeding: each new mean is sampled with probability
// proportional to the squared distance to the nearest chosen one.
std::vector<Eigen::VectorXd> seed_means(const std::vector<Eigen::VectorXd>& data, int k,
                                        Rng& rng) {
  std::vector<Eigen::VectorXd> means;
  means.reserve(k);
  means.push_back(data[rng.uniform_index(data.size())]);
  std::vector<double> dist2(data.size(), 0.0);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& m : means) best = std::min(best, (data[i] - m).squaredNorm());
      dist2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        acc += dist2[i];
        if (acc >= target) { pick = i; break; }
        pick = i;
      }
    } else {
      pick = rng.uniform_index(data.size());
    }
    means.push_back(data[pick]);
  }
  return means;
}

}  // namespace

Gmm fit_em(const std::vector<Eigen::VectorXd>& data, int k, double reg, double tol,
           int max_iter, std::uint64_t seed, std::vector<double>* loglik_trace) {
  if (k < 1) throw std::invalid_argument("component count must be >= 1");
  if (reg <= 0.0) throw std::invalid_argument("covariance regularization must be positive");
  if (static_cast<int>(data.size()) < k)
    throw DegenerateData("fewer data points than mixture components");
  const Eigen::Index d = data[0].size();
  const std::size_t n = data.size();
  for (const auto& x : data)
    if (x.size() != d) throw std::invalid_argument("data vectors differ in dimension");

  Rng rng(seed);
  Gmm gmm;
  gmm.weights.assign(k, 1.0 / k);
  const std::vector<Eigen::VectorXd> seeds = seed_means(data, k, rng);

  Eigen::VectorXd grand_mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : data) grand_mean += x;
  grand_mean /= static_cast<double>(n);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : data) {
    const Eigen::VectorXd diff = x - grand_mean;
    scatter.noalias() += diff * diff.transpose();
  }
  scatter /= static_cast<double>(n);
  scatter += reg * Eigen::MatrixXd::Identity(d, d);
  symmetrize(scatter);

  gmm.components.resize(k);
  for (int c = 0; c < k; ++c) gmm.components[c] = GaussianComponent{seeds[c], scatter};

  Eigen::MatrixXd log_resp(n, k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // E-step
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    llts.reserve(k);
    for (int c = 0; c < k; ++c) {
      Eigen::LLT<Eigen::MatrixXd> llt(gmm.components[c].covariance);
      if (llt.info() != Eigen::Success)
        throw SingularCovariance("component covariance lost positive definiteness");
      llts.push_back(std::move(llt));
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row_max = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        log_resp(i, c) = std::log(gmm.weights[c]) +
                         log_density_with_llt(data[i] - gmm.components[c].mean, llts[c]);
        row_max = std::max(row_max, log_resp(i, c));
      }
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(log_resp(i, c) - row_max);
      const double lse = row_max + std::log(sum);
      ll += lse;
      for (int c = 0; c < k; ++c) log_resp(i, c) = std::exp(log_resp(i, c) - lse);
    }
    if (loglik_trace) loglik_trace->push_back(ll);
    if (iter > 0 && ll - prev_ll < tol) break;
    prev_ll = ll;

    // M-step
    for (int c = 0; c < k; ++c) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += log_resp(i, c);
      if (mass < 1e-12) continue;  // starved component keeps its parameters
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
      for (std::size_t i = 0; i < n; ++i) mean += log_resp(i, c) * data[i];
      mean /= mass;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd diff = data[i] - mean;
        cov.noalias() += log_resp(i, c) * (diff * diff.transpose());
      }
      cov /= mass;
      cov += reg * Eigen::MatrixXd::Identity(d, d);
      symmetrize(cov);
      gmm.weights[c] = mass / static_cast<double>(n);
      gmm.components[c].mean = std::move(mean);
      gmm.components[c].covariance = std::move(cov);
    }
    double wsum = 0.0;
    for (double w : gmm.weights) wsum += w;
    for (double& w : gmm.weights) w /= wsum;
  }
  return gmm;
}

double auto_regularization(const std::vector<Eigen::VectorXd>& data) {
  if (data.empty()) return 1e-9;
  const Eigen::Index d = data[0].size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : data) mean += x;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& x : data) var += (x - mean).squaredNorm();
  var /= static_cast<double>(data.size()) * static_cast<double>(d);
  return std::max(1e-6 * var, 1e-9);
}

int select_k_bic(const std::vector<Eigen::VectorXd>& data, int bic_max, double reg,
                 double tol, int max_iter, std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  const int d = static_cast<int>(data[0].size());
  int best_k = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= std::min(bic_max, n); ++k) {
    std::vector<double> trace;
    fit_em(data, k, reg, tol, max_iter, mix_seed(seed, k), &trace);
    const double ll = trace.back();
    const double params = (k - 1) + k * d + k * d * (d + 1) / 2.0;
    const double bic = -2.0 * ll + params * std::log(static_cast<double>(n));
    if (bic < best_bic) {
      best_bic = bic;
      best_k = k;
    }
  }
  return best_k;
}

HierarchicalGmm fit_hierarchical(const std::map<Word, std::vector<Eigen::VectorXd>>& dataset,
                                 const ComponentsPolicy& policy, double reg, double tol,
                                 int max_iter, std::uint64_t seed, int timesteps,
                                 double sigma_y) {
  HierarchicalGmm model;
  model.timesteps = timesteps;
  model.sigma_y = sigma_y;
  std::uint64_t class_index = 0;
  for (const auto& [h, vectors] : dataset) {
    ++class_index;
    if (vectors.empty()) {
      std::cerr << "warning: class " << h.str() << " has no trajectories, skipping\n";
      continue;
    }
    const double reg_eff = reg > 0.0 ? reg : auto_regularization(vectors);
    const std::uint64_t sub_seed = mix_seed(seed, class_index);
    int k = policy.mode == ComponentsPolicy::Mode::kFixed
                ? policy.fixed_k
                : select_k_bic(vectors, policy.bic_max, reg_eff, tol, max_iter, sub_seed);
    k = std::min<int>(k, static_cast<int>(vectors.size()));
    model.per_class[h] = fit_em(vectors, k, reg_eff, tol, max_iter, sub_seed);
  }
  return model;
}

namespace {

std::vector<Eigen::Index> observed_dims(const Observation& obs, Eigen::Index dim) {
  if (obs.positions.size() != obs.time_indices.size())
    throw std::invalid_argument("observation positions and indices differ in length");
  std::vector<Eigen::Index> dims;
  dims.reserve(2 * obs.size());
  int prev = 0;
  for (int t : obs.time_indices) {
    if (t <= prev) throw std::invalid_argument("observation indices must increase strictly");
    if (2 * t > dim) throw std::invalid_argument("observation index beyond model horizon");
    dims.push_back(2 * (t - 1));
    dims.push_back(2 * (t - 1) + 1);
    prev = t;
  }
  return dims;
}

}  // namespace

ConditionResult condition_component(const GaussianComponent& comp, const Observation& obs,
                                    double sigma_y) {
  const Eigen::Index dim = comp.mean.size();
  if (obs.size() == 0) return ConditionResult{comp.mean, comp.covariance, 0.0};

  const std::vector<Eigen::Index> od = observed_dims(obs, dim);
  const Eigen::Index m = static_cast<Eigen::Index>(od.size());

  Eigen::VectorXd y(m), mean_o(m);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    y(2 * i) = obs.positions[i].x;
    y(2 * i + 1) = obs.positions[i].y;
  }
  for (Eigen::Index i = 0; i < m; ++i) mean_o(i) = comp.mean(od[i]);

  Eigen::MatrixXd cross(dim, m);   // Sigma_{.,O}
  Eigen::MatrixXd block(m, m);     // Sigma_{O,O}
  for (Eigen::Index j = 0; j < m; ++j) cross.col(j) = comp.covariance.col(od[j]);
  for (Eigen::Index i = 0; i < m; ++i) block.row(i) = cross.row(od[i]);
  block += sigma_y * sigma_y * Eigen::MatrixXd::Identity(m, m);
  symmetrize(block);

  Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("observed covariance block is not positive definite");

  const Eigen::VectorXd residual = y - mean_o;
  ConditionResult result;
  const Eigen::MatrixXd gain = llt.solve(cross.transpose()).transpose();
  result.mean = comp.mean + gain * residual;
  result.covariance = comp.covariance - gain * cross.transpose();
  symmetrize(result.covariance);
  result.obs_loglik = log_density_with_llt(residual, llt);
  return result;
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_weights) {
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw)) return {};
  std::vector<double> weights(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    weights[i] = std::exp(log_weights[i] - max_lw);
    total += weights[i];
  }
  for (double& w : weights) w /= total;
  return weights;
}

Prediction predict(const HierarchicalGmm& model, const Observation& obs,
                   const std::map<Word, double>& class_posterior) {
  for (const auto& [h, prob] : class_posterior)
    if (!model.per_class.count(h))
      throw std::invalid_argument("class posterior names a class absent from the model");

  Prediction pred;
  std::vector<double> log_weights;
  for (const auto& [h, gmm] : model.per_class) {
    const auto it = class_posterior.find(h);
    const double class_prob = it == class_posterior.end() ? 0.0 : it->second;
    for (int c = 0; c < gmm.size(); ++c) {
      ConditionResult cond = condition_component(gmm.components[c], obs, model.sigma_y);
      PredictionTerm term;
      term.h = h;
      term.component = c;
      term.mean = std::move(cond.mean);
      term.covariance = std::move(cond.covariance);
      pred.terms.push_back(std::move(term));
      log_weights.push_back(std::log(gmm.weights[c]) + std::log(class_prob) +
                            cond.obs_loglik);
    }
  }

  std::vector<double> weights = normalize_log_weights(log_weights);
  if (weights.empty()) {
    // Observation likelihood vanished everywhere: fall back to the prior
    // weights scaled by the class posterior.
    pred.likelihood_fallback = true;
    std::size_t idx = 0;
    double total = 0.0;
    weights.resize(pred.terms.size());
    for (const auto& [h, gmm] : model.per_class) {
      const auto it = class_posterior.find(h);
      const double class_prob = it == class_posterior.end() ? 0.0 : it->second;
      for (int c = 0; c < gmm.size(); ++c, ++idx) {
        weights[idx] = gmm.weights[c] * class_prob;
        total += weights[idx];
      }
    }
    if (total <= 0.0) {
      for (double& w : weights) w = 1.0 / static_cast<double>(weights.size());
    } else {
      for (double& w : weights) w /= total;
    }
  }
  for (std::size_t i = 0; i < pred.terms.size(); ++i) pred.terms[i].weight = weights[i];
  return pred;
}

std::vector<TimeMarginal> time_marginal(const Prediction& pred, int t) {
  std::vector<TimeMarginal> out;
  out.reserve(pred.terms.size());
  for (const PredictionTerm& term : pred.terms) {
    if (t < 1 || 2 * t > term.mean.size())
      throw std::invalid_argument("timestep outside the prediction horizon");
    TimeMarginal m;
    m.weight = term.weight;
    m.mean = term.mean.segment<2>(2 * (t - 1));
    m.covariance = term.covariance.block<2, 2>(2 * (t - 1), 2 * (t - 1));
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();  // row-major, full matrix
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) j.push_back(m(r, c));
  return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index dim) {
  if (static_cast<Eigen::Index>(j.size()) != dim * dim)
    throw Error("covariance entry count does not match dimension");
  Eigen::MatrixXd m(dim, dim);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = j[idx++].get<double>();
  return m;
}

nlohmann::json gmm_to_json(const Gmm& gmm) {
  nlohmann::json j;
  j["weights"] = gmm.weights;
  j["components"] = nlohmann::json::array();
  for (const GaussianComponent& comp : gmm.components) {
    nlohmann::json jc;
    jc["mean"] = vector_to_json(comp.mean);
    jc["covariance"] = matrix_to_json(comp.covariance);
    j["components"].push_back(std::move(jc));
  }
  return j;
}

Gmm gmm_from_json(const nlohmann::json& j) {
  Gmm gmm;
  gmm.weights = j.at("weights").get<std::vector<double>>();
  for (const auto& jc : j.at("components")) {
    GaussianComponent comp;
    comp.mean = vector_from_json(jc.at("mean"));
    comp.covariance = matrix_from_json(jc.at("covariance"), comp.mean.size());
    gmm.components.push_back(std::move(comp));
  }
  if (gmm.weights.size() != gmm.components.size())
    throw Error("mixture weight count does not match component count");
  return gmm;
}

}  // namespace

std::string hierarchical_to_json(const HierarchicalGmm& model) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["model"] = "hierarchical-gmm";
  j["timesteps"] = model.timesteps;
  j["sigma_y"] = model.sigma_y;
  j["classes"] = nlohmann::json::array();
  for (const auto& [h, gmm] : model.per_class) {
    nlohmann::json jc = gmm_to_json(gmm);
    jc["h"] = h.letters();
    j["classes"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

HierarchicalGmm hierarchical_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("model").get<std::string>() != "hierarchical-gmm")
    throw Error("not a hierarchical gmm model file");
  HierarchicalGmm model;
  model.timesteps = j.at("timesteps").get<int>();
  model.sigma_y = j.at("sigma_y").get<double>();
  for (const auto& jc : j.at("classes"))
    model.per_class[Word(jc.at("h").get<std::vector<Letter>>())] = gmm_from_json(jc);
  return model;
}

void save_hierarchical(const HierarchicalGmm& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << hierarchical_to_json(model);
}

HierarchicalGmm load_hierarchical(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return hierarchical_from_json(buf.str());
}

std::string flat_gmm_to_json(const Gmm& gmm, int timesteps, double sigma_y) {
  nlohmann::json j = gmm_to_json(gmm);
  j["format_version"] = 1;
  j["model"] = "flat-gmm";
  j["timesteps"] = timesteps;
  j["sigma_y"] = sigma_y;
  return j.dump(2) + "\n";
}

Gmm flat_gmm_from_json(const std::string& text, int* timesteps, double* sigma_y) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("model").get<std::string>() != "flat-gmm") throw Error("not a flat gmm model file");
  if (timesteps) *timesteps = j.at("timesteps").get<int>();
  if (sigma_y) *sigma_y = j.at("sigma_y").get<double>();
  return gmm_from_json(j);
}

void save_flat_gmm(const Gmm& gmm, int timesteps, double sigma_y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << flat_gmm_to_json(gmm, timesteps, sigma_y);
}

Gmm load_flat_gmm(const std::string& path, int* timesteps, double* sigma_y) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return flat_gmm_from_json(buf.str(), timesteps, sigma_y);
}

std::string prediction_to_json(const Prediction& pred,
                               const std::map<Word, double>* class_posterior) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["likelihood_fallback"] = pred.likelihood_fallback;
  if (class_posterior) {
    nlohmann::json jp = nlohmann::json::array();
    for (const auto& [h, prob] : *class_posterior)
      jp.push_back(nlohmann::json::array({h.letters(), prob}));
    j["class_posterior"] = std::move(jp);
  }
  j["terms"] = nlohmann::json::array();
  for (const PredictionTerm& term : pred.terms) {
    nlohmann::json jt;
    jt["h"] = term.h.letters();
    jt["component"] = term.component;
    jt["weight"] = term.weight;
    jt["mean"] = vector_to_json(term.mean);
    jt["covariance"] = matrix_to_json(term.covariance);
    j["terms"].push_back(std::move(jt));
  }
  return j.dump(2) + "\n";
}

Prediction prediction_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Prediction pred;
  pred.likelihood_fallback = j.at("likelihood_fallback").get<bool>();
  for (const auto& jt : j.at("terms")) {
    PredictionTerm term;
    term.h = Word(jt.at("h").get<std::vector<Letter>>());
    term.component = jt.at("component").get<int>();
    term.weight = jt.at("weight").get<double>();
    term.mean = vector_from_json(jt.at("mean"));
    term.covariance = matrix_from_json(jt.at("covariance"), term.mean.size());
    pred.terms.push_back(std::move(term));
  }
  return pred;
}

}  // namespace topopred
