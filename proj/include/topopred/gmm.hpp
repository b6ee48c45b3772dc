#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topopred/topology.hpp"

namespace topopred {

/// Full-covariance Gaussian over flattened trajectories, layout
/// [x_1, y_1, ..., x_T, y_T] in meters.
struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct Gmm {
  std::vector<double> weights;
  std::vector<GaussianComponent> components;

  int dim() const { return components.empty() ? 0 : static_cast<int>(components[0].mean.size()); }
  int size() const { return static_cast<int>(components.size()); }
};

/// One mixture per homotopy class, all over the same 2T dimensions.
struct HierarchicalGmm {
  std::map<Word, Gmm> per_class;
  int timesteps = 0;    // T
  double sigma_y = 0.1; // measurement noise std, meters

  int total_components() const;
};

/// Positions observed at a strictly increasing subset of the model's
/// timestep indices (1-based, within [1, T]).
struct Observation {
  std::vector<Point2> positions;
  std::vector<int> time_indices;

  std::size_t size() const { return positions.size(); }
};

struct PredictionTerm {
  Word h;
  int component = 0;
  double weight = 0.0;
  Eigen::VectorXd mean;       // conditional mean over all T timesteps
  Eigen::MatrixXd covariance; // conditional covariance
};

/// Conditioned mixture over full trajectories. Terms are ordered by
/// (class word, component index) and weights sum to one.
struct Prediction {
  std::vector<PredictionTerm> terms;
  bool likelihood_fallback = false;  // all observation likelihoods underflowed
};

Eigen::VectorXd flatten_trajectory(const Trajectory& traj);

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov);

/// EM with full covariances from a k-means++ style seeding. Adds reg * I
/// to every covariance each M-step; the log-likelihood trace (optional
/// out-parameter) is non-decreasing.
Gmm fit_em(const std::vector<Eigen::VectorXd>& data, int k, double reg, double tol,
           int max_iter, std::uint64_t seed, std::vector<double>* loglik_trace = nullptr);

struct ComponentsPolicy {
  enum class Mode { kBic, kFixed };
  Mode mode = Mode::kBic;
  int fixed_k = 1;
  int bic_max = 5;
};

/// Picks the component count by BIC over 1..bic_max (ties to the smaller
/// count). Returns the chosen k.
int select_k_bic(const std::vector<Eigen::VectorXd>& data, int bic_max, double reg,
                 double tol, int max_iter, std::uint64_t seed);

/// Auto covariance ridge: 1e-6 times the mean per-dimension variance,
/// floored so it stays positive on degenerate data.
double auto_regularization(const std::vector<Eigen::VectorXd>& data);

/// Fits one mixture per class. A class with fewer points than the
/// requested component count gets its count lowered; empty classes are
/// skipped with a warning on stderr.
HierarchicalGmm fit_hierarchical(const std::map<Word, std::vector<Eigen::VectorXd>>& dataset,
                                 const ComponentsPolicy& policy, double reg, double tol,
                                 int max_iter, std::uint64_t seed, int timesteps,
                                 double sigma_y);

struct ConditionResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double obs_loglik = 0.0;  // log N(y | M_O, Sigma_OO + sigma_y^2 I)
};

/// Conditions a component on noisy position measurements via the
/// standard partitioned-Gaussian formulas, solved through a Cholesky
/// factorization of the observed block.
ConditionResult condition_component(const GaussianComponent& comp, const Observation& obs,
                                    double sigma_y);

/// exp-normalizes log weights with max subtraction. All -inf yields an
/// empty vector.
std::vector<double> normalize_log_weights(const std::vector<double>& log_weights);

/// Conditions every (class, component) pair on the observation and mixes
/// with the class posterior. Weight of term (c,h) is proportional to
/// w^(c,h) * P(h|p) * exp(observation log-likelihood). If every weight
/// vanishes the prior weights scaled by the class posterior are used and
/// the fallback flag is set.
Prediction predict(const HierarchicalGmm& model, const Observation& obs,
                   const std::map<Word, double>& class_posterior);

struct TimeMarginal {
  double weight = 0.0;
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;
};

/// Per-component 2-D marginal at timestep t (1-based).
std::vector<TimeMarginal> time_marginal(const Prediction& pred, int t);

std::string hierarchical_to_json(const HierarchicalGmm& model);
HierarchicalGmm hierarchical_from_json(const std::string& text);
void save_hierarchical(const HierarchicalGmm& model, const std::string& path);
HierarchicalGmm load_hierarchical(const std::string& path);

std::string flat_gmm_to_json(const Gmm& gmm, int timesteps, double sigma_y);
Gmm flat_gmm_from_json(const std::string& text, int* timesteps = nullptr,
                       double* sigma_y = nullptr);
void save_flat_gmm(const Gmm& gmm, int timesteps, double sigma_y, const std::string& path);
Gmm load_flat_gmm(const std::string& path, int* timesteps = nullptr,
                  double* sigma_y = nullptr);

std::string prediction_to_json(const Prediction& pred,
                               const std::map<Word, double>* class_posterior = nullptr);
Prediction prediction_from_json(const std::string& text);

}  // namespace topopred
