#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace msvad::cluster {

// Average-linkage agglomerative clustering on cosine similarity.
struct AhcConfig {
  // Merging stops once the best average similarity drops below this and no
  // more than max_clusters clusters remain. Default calibrated on the
  // synthetic corpus (see configs/default.toml).
  double stop_threshold = 0.7;
  int max_clusters = 10;
  void Validate() const;
};

// Rows of `embeddings` are the vectors. Returns one label per row, numbered
// 0.. in order of first appearance. Ties between equally similar pairs go to
// the pair with the lowest indices. Throws Error{kEmptyInput}.
std::vector<int> AhcInit(const Eigen::MatrixXd& embeddings, const AhcConfig& cfg);

// Continues average-linkage merging from an existing partition under the
// same stopping rule. Used to undo VB splits that AHC would not accept.
std::vector<int> MergeByLinkage(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                                const AhcConfig& cfg);

// Bayesian HMM resegmentation. States are speakers with spherical Gaussian
// emissions N(mu_s, sigma^2 I) and Gaussian priors mu_s ~ N(0, tau^2 I).
// Transitions stay with loop_prob and otherwise move uniformly to another
// speaker; the initial-state distribution is re-estimated each iteration.
struct VbHmmConfig {
  double loop_prob = 0.99;
  int max_iters = 10;
  double elbo_tol = 1e-4;
  // sigma^2; nullopt estimates it from the initial labels.
  std::optional<double> shared_variance;
  double prior_variance = 1.0;  // tau^2
  // Speakers whose summed responsibility-weighted duration falls below this
  // after convergence are removed and the VB loop is re-run.
  double min_speaker_resp_s = 2.0;
  void Validate() const;
};

struct ForwardBackwardResult {
  Eigen::MatrixXd gamma;  // T x S state marginals
  double log_z = 0.0;     // log of the summed path weight
};

// Scaled forward-backward for the HMM above, with per-frame log emission
// scores (T x S) and initial-state probabilities (size S).
ForwardBackwardResult ForwardBackward(const Eigen::MatrixXd& log_emission,
                                      const Eigen::VectorXd& initial, double loop_prob);

// Speaker posterior state of one VB run.
struct VbState {
  Eigen::MatrixXd means;      // S x D posterior means of mu_s
  Eigen::VectorXd variances;  // S posterior variances (isotropic)
  Eigen::VectorXd initial;    // S initial-state probabilities
};

// Expected emission log-likelihoods E_q[log N(x_t; mu_s, sigma^2 I)].
Eigen::MatrixXd ExpectedLogEmission(const Eigen::MatrixXd& x, const VbState& state, double sigma2);

struct VbRun {
  int n_speakers = 0;
  std::vector<double> elbo;  // one value per iteration
};

struct VbResult {
  Eigen::MatrixXd gamma;  // T x S_final responsibilities, rows sum to 1
  std::vector<int> labels;  // argmax speaker per row (column index of gamma)
  std::vector<int> kept;    // for each final column, its initial label
  double sigma2 = 0.0;
  VbState state;
  std::vector<VbRun> runs;
  int iterations = 0;  // total over all runs
};

// durations gives the seconds each embedding stands for (used only for the
// speaker-dropping rule); empty means one second each.
// Throws Error{kNumericalFailure} on a non-finite ELBO and
// Error{kInvalidArgument} on malformed inputs.
VbResult VbHmmReseg(const Eigen::MatrixXd& x, const std::vector<int>& init_labels,
                    const std::vector<double>& durations, const VbHmmConfig& cfg);

}  // namespace msvad::cluster
