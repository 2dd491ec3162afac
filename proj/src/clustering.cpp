#include "msvad/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <string>

#include "msvad/error.hpp"

namespace msvad::cluster {

void AhcConfig::Validate() const {
  if (!(stop_threshold > -1.0 && stop_threshold < 1.0)) {
    throw Error(ErrorKind::kConfigError, "ahc stop_threshold must lie in (-1, 1)");
  }
  if (max_clusters < 1) throw Error(ErrorKind::kConfigError, "ahc max_clusters must be >= 1");
}

void VbHmmConfig::Validate() const {
  if (!(loop_prob > 0.0 && loop_prob < 1.0)) throw Error(ErrorKind::kConfigError, "vb loop_prob must lie in (0, 1)");
  if (max_iters < 1) throw Error(ErrorKind::kConfigError, "vb max_iters must be >= 1");
  if (!(elbo_tol >= 0.0)) throw Error(ErrorKind::kConfigError, "vb elbo_tol must be >= 0");
  if (shared_variance && !(*shared_variance > 0.0)) {
    throw Error(ErrorKind::kConfigError, "vb shared_variance must be positive");
  }
  if (!(prior_variance > 0.0)) throw Error(ErrorKind::kConfigError, "vb prior_variance must be positive");
  if (!(min_speaker_resp_s >= 0.0)) throw Error(ErrorKind::kConfigError, "vb min_speaker_resp_s must be >= 0");
}

namespace {

// Average-linkage agglomeration starting from the partition `groups`
// (labels 0..k-1). Similarity between groups is the mean pairwise cosine.
std::vector<int> AverageLinkage(const Eigen::MatrixXd& embeddings, const std::vector<int>& groups,
                                const AhcConfig& cfg) {
  cfg.Validate();
  const int rows = static_cast<int>(embeddings.rows());
  if (rows == 0) throw Error(ErrorKind::kEmptyInput, "no embeddings to cluster");
  if (static_cast<int>(groups.size()) != rows) {
    throw Error(ErrorKind::kDimensionMismatch, "one label per embedding required");
  }
  const int n = *std::max_element(groups.begin(), groups.end()) + 1;

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, embeddings.cols());
  std::vector<int> size(static_cast<std::size_t>(n), 0);
  for (int r = 0; r < rows; ++r) {
    const double norm = embeddings.row(r).norm();
    const int g = groups[static_cast<std::size_t>(r)];
    if (norm > 0.0) sums.row(g) += embeddings.row(r) / norm;
    ++size[static_cast<std::size_t>(g)];
  }
  Eigen::MatrixXd sim = sums * sums.transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = static_cast<double>(size[static_cast<std::size_t>(i)]) * size[static_cast<std::size_t>(j)];
      sim(i, j) = w > 0.0 ? sim(i, j) / w : 0.0;
    }
  }
  std::vector<bool> active(static_cast<std::size_t>(n));
  int clusters = 0;
  for (int i = 0; i < n; ++i) {
    active[static_cast<std::size_t>(i)] = size[static_cast<std::size_t>(i)] > 0;
    clusters += active[static_cast<std::size_t>(i)] ? 1 : 0;
  }
  std::vector<int> owner(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) owner[static_cast<std::size_t>(i)] = i;

  while (clusters > 1) {
    int bi = -1, bj = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (active[static_cast<std::size_t>(j)] && sim(i, j) > best) {
          best = sim(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (best < cfg.stop_threshold && clusters <= cfg.max_clusters) break;
    // Lance-Williams update for average linkage.
    const double wi = size[static_cast<std::size_t>(bi)];
    const double wj = size[static_cast<std::size_t>(bj)];
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const double v = (wi * sim(bi, k) + wj * sim(bj, k)) / (wi + wj);
      sim(bi, k) = v;
      sim(k, bi) = v;
    }
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    active[static_cast<std::size_t>(bj)] = false;
    for (int& o : owner) {
      if (o == bj) o = bi;
    }
    --clusters;
  }

  std::vector<int> remap(static_cast<std::size_t>(n), -1);
  std::vector<int> labels(static_cast<std::size_t>(rows));
  int next = 0;
  for (int r = 0; r < rows; ++r) {
    int& m = remap[static_cast<std::size_t>(owner[static_cast<std::size_t>(groups[static_cast<std::size_t>(r)])])];
    if (m < 0) m = next++;
    labels[static_cast<std::size_t>(r)] = m;
  }
  return labels;
}

}  // namespace

std::vector<int> AhcInit(const Eigen::MatrixXd& embeddings, const AhcConfig& cfg) {
  std::vector<int> singletons(static_cast<std::size_t>(embeddings.rows()));
  std::iota(singletons.begin(), singletons.end(), 0);
  return AverageLinkage(embeddings, singletons, cfg);
}

std::vector<int> MergeByLinkage(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                                const AhcConfig& cfg) {
  for (int l : labels) {
    if (l < 0) throw Error(ErrorKind::kInvalidArgument, "labels must be non-negative");
  }
  return AverageLinkage(embeddings, labels, cfg);
}

ForwardBackwardResult ForwardBackward(const Eigen::MatrixXd& log_emission,
                                      const Eigen::VectorXd& initial, double loop_prob) {
  const int t_len = static_cast<int>(log_emission.rows());
  const int s_len = static_cast<int>(log_emission.cols());
  ForwardBackwardResult out;
  out.gamma = Eigen::MatrixXd::Zero(t_len, s_len);
  if (t_len == 0 || s_len == 0) return out;

  const double stay = s_len == 1 ? 1.0 : loop_prob;
  const double move = s_len == 1 ? 0.0 : (1.0 - loop_prob) / (s_len - 1);
  // (A^T v)_s for A = stay on the diagonal, move elsewhere; A is symmetric.
  auto transit = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return (stay - move) * v + Eigen::VectorXd::Constant(s_len, move * v.sum());
  };

  Eigen::MatrixXd alpha(t_len, s_len);
  Eigen::VectorXd scale(t_len);
  Eigen::VectorXd peak(t_len);
  for (int t = 0; t < t_len; ++t) {
    peak(t) = log_emission.row(t).maxCoeff();
    const Eigen::VectorXd lik = (log_emission.row(t).transpose().array() - peak(t)).exp().matrix();
    Eigen::VectorXd a = t == 0 ? Eigen::VectorXd(initial.cwiseProduct(lik))
                               : Eigen::VectorXd(transit(alpha.row(t - 1).transpose()).cwiseProduct(lik));
    scale(t) = a.sum();
    if (!(scale(t) > 0.0)) {
      throw Error(ErrorKind::kNumericalFailure, "forward pass underflow at t=" + std::to_string(t));
    }
    alpha.row(t) = (a / scale(t)).transpose();
  }
  out.log_z = (scale.array().log() + peak.array()).sum();

  Eigen::VectorXd beta = Eigen::VectorXd::Ones(s_len);
  for (int t = t_len - 1; t >= 0; --t) {
    Eigen::VectorXd g = alpha.row(t).transpose().cwiseProduct(beta);
    out.gamma.row(t) = (g / g.sum()).transpose();
    if (t > 0) {
      const Eigen::VectorXd lik = (log_emission.row(t).transpose().array() - peak(t)).exp().matrix();
      beta = transit(lik.cwiseProduct(beta)) / scale(t);
    }
  }
  return out;
}

Eigen::MatrixXd ExpectedLogEmission(const Eigen::MatrixXd& x, const VbState& state, double sigma2) {
  const int t_len = static_cast<int>(x.rows());
  const int s_len = static_cast<int>(state.means.rows());
  const double d = static_cast<double>(x.cols());
  const double norm_const = -0.5 * d * std::log(2.0 * std::numbers::pi * sigma2);
  Eigen::MatrixXd out(t_len, s_len);
  for (int s = 0; s < s_len; ++s) {
    const double spread = d * state.variances(s);
    for (int t = 0; t < t_len; ++t) {
      const double dist2 = (x.row(t) - state.means.row(s)).squaredNorm();
      out(t, s) = norm_const - (dist2 + spread) / (2.0 * sigma2);
    }
  }
  return out;
}

namespace {

VbState MStep(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gamma, const Eigen::VectorXd& initial,
              double sigma2, double tau2) {
  VbState st;
  const int s_len = static_cast<int>(gamma.cols());
  st.means.resize(s_len, x.cols());
  st.variances.resize(s_len);
  for (int s = 0; s < s_len; ++s) {
    const double n_s = gamma.col(s).sum();
    const double v = 1.0 / (1.0 / tau2 + n_s / sigma2);
    st.variances(s) = v;
    st.means.row(s) = (v / sigma2) * (gamma.col(s).transpose() * x);
  }
  st.initial = initial;
  return st;
}

double KlToPrior(const VbState& st, double dim, double tau2) {
  double kl = 0.0;
  for (int s = 0; s < st.means.rows(); ++s) {
    const double ratio = st.variances(s) / tau2;
    kl += 0.5 * dim * (ratio - 1.0 - std::log(ratio)) + st.means.row(s).squaredNorm() / (2.0 * tau2);
  }
  return kl;
}

}  // namespace

VbResult VbHmmReseg(const Eigen::MatrixXd& x, const std::vector<int>& init_labels,
                    const std::vector<double>& durations, const VbHmmConfig& cfg) {
  cfg.Validate();
  const int t_len = static_cast<int>(x.rows());
  if (t_len == 0) throw Error(ErrorKind::kEmptyInput, "no embeddings for resegmentation");
  if (static_cast<int>(init_labels.size()) != t_len) {
    throw Error(ErrorKind::kInvalidArgument, "one initial label per embedding required");
  }
  if (!durations.empty() && static_cast<int>(durations.size()) != t_len) {
    throw Error(ErrorKind::kInvalidArgument, "one duration per embedding required");
  }
  const int s_init = *std::max_element(init_labels.begin(), init_labels.end()) + 1;
  if (*std::min_element(init_labels.begin(), init_labels.end()) < 0) {
    throw Error(ErrorKind::kInvalidArgument, "negative initial label");
  }
  const double dim = static_cast<double>(x.cols());
  const double tau2 = cfg.prior_variance;

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(t_len, s_init);
  for (int t = 0; t < t_len; ++t) gamma(t, init_labels[static_cast<std::size_t>(t)]) = 1.0;

  VbResult result;
  if (cfg.shared_variance) {
    result.sigma2 = *cfg.shared_variance;
  } else {
    // Within-cluster scatter per dimension under the hard initial labels.
    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(s_init, x.cols());
    Eigen::VectorXd counts = gamma.colwise().sum().transpose();
    centers = gamma.transpose() * x;
    for (int s = 0; s < s_init; ++s) {
      if (counts(s) > 0) centers.row(s) /= counts(s);
    }
    double scatter = 0.0;
    for (int t = 0; t < t_len; ++t) {
      scatter += (x.row(t) - centers.row(init_labels[static_cast<std::size_t>(t)])).squaredNorm();
    }
    result.sigma2 = std::max(scatter / (t_len * dim), 1e-4);
  }
  const double sigma2 = result.sigma2;

  std::vector<int> kept(static_cast<std::size_t>(s_init));
  for (int s = 0; s < s_init; ++s) kept[static_cast<std::size_t>(s)] = s;
  Eigen::VectorXd initial = Eigen::VectorXd::Constant(s_init, 1.0 / s_init);
  Eigen::VectorXd dur = durations.empty()
                            ? Eigen::VectorXd::Ones(t_len)
                            : Eigen::Map<const Eigen::VectorXd>(durations.data(), t_len).eval();

  while (true) {
    const int s_len = static_cast<int>(gamma.cols());
    VbRun run;
    run.n_speakers = s_len;
    VbState state;
    for (int it = 0; it < cfg.max_iters; ++it) {
      state = MStep(x, gamma, initial, sigma2, tau2);
      const Eigen::MatrixXd log_e = ExpectedLogEmission(x, state, sigma2);
      ForwardBackwardResult fb = ForwardBackward(log_e, state.initial, cfg.loop_prob);
      const double elbo = fb.log_z - KlToPrior(state, dim, tau2);
      if (!std::isfinite(elbo)) {
        throw Error(ErrorKind::kNumericalFailure, "ELBO became non-finite at iteration " + std::to_string(it + 1));
      }
      gamma = std::move(fb.gamma);
      initial = gamma.row(0).transpose();
      run.elbo.push_back(elbo);
      ++result.iterations;
      // One speaker: gamma is identically 1, so the next M-step reproduces
      // this one and the bound cannot move.
      if (s_len == 1) break;
      if (run.elbo.size() >= 2 && run.elbo.back() - run.elbo[run.elbo.size() - 2] < cfg.elbo_tol) break;
    }
    result.runs.push_back(run);
    result.state = state;

    const Eigen::VectorXd resp = gamma.transpose() * dur;
    std::vector<int> survivors;
    for (int s = 0; s < s_len; ++s) {
      if (resp(s) >= cfg.min_speaker_resp_s) survivors.push_back(s);
    }
    if (survivors.empty()) {
      int top = 0;
      resp.maxCoeff(&top);
      survivors.push_back(top);
    }
    if (static_cast<int>(survivors.size()) == s_len) break;

    Eigen::MatrixXd next(t_len, static_cast<int>(survivors.size()));
    Eigen::VectorXd next_initial(static_cast<int>(survivors.size()));
    std::vector<int> next_kept;
    for (std::size_t k = 0; k < survivors.size(); ++k) {
      next.col(static_cast<int>(k)) = gamma.col(survivors[k]);
      next_initial(static_cast<int>(k)) = initial(survivors[k]);
      next_kept.push_back(kept[static_cast<std::size_t>(survivors[k])]);
    }
    for (int t = 0; t < t_len; ++t) {
      const double row = next.row(t).sum();
      if (row > 0.0) next.row(t) /= row;
      else next.row(t).setConstant(1.0 / static_cast<double>(next.cols()));
    }
    const double init_sum = next_initial.sum();
    next_initial = init_sum > 0.0 ? Eigen::VectorXd(next_initial / init_sum)
                                  : Eigen::VectorXd::Constant(next.cols(), 1.0 / static_cast<double>(next.cols()));
    gamma = std::move(next);
    initial = std::move(next_initial);
    kept = std::move(next_kept);
  }

  result.gamma = gamma;
  result.kept = kept;
  result.labels.resize(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    int best = 0;
    for (int s = 1; s < gamma.cols(); ++s) {
      if (gamma(t, s) > gamma(t, best)) best = s;
    }
    result.labels[static_cast<std::size_t>(t)] = best;
  }
  return result;
}

}  // namespace msvad::cluster
