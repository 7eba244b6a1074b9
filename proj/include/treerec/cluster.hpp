//
// Copyright 2026 The treerec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Dimensionality reduction and diagonal-covariance Gaussian mixtures.
//
// Data matrices are row-major in meaning: one row per item, one column per
// dimension.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/log.hpp"

namespace treerec::cluster {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix to_matrix(std::span<const Embedding> vectors) {
  if (vectors.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(vectors[0].dim()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != vectors[0].dim()) throw DimensionMismatch(vectors[0].dim(), vectors[i].dim());
    auto v = vectors[i].values();
    for (std::size_t j = 0; j < v.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Reduction
// ---------------------------------------------------------------------------

enum class ReduceMethod { pca, none };

struct ReducerConfig {
  ReduceMethod method = ReduceMethod::pca;
  std::size_t target_dim = 10;
};

inline std::string to_string(ReduceMethod m) { return m == ReduceMethod::pca ? "pca" : "none"; }

inline ReduceMethod parse_reduce_method(const std::string& s) {
  if (s == "pca") return ReduceMethod::pca;
  if (s == "none") return ReduceMethod::none;
  throw std::invalid_argument("unknown reducer '" + s + "'");
}

/// Fitted affine projection. An empty `components` matrix means identity.
struct Projection {
  Vector mean;
  Matrix components;  // target_dim x input_dim, orthonormal rows
  Vector explained_variance;

  bool is_identity() const { return components.size() == 0; }

  Matrix apply(const Matrix& data) const {
    if (is_identity()) return data;
    if (data.cols() != mean.size()) throw DimensionMismatch(mean.size(), data.cols());
    return (data.rowwise() - mean.transpose()) * components.transpose();
  }

  /// Maps reduced rows back into the input space.
  Matrix reconstruct(const Matrix& reduced) const {
    if (is_identity()) return reduced;
    return (reduced * components).rowwise() + mean.transpose();
  }
};

struct Reduction {
  Matrix data;
  Projection projection;
};

/// PCA via the eigendecomposition of the covariance (or, for wide data, Gram)
/// matrix. Output columns are ordered by decreasing explained variance; each
/// component's largest-magnitude loading is made positive.
inline Reduction reduce(const Matrix& data, const ReducerConfig& cfg) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (n < 2) throw std::invalid_argument("reduce: need at least 2 vectors");
  if (cfg.method == ReduceMethod::none) return {data, {}};
  const auto r = static_cast<Eigen::Index>(cfg.target_dim);
  if (r < 1 || r > d || r > n - 1)
    throw std::invalid_argument("reduce: target_dim must lie in [1, min(dim, n-1)]");

  Vector mean = data.colwise().mean();
  Matrix centered = data.rowwise() - mean.transpose();
  if (centered.cwiseAbs().maxCoeff() == 0) {
    log().warn("reduce: all input vectors are identical; falling back to identity");
    return {data, {}};
  }

  Matrix components(r, d);
  Vector variance(r);
  const double denom = static_cast<double>(n - 1);
  if (d <= n) {
    Matrix cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    for (Eigen::Index c = 0; c < r; ++c) {
      components.row(c) = eig.eigenvectors().col(d - 1 - c).transpose();
      variance(c) = std::max(0.0, eig.eigenvalues()(d - 1 - c));
    }
  } else {
    Matrix gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    for (Eigen::Index c = 0; c < r; ++c) {
      double lambda = eig.eigenvalues()(n - 1 - c);
      Vector axis = centered.transpose() * eig.eigenvectors().col(n - 1 - c);
      double len = axis.norm();
      if (lambda <= 0 || len == 0) {
        // Rank-deficient tail: any unit vector orthogonal to earlier axes will do.
        axis = Vector::Zero(d);
        for (Eigen::Index j = 0; j < d; ++j) {
          Vector e = Vector::Unit(d, j);
          for (Eigen::Index p = 0; p < c; ++p) e -= components.row(p).dot(e) * components.row(p).transpose();
          if (e.norm() > 1e-6) {
            axis = e;
            break;
          }
        }
        len = axis.norm();
        lambda = 0;
      }
      components.row(c) = (axis / len).transpose();
      variance(c) = lambda / denom;
    }
  }
  for (Eigen::Index c = 0; c < r; ++c) {
    Eigen::Index arg;
    components.row(c).cwiseAbs().maxCoeff(&arg);
    if (components(c, arg) < 0) components.row(c) *= -1;
  }

  Projection p{std::move(mean), std::move(components), std::move(variance)};
  Matrix reduced = p.apply(data);
  return {std::move(reduced), std::move(p)};
}

inline Reduction reduce(std::span<const Embedding> vectors, const ReducerConfig& cfg) {
  return reduce(to_matrix(vectors), cfg);
}

// ---------------------------------------------------------------------------
// Gaussian mixtures
// ---------------------------------------------------------------------------

inline constexpr double kVarianceFloor = 1e-6;

struct EmOptions {
  double tolerance = 1e-4;
  int max_iterations = 200;
};

struct GmmModel {
  std::size_t k = 0;
  Vector weights;           // k
  Matrix means;             // k x d
  Matrix variances;         // k x d, diagonal covariances
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  // Log-likelihood after initialization and after every EM step.
  std::vector<double> log_likelihood_trace;

  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }
  std::size_t parameter_count() const { return (k - 1) + 2 * k * dim(); }
};

namespace detail {

/// Per-item, per-component log(w_j N(x_i | mu_j, diag var_j)).
inline Matrix weighted_log_densities(const GmmModel& m, const Matrix& data) {
  const auto n = data.rows();
  const auto d = data.cols();
  const auto k = static_cast<Eigen::Index>(m.k);
  const double log_2pi = std::log(2 * std::numbers::pi);
  Matrix out(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double lw = m.weights(j) > 0 ? std::log(m.weights(j)) : -std::numeric_limits<double>::infinity();
    double log_det = 0;
    for (Eigen::Index c = 0; c < d; ++c) log_det += std::log(m.variances(j, c));
    const double base = lw - 0.5 * (static_cast<double>(d) * log_2pi + log_det);
    for (Eigen::Index i = 0; i < n; ++i) {
      double q = 0;
      for (Eigen::Index c = 0; c < d; ++c) {
        double diff = data(i, c) - m.means(j, c);
        q += diff * diff / m.variances(j, c);
      }
      out(i, j) = base - 0.5 * q;
    }
  }
  return out;
}

/// Normalizes rows of log densities in place into responsibilities; returns total log-likelihood.
inline double normalize_rows(Matrix& logp) {
  double total = 0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    double mx = logp.row(i).maxCoeff();
    double s = 0;
    for (Eigen::Index j = 0; j < logp.cols(); ++j) s += std::exp(logp(i, j) - mx);
    double lse = mx + std::log(s);
    total += lse;
    for (Eigen::Index j = 0; j < logp.cols(); ++j) logp(i, j) = std::exp(logp(i, j) - lse);
    // Renormalize so each row sums to 1 to rounding.
    logp.row(i) /= logp.row(i).sum();
  }
  return total;
}

inline Vector global_variance(const Matrix& data) {
  Vector mean = data.colwise().mean();
  Vector var = (data.rowwise() - mean.transpose()).array().square().colwise().mean();
  return var.cwiseMax(kVarianceFloor);
}

/// k-means++ seeding of k distinct data rows.
inline Matrix seed_means(const Matrix& data, std::size_t k, std::mt19937_64& rng) {
  const auto n = data.rows();
  Matrix means(static_cast<Eigen::Index>(k), data.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  means.row(0) = data.row(first(rng));
  Vector dist2 = (data.rowwise() - means.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double target = unit(rng) * total;
      double acc = 0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2(i);
        if (acc >= target && dist2(i) > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    means.row(static_cast<Eigen::Index>(c)) = data.row(pick);
    dist2 = dist2.cwiseMin((data.rowwise() - data.row(pick)).rowwise().squaredNorm());
  }
  return means;
}

}  // namespace detail

/// EM for a diagonal-covariance mixture. Stops when the log-likelihood gain
/// drops below `opts.tolerance` or after `opts.max_iterations` steps.
inline GmmModel fit_gmm(const Matrix& data, std::size_t k, std::uint64_t seed, const EmOptions& opts = {}) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (k < 1) throw std::invalid_argument("fit_gmm: k must be at least 1");
  if (d < 1) throw std::invalid_argument("fit_gmm: data must have at least one dimension");
  if (static_cast<std::size_t>(n) <= k)
    throw std::invalid_argument("fit_gmm: need more items than components (n=" + std::to_string(n) +
                                ", k=" + std::to_string(k) + ")");

  std::mt19937_64 rng(seed);
  GmmModel m;
  m.k = k;
  m.seed = seed;
  m.weights = Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  m.means = detail::seed_means(data, k, rng);
  m.variances = detail::global_variance(data).transpose().replicate(static_cast<Eigen::Index>(k), 1);

  Matrix resp = detail::weighted_log_densities(m, data);
  double ll = detail::normalize_rows(resp);
  m.log_likelihood_trace.push_back(ll);

  for (int it = 0; it < opts.max_iterations; ++it) {
    // M-step
    Vector nk = resp.colwise().sum();
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(k); ++j) {
      m.weights(j) = nk(j) / static_cast<double>(n);
      if (nk(j) <= 0) continue;  // dead component keeps its parameters at zero weight
      Vector mu = (resp.col(j).asDiagonal() * data).colwise().sum().transpose() / nk(j);
      m.means.row(j) = mu.transpose();
      Vector var = (resp.col(j).asDiagonal() * (data.rowwise() - mu.transpose()).array().square().matrix())
                       .colwise()
                       .sum()
                       .transpose() /
                   nk(j);
      m.variances.row(j) = var.cwiseMax(kVarianceFloor).transpose();
    }
    m.weights /= m.weights.sum();

    // E-step
    resp = detail::weighted_log_densities(m, data);
    double next = detail::normalize_rows(resp);
    m.log_likelihood_trace.push_back(next);
    m.iterations = it + 1;
    double gain = next - ll;
    ll = next;
    if (std::abs(gain) < opts.tolerance) {
      m.converged = true;
      break;
    }
  }
  m.log_likelihood = ll;
  return m;
}

/// BIC = p ln(n) - 2 ln L, p = (k-1) + 2kd.
inline double bic(const GmmModel& m, std::size_t n) {
  return static_cast<double>(m.parameter_count()) * std::log(static_cast<double>(n)) - 2 * m.log_likelihood;
}

struct BicPoint {
  std::size_t k;
  double bic;
};

struct BicSelection {
  GmmModel best;
  std::vector<BicPoint> curve;
};

/// Fits every k in [k_min, k_max] with k < n and keeps the lowest BIC (smaller k on ties).
inline BicSelection select_k_bic(const Matrix& data, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                                 const EmOptions& opts = {}) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k_min < 1 || k_min > k_max) throw std::invalid_argument("select_k_bic: empty k range");
  BicSelection out;
  bool have = false;
  double best_bic = 0;
  for (std::size_t k = k_min; k <= k_max && k < n; ++k) {
    GmmModel m = fit_gmm(data, k, seed, opts);
    double b = bic(m, n);
    out.curve.push_back({k, b});
    if (!have || b < best_bic) {
      best_bic = b;
      out.best = std::move(m);
      have = true;
    }
  }
  if (!have) throw std::invalid_argument("select_k_bic: no k in range satisfies k < n");
  return out;
}

inline void write_bic_csv(std::ostream& out, const std::vector<BicPoint>& curve) {
  out << "k,bic\n";
  for (const auto& p : curve) out << p.k << ',' << nlohmann::json(p.bic).dump() << '\n';
}

struct SoftAssignment {
  Matrix responsibilities;                         // n x k, row-stochastic
  std::vector<std::vector<std::size_t>> memberships;  // ascending cluster indices per item
};

/// Posterior responsibilities; an item belongs to every cluster with
/// responsibility >= threshold and always to its argmax cluster.
inline SoftAssignment soft_assign(const GmmModel& model, const Matrix& data, double threshold) {
  if (static_cast<std::size_t>(data.cols()) != model.dim()) throw DimensionMismatch(model.dim(), data.cols());
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("soft_assign: threshold must lie in (0, 1)");
  SoftAssignment out;
  out.responsibilities = detail::weighted_log_densities(model, data);
  detail::normalize_rows(out.responsibilities);
  out.memberships.resize(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    Eigen::Index arg;
    out.responsibilities.row(i).maxCoeff(&arg);
    auto& mem = out.memberships[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < out.responsibilities.cols(); ++j)
      if (j == arg || out.responsibilities(i, j) >= threshold) mem.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

}  // namespace treerec::cluster
