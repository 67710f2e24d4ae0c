#include "meow/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "meow/rng.hpp"

namespace meow::cluster {

namespace {

double sq_dist(const Matrix& points, std::size_t row, const Matrix& centroids,
               std::size_t cluster) {
  double s = 0.0;
  for (std::size_t j = 0; j < points.cols(); ++j) {
    const double d = points(row, j) - centroids(cluster, j);
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (k == 0 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");
  if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters must be >= 1");

  Rng rng(seed);
  Matrix centroids(k, d);

  // k-means++ seeding: D^2 sampling from the seeded stream.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
    for (std::size_t j = 0; j < d; ++j) centroids(0, j) = points(first, j);
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], sq_dist(points, i, centroids, c - 1));
        total += d2[i];
      }
      std::size_t pick;
      if (total > 0.0) {
        const double u = rng.uniform01() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
      } else {
        pick = static_cast<std::size_t>(rng.uniform_int(n));  // all points coincide
      }
      for (std::size_t j = 0; j < d; ++j) centroids(c, j) = points(pick, j);
    }
  }

  KMeansResult res;
  res.assign.assign(n, 0);
  std::vector<std::size_t> counts(k, 0);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // assignment: nearest centroid, ties to the lowest cluster id
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t bi = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = sq_dist(points, i, centroids, c);
        if (dist < best) {
          best = dist;
          bi = static_cast<std::uint32_t>(c);
        }
      }
      if (res.assign[i] != bi) {
        res.assign[i] = bi;
        changed = true;
      }
    }

    // empty-cluster repair: donate the globally farthest point (from a
    // cluster with at least two members; lowest index on ties)
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint32_t a : res.assign) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      double worst = -1.0;
      std::size_t donor = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assign[i]] < 2) continue;
        const double dist = sq_dist(points, i, centroids, res.assign[i]);
        if (dist > worst) {
          worst = dist;
          donor = i;
        }
      }
      if (donor == n) throw std::logic_error("kmeans: cannot repair empty cluster");
      --counts[res.assign[donor]];
      res.assign[donor] = static_cast<std::uint32_t>(c);
      ++counts[c];
      changed = true;
    }

    // update step
    centroids.set_zero();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) centroids(res.assign[i], j) += points(i, j);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j) centroids(c, j) /= static_cast<double>(counts[c]);

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(points, i, centroids, res.assign[i]);
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;
    if (!changed) break;
  }

  res.centroids = std::move(centroids);
  return res;
}

double concentration(const Matrix& points, const std::vector<std::size_t>& member_rows,
                     const Matrix& centroids, std::size_t cluster_id, double alpha,
                     double theta_min, double theta_max) {
  if (member_rows.empty()) throw std::invalid_argument("concentration: empty cluster");
  if (alpha <= 0.0) throw std::invalid_argument("concentration: alpha must be positive");
  double sum = 0.0;
  for (std::size_t row : member_rows)
    sum += std::sqrt(sq_dist(points, row, centroids, cluster_id));
  const double q = static_cast<double>(member_rows.size());
  const double theta = sum / (q * std::log(q + alpha));
  return std::clamp(theta, theta_min, theta_max);
}

ClusterModel build_cluster_model(const Matrix& embeddings,
                                 const std::vector<std::size_t>& cluster_sizes,
                                 std::uint64_t seed, std::size_t max_iters, double alpha,
                                 double theta_min, double theta_max,
                                 const Matrix* theta_points) {
  if (cluster_sizes.empty())
    throw std::invalid_argument("build_cluster_model: no cluster sizes given");
  const Matrix& tp = theta_points ? *theta_points : embeddings;
  if (tp.rows() != embeddings.rows())
    throw std::invalid_argument("build_cluster_model: theta_points row count mismatch");

  ClusterModel model;
  for (std::size_t r = 0; r < cluster_sizes.size(); ++r) {
    const std::size_t k = std::min(cluster_sizes[r], embeddings.rows());
    KMeansResult km = kmeans(embeddings, k, derive_seed(seed, "clustering", r), max_iters);

    ClusterModel::Clustering run;
    run.k = k;
    run.assign = std::move(km.assign);
    run.centroids = std::move(km.centroids);
    run.inertia = km.inertia;
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < run.assign.size(); ++i) members[run.assign[i]].push_back(i);
    run.theta.resize(k);
    for (std::size_t c = 0; c < k; ++c)
      run.theta[c] = concentration(tp, members[c], run.centroids, c, alpha, theta_min, theta_max);
    model.runs.push_back(std::move(run));
  }
  return model;
}

int hard_weight(const ClusterModel& model, std::size_t i, std::size_t j) {
  int w = 0;
  for (const auto& run : model.runs)
    if (run.assign.at(i) != run.assign.at(j)) ++w;
  return w;
}

Matrix hard_weight_matrix(const ClusterModel& model, std::size_t n) {
  Matrix w(n, n);
  for (const auto& run : model.runs) {
    if (run.assign.size() != n)
      throw std::invalid_argument("hard_weight_matrix: clustering size mismatch");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (run.assign[i] != run.assign[j]) w(i, j) += 1.0;
  }
  return w;
}

}  // namespace meow::cluster
