#pragma once

#include <cstdint>
#include <vector>

#include "meow/matrix.hpp"

namespace meow::cluster {

struct KMeansResult {
  std::vector<std::uint32_t> assign;  // point -> cluster id
  Matrix centroids;                   // k x d
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia recorded after every Lloyd iteration (non-increasing).
  std::vector<double> inertia_history;
};

/// Seeded k-means++ followed by Lloyd iterations. Nearest-centroid ties break
/// toward the lowest cluster id; empty clusters are repaired by reassigning
/// the point currently farthest from its centroid. Stops at an assignment
/// fixpoint or max_iters. Pure function of (points, k, seed, max_iters).
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters);

/// Concentration estimate of one cluster: sum of member distances to the
/// centroid over Q * ln(Q + alpha), clamped to [theta_min, theta_max].
/// member_rows index into `points`.
double concentration(const Matrix& points, const std::vector<std::size_t>& member_rows,
                     const Matrix& centroids, std::size_t cluster_id, double alpha,
                     double theta_min = 1e-3, double theta_max = 10.0);

/// M independent clusterings of the same embedding matrix plus per-cluster
/// concentration estimates; the basis for hard negative weights and the
/// prototypical loss.
struct ClusterModel {
  struct Clustering {
    std::size_t k = 0;
    std::vector<std::uint32_t> assign;
    Matrix centroids;
    std::vector<double> theta;
    double inertia = 0.0;
  };
  std::vector<Clustering> runs;

  std::size_t num_clusterings() const { return runs.size(); }
};

/// theta_points: embeddings used for the concentration sums (defaults to the
/// clustered embeddings when null; pass the coarse-view projections to follow
/// the alternative convention).
ClusterModel build_cluster_model(const Matrix& embeddings,
                                 const std::vector<std::size_t>& cluster_sizes,
                                 std::uint64_t seed, std::size_t max_iters, double alpha,
                                 double theta_min = 1e-3, double theta_max = 10.0,
                                 const Matrix* theta_points = nullptr);

/// gamma_ij = number of clusterings placing i and j in different clusters.
int hard_weight(const ClusterModel& model, std::size_t i, std::size_t j);

/// Full |V| x |V| hard-weight matrix (symmetric, zero diagonal).
Matrix hard_weight_matrix(const ClusterModel& model, std::size_t n);

}  // namespace meow::cluster
