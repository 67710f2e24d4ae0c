#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "meow/hin.hpp"
#include "meow/matrix.hpp"

namespace meow::mp {

/// Row-compressed integer matrix used for meta-path preprocessing (incidence
/// products stay sparse; only the encoder path is dense).
struct SparseCounts {
  std::size_t nrows = 0, ncols = 0;
  /// Per row, (col, count) sorted by col.
  std::vector<std::vector<std::pair<std::uint32_t, std::int64_t>>> rows;

  std::int64_t at(std::size_t i, std::size_t j) const;
  Matrix dense() const;
};

/// target x target matrix of path-instance counts for one meta-path.
using PathCountMatrix = SparseCounts;

/// Exact number of distinct node sequences instantiating `spec` between every
/// pair of target nodes (product of bipartite incidence matrices along the
/// path). Duplicate edges in the input collapse to a single adjacency.
PathCountMatrix count_path_instances(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec);

/// PathSim: PS(i,j) = 2 c_ij / (c_ii + c_jj); 0 when the denominator is 0.
double pathsim(const PathCountMatrix& counts, std::size_t i, std::size_t j);

/// One meta-path's filtered view of the graph.
struct MetaPathIndex {
  hin::MetaPathSpec spec;
  std::size_t K = 0;
  Matrix A;       // |V| x |V| binary with self-loops
  Matrix A_norm;  // D^{-1/2} A D^{-1/2}, D = diag of row sums of A
  /// Per target node, the retained top-K neighbors (target-local, sorted).
  std::vector<std::vector<std::uint32_t>> retained;
  /// hop_neighbors[i][j-1]: global NodeIds at hop j (1..l) on path instances
  /// from i to any retained neighbor; hop l equals the retained set itself.
  std::vector<std::vector<std::vector<hin::NodeId>>> hop_neighbors;
};

/// Ranks candidates j != i with PS(i,j) > 0 by (PS descending, id ascending),
/// retains up to K, re-adds the self-loop, and normalizes. Nodes without any
/// positive-similarity candidate keep only their self-loop.
MetaPathIndex build_index(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec,
                          std::size_t K);

/// Elementwise mean of the normalized adjacencies (the coarse-view fusion).
Matrix fuse_adjacency(const std::vector<MetaPathIndex>& indexes);

/// Recomputes A_norm from A with row-sum degrees on both sides.
Matrix normalize_adjacency(const Matrix& a);

/// Index cache, keyed by (graph hash, spec, K): versioned binary header plus
/// sparse triplets. load returns nullopt when the key does not match.
void save_index(const MetaPathIndex& idx, std::uint64_t graph_hash,
                const std::filesystem::path& file);
std::optional<MetaPathIndex> load_index(const hin::HeteroGraph& g,
                                        const hin::MetaPathSpec& spec, std::size_t K,
                                        const std::filesystem::path& file);

/// K = 0 resolves to the mean positive-similarity candidate count (at least 1).
std::size_t auto_k(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec);

}  // namespace meow::mp
