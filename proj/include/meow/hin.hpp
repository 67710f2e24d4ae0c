#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "meow/matrix.hpp"

namespace meow::hin {

using NodeTypeId = std::uint32_t;
using RelationId = std::uint32_t;
using NodeId = std::uint32_t;   // global, unique across types
using LocalId = std::uint32_t;  // row index within a type

struct NodeTypeInfo {
  std::string name;
  std::size_t count = 0;
  std::size_t feature_dim = 0;
};

struct RelationInfo {
  std::string name;
  NodeTypeId src = 0;
  NodeTypeId dst = 0;
};

/// Typed multi-relational graph. Node ids are contiguous per type with a
/// global offset table, so the type lookup and the feature-row lookup are
/// both O(1). Read-only after construction.
struct HeteroGraph {
  std::vector<NodeTypeInfo> node_types;
  std::vector<RelationInfo> relations;
  /// Per relation, (src, dst) pairs of global NodeIds.
  std::vector<std::vector<std::pair<NodeId, NodeId>>> edges;
  /// Per type, rows = nodes of that type.
  std::vector<Matrix> features;
  NodeTypeId target_type = 0;
  /// Per target node; -1 = unlabeled. Empty when the dataset has no labels.
  std::vector<int> labels;

  std::vector<NodeId> type_offset;  // rebuilt by finalize()

  /// Recomputes the offset table from node_types. Call after mutating counts.
  void finalize();

  NodeTypeId type_of(NodeId v) const;
  LocalId local_of(NodeId v) const;
  NodeId global_id(NodeTypeId t, LocalId i) const { return type_offset[t] + i; }

  std::size_t num_nodes() const;
  std::size_t num_targets() const { return node_types[target_type].count; }
  std::size_t num_edges() const;
  NodeTypeId type_by_name(const std::string& name) const;
  RelationId relation_by_name(const std::string& name) const;

  /// Throws on invariant violations (bad endpoints, non-finite features,
  /// shape mismatches); returns human-readable warnings (e.g. a homogeneous
  /// graph, which is legal for degenerate test fixtures).
  std::vector<std::string> validate() const;
};

/// An ordered walk of node types anchored at the target type on both ends,
/// with the relation carrying each step.
struct MetaPathSpec {
  std::string name;
  std::vector<NodeTypeId> types;      // length l+1
  std::vector<RelationId> relations;  // length l

  std::size_t length() const { return relations.size(); }
  /// Throws unless the spec starts/ends at the target type and every step's
  /// relation signature matches (forward or reversed).
  void validate(const HeteroGraph& g) const;
  /// True when relations[step] runs types[step] -> types[step+1] as declared;
  /// false when it is traversed against its declared direction.
  bool step_is_forward(const HeteroGraph& g, std::size_t step) const;
};

struct SyntheticRelation {
  std::string aux_type_name;
  std::size_t aux_per_class = 0;
  double p_within = 0.0;
  double p_cross = 0.0;
};

struct SyntheticConfig {
  std::size_t n_classes = 0;
  std::size_t per_class = 0;  // target nodes per class
  std::vector<SyntheticRelation> relations;
  std::size_t feature_dim = 0;
  double noise = 0.0;  // per-entry stddev added to the class mean
  std::string target_type_name = "target";
};

/// Planted-partition HIN: target nodes of the same class preferentially share
/// auxiliary neighbors, features are class means plus seeded noise, labels
/// are recorded on the target type. Pure function of (config, seed).
HeteroGraph generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

struct LabelSplit {
  std::vector<std::size_t> train, val, test;  // target-local indices
};

inline constexpr std::size_t kAllRemaining = std::numeric_limits<std::size_t>::max();

/// Disjoint train/val/test over labeled target nodes; train holds exactly
/// per_class_train nodes of every class. n_test = kAllRemaining takes the rest.
LabelSplit split_labels(const HeteroGraph& g, std::size_t per_class_train, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed);

/// Number of distinct labels (>= 0) present on the target type.
std::size_t num_classes(const HeteroGraph& g);

/// Structural hash (types, relations, edges, target, labels); used to key
/// meta-path index caches. Features are not hashed — they do not affect
/// index construction.
std::uint64_t graph_hash(const HeteroGraph& g);

}  // namespace meow::hin
