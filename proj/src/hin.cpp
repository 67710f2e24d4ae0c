#include "meow/hin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "meow/rng.hpp"

namespace meow::hin {

void HeteroGraph::finalize() {
  type_offset.assign(node_types.size() + 1, 0);
  for (std::size_t t = 0; t < node_types.size(); ++t)
    type_offset[t + 1] = type_offset[t] + static_cast<NodeId>(node_types[t].count);
}

NodeTypeId HeteroGraph::type_of(NodeId v) const {
  for (std::size_t t = 0; t + 1 < type_offset.size(); ++t)
    if (v >= type_offset[t] && v < type_offset[t + 1]) return static_cast<NodeTypeId>(t);
  throw std::out_of_range("type_of: unknown node id " + std::to_string(v));
}

LocalId HeteroGraph::local_of(NodeId v) const { return v - type_offset[type_of(v)]; }

std::size_t HeteroGraph::num_nodes() const {
  std::size_t n = 0;
  for (const auto& t : node_types) n += t.count;
  return n;
}

std::size_t HeteroGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

NodeTypeId HeteroGraph::type_by_name(const std::string& name) const {
  for (std::size_t t = 0; t < node_types.size(); ++t)
    if (node_types[t].name == name) return static_cast<NodeTypeId>(t);
  throw std::invalid_argument("unknown node type '" + name + "'");
}

RelationId HeteroGraph::relation_by_name(const std::string& name) const {
  for (std::size_t r = 0; r < relations.size(); ++r)
    if (relations[r].name == name) return static_cast<RelationId>(r);
  throw std::invalid_argument("unknown relation '" + name + "'");
}

std::vector<std::string> HeteroGraph::validate() const {
  std::vector<std::string> warnings;
  if (node_types.empty()) throw std::runtime_error("graph has no node types");
  if (type_offset.size() != node_types.size() + 1)
    throw std::runtime_error("graph not finalized: offset table out of date");
  if (target_type >= node_types.size()) throw std::runtime_error("target type out of range");
  if (edges.size() != relations.size())
    throw std::runtime_error("edge list count does not match relation count");

  const std::size_t total = num_nodes();
  for (std::size_t r = 0; r < relations.size(); ++r) {
    const auto& rel = relations[r];
    if (rel.src >= node_types.size() || rel.dst >= node_types.size())
      throw std::runtime_error("relation '" + rel.name + "' references an unknown node type");
    for (const auto& [s, d] : edges[r]) {
      if (s >= total || d >= total)
        throw std::runtime_error("relation '" + rel.name + "': unknown node " +
                                 std::to_string(std::max(s, d)));
      if (type_of(s) != rel.src || type_of(d) != rel.dst)
        throw std::runtime_error("relation '" + rel.name + "': edge (" + std::to_string(s) +
                                 "," + std::to_string(d) + ") violates its type signature");
    }
  }

  if (features.size() != node_types.size())
    throw std::runtime_error("feature matrix count does not match node type count");
  for (std::size_t t = 0; t < node_types.size(); ++t) {
    const Matrix& f = features[t];
    if (f.rows() != node_types[t].count || f.cols() != node_types[t].feature_dim)
      throw std::runtime_error("feature matrix for type '" + node_types[t].name +
                               "' has shape " + f.shape_str() + ", expected " +
                               std::to_string(node_types[t].count) + "x" +
                               std::to_string(node_types[t].feature_dim));
    if (!f.all_finite())
      throw std::runtime_error("feature matrix for type '" + node_types[t].name +
                               "' contains a non-finite entry");
  }

  if (!labels.empty() && labels.size() != num_targets())
    throw std::runtime_error("label count does not match target node count");

  if (node_types.size() + relations.size() <= 2)
    warnings.push_back("homogeneous: |T| + |R| <= 2, not a heterogeneous network");
  return warnings;
}

void MetaPathSpec::validate(const HeteroGraph& g) const {
  if (types.size() < 2 || relations.size() + 1 != types.size())
    throw std::invalid_argument("meta-path '" + name + "': needs l+1 types and l relations");
  if (types.front() != g.target_type || types.back() != g.target_type)
    throw std::invalid_argument("meta-path '" + name +
                                "': must start and end at the target type");
  for (NodeTypeId t : types)
    if (t >= g.node_types.size())
      throw std::invalid_argument("meta-path '" + name + "': unknown node type id");
  for (std::size_t s = 0; s < relations.size(); ++s) {
    if (relations[s] >= g.relations.size())
      throw std::invalid_argument("meta-path '" + name + "': unknown relation id");
    const auto& rel = g.relations[relations[s]];
    const bool forward = rel.src == types[s] && rel.dst == types[s + 1];
    const bool reverse = rel.dst == types[s] && rel.src == types[s + 1];
    if (!forward && !reverse)
      throw std::invalid_argument("meta-path '" + name + "': relation '" + rel.name +
                                  "' does not connect step " + std::to_string(s));
  }
}

bool MetaPathSpec::step_is_forward(const HeteroGraph& g, std::size_t step) const {
  const auto& rel = g.relations[relations[step]];
  return rel.src == types[step] && rel.dst == types[step + 1];
}

HeteroGraph generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  if (cfg.n_classes == 0) throw std::invalid_argument("generate_synthetic: zero classes");
  if (cfg.per_class == 0)
    throw std::invalid_argument("generate_synthetic: zero target nodes per class");
  if (cfg.feature_dim == 0) throw std::invalid_argument("generate_synthetic: zero feature dim");
  for (const auto& r : cfg.relations) {
    if (r.p_within < 0.0 || r.p_within > 1.0 || r.p_cross < 0.0 || r.p_cross > 1.0)
      throw std::invalid_argument("generate_synthetic: probabilities must lie in [0,1]");
    if (r.aux_per_class == 0)
      throw std::invalid_argument("generate_synthetic: zero auxiliary nodes per class");
  }

  HeteroGraph g;
  g.node_types.push_back(
      {cfg.target_type_name, cfg.n_classes * cfg.per_class, cfg.feature_dim});
  for (const auto& r : cfg.relations)
    g.node_types.push_back({r.aux_type_name, cfg.n_classes * r.aux_per_class, cfg.feature_dim});
  g.target_type = 0;
  g.finalize();

  // Class of any node: contiguous blocks, per_class (or aux_per_class) each.
  auto class_of = [&](std::size_t local, std::size_t block) { return local / block; };

  // Edges: one bipartite relation per auxiliary type.
  for (std::size_t ri = 0; ri < cfg.relations.size(); ++ri) {
    const auto& rc = cfg.relations[ri];
    const NodeTypeId aux_type = static_cast<NodeTypeId>(ri + 1);
    g.relations.push_back({cfg.target_type_name + "_" + rc.aux_type_name, 0, aux_type});
    Rng rng(derive_seed(seed, "edges", ri));
    std::vector<std::pair<NodeId, NodeId>> rel_edges;
    const std::size_t n_aux = cfg.n_classes * rc.aux_per_class;
    for (std::size_t i = 0; i < g.num_targets(); ++i) {
      const std::size_t ci = class_of(i, cfg.per_class);
      for (std::size_t a = 0; a < n_aux; ++a) {
        const double p = class_of(a, rc.aux_per_class) == ci ? rc.p_within : rc.p_cross;
        if (rng.bernoulli(p))
          rel_edges.emplace_back(g.global_id(0, static_cast<LocalId>(i)),
                                 g.global_id(aux_type, static_cast<LocalId>(a)));
      }
    }
    g.edges.push_back(std::move(rel_edges));
  }

  // Features: class mean + noise, for the target type and every aux type.
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    const std::size_t block = t == 0 ? cfg.per_class : cfg.relations[t - 1].aux_per_class;
    Rng mean_rng(derive_seed(seed, "class_means", t));
    std::vector<std::vector<double>> means(cfg.n_classes,
                                           std::vector<double>(cfg.feature_dim));
    for (auto& m : means)
      for (auto& x : m) x = mean_rng.normal();

    Rng noise_rng(derive_seed(seed, "features", t));
    Matrix f(g.node_types[t].count, cfg.feature_dim);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      const auto& m = means[class_of(i, block)];
      for (std::size_t j = 0; j < cfg.feature_dim; ++j)
        f(i, j) = m[j] + cfg.noise * noise_rng.normal();
    }
    g.features.push_back(std::move(f));
  }

  g.labels.resize(g.num_targets());
  for (std::size_t i = 0; i < g.num_targets(); ++i)
    g.labels[i] = static_cast<int>(class_of(i, cfg.per_class));
  return g;
}

std::size_t num_classes(const HeteroGraph& g) {
  std::set<int> seen;
  for (int l : g.labels)
    if (l >= 0) seen.insert(l);
  return seen.size();
}

LabelSplit split_labels(const HeteroGraph& g, std::size_t per_class_train, std::size_t n_val,
                        std::size_t n_test, std::uint64_t seed) {
  if (g.labels.empty()) throw std::invalid_argument("split_labels: graph has no labels");
  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < g.labels.size(); ++i) {
    const int l = g.labels[i];
    if (l < 0) continue;
    if (static_cast<std::size_t>(l) >= by_class.size()) by_class.resize(l + 1);
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }
  if (by_class.empty()) throw std::invalid_argument("split_labels: no labeled nodes");

  Rng rng(derive_seed(seed, "split"));
  LabelSplit split;
  std::vector<std::size_t> rest;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < per_class_train)
      throw std::invalid_argument("split_labels: class " + std::to_string(c) + " has only " +
                                  std::to_string(members.size()) + " nodes, need " +
                                  std::to_string(per_class_train));
    rng.shuffle(members);
    split.train.insert(split.train.end(), members.begin(), members.begin() + per_class_train);
    rest.insert(rest.end(), members.begin() + per_class_train, members.end());
  }
  rng.shuffle(rest);
  if (n_val > rest.size())
    throw std::invalid_argument("split_labels: insufficient nodes for the validation set");
  split.val.assign(rest.begin(), rest.begin() + n_val);
  const std::size_t remaining = rest.size() - n_val;
  const std::size_t take = n_test == kAllRemaining ? remaining : n_test;
  if (take > remaining)
    throw std::invalid_argument("split_labels: insufficient nodes for the test set");
  split.test.assign(rest.begin() + n_val, rest.begin() + n_val + take);

  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::uint64_t graph_hash(const HeteroGraph& g) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  auto mix_str = [&](const std::string& s) {
    for (char c : s) mix(static_cast<unsigned char>(c));
    mix(0xff);
  };
  mix(g.node_types.size());
  for (const auto& t : g.node_types) {
    mix_str(t.name);
    mix(t.count);
    mix(t.feature_dim);
  }
  mix(g.relations.size());
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    mix_str(g.relations[r].name);
    mix(g.relations[r].src);
    mix(g.relations[r].dst);
    for (const auto& [s, d] : g.edges[r]) {
      mix(s);
      mix(d);
    }
  }
  mix(g.target_type);
  for (int l : g.labels) mix(static_cast<std::uint64_t>(l + 1));
  return h;
}

}  // namespace meow::hin
