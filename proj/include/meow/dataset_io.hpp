#pragma once

#include <filesystem>

#include "meow/hin.hpp"

namespace meow::hin {

/// Reads the tab-separated dataset directory format:
///   meta.json                  type names/counts, relation signatures,
///                              target type, feature dims
///   nodes_<type>.tsv           node_local_id [tab label]   (label: target only)
///   edges_<relation>.tsv       src_local_id  tab dst_local_id
///   features_<type>.tsv        node_local_id tab f0 tab f1 ...
/// Every malformed row is reported with its file and line. The returned graph
/// is validated; validation warnings land in *warnings when given.
HeteroGraph load_graph(const std::filesystem::path& dir,
                       std::vector<std::string>* warnings = nullptr);

/// Inverse of load_graph; load_graph(save_graph(g)) round-trips exactly.
void save_graph(const HeteroGraph& g, const std::filesystem::path& dir);

}  // namespace meow::hin
