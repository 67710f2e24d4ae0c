#include "meow/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace meow::hin {

namespace {

using nlohmann::json;

[[noreturn]] void fail_at(const std::filesystem::path& file, std::size_t line,
                          const std::string& msg) {
  throw std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("missing file: " + file.string());
  return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

long parse_int(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  long v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) fail_at(file, line, "malformed integer '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const std::filesystem::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at(file, line, "malformed real '" + s + "'");
  }
}

}  // namespace

HeteroGraph load_graph(const std::filesystem::path& dir, std::vector<std::string>* warnings) {
  const auto meta_path = dir / "meta.json";
  json meta;
  {
    auto in = open_or_throw(meta_path);
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw std::runtime_error(meta_path.string() + ": " + e.what());
    }
  }

  HeteroGraph g;
  try {
    for (const auto& t : meta.at("node_types"))
      g.node_types.push_back({t.at("name").get<std::string>(), t.at("count").get<std::size_t>(),
                              t.at("feature_dim").get<std::size_t>()});
    for (const auto& r : meta.at("relations")) {
      RelationInfo info;
      info.name = r.at("name").get<std::string>();
      const auto src = r.at("src").get<std::string>();
      const auto dst = r.at("dst").get<std::string>();
      g.finalize();  // type_by_name needs node_types only, but keep offsets coherent
      info.src = g.type_by_name(src);
      info.dst = g.type_by_name(dst);
      g.relations.push_back(info);
    }
    g.finalize();
    g.target_type = g.type_by_name(meta.at("target_type").get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }

  // nodes_<type>.tsv; labels only on the target type.
  for (NodeTypeId t = 0; t < g.node_types.size(); ++t) {
    const auto file = dir / ("nodes_" + g.node_types[t].name + ".tsv");
    auto in = open_or_throw(file);
    std::vector<bool> seen(g.node_types[t].count, false);
    std::vector<int> labels(t == g.target_type ? g.node_types[t].count : 0, -1);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cols = split_tabs(line);
      if (cols.size() > 2) fail_at(file, lineno, "expected 1 or 2 columns");
      const long id = parse_int(cols[0], file, lineno);
      if (id < 0 || static_cast<std::size_t>(id) >= g.node_types[t].count)
        fail_at(file, lineno, "unknown node " + cols[0]);
      if (seen[static_cast<std::size_t>(id)]) fail_at(file, lineno, "duplicate node " + cols[0]);
      seen[static_cast<std::size_t>(id)] = true;
      if (cols.size() == 2 && !cols[1].empty()) {
        if (t != g.target_type) fail_at(file, lineno, "label on a non-target node type");
        labels[static_cast<std::size_t>(id)] = static_cast<int>(parse_int(cols[1], file, lineno));
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        throw std::runtime_error(file.string() + ": node " + std::to_string(i) + " missing");
    if (t == g.target_type) {
      const bool any = std::any_of(labels.begin(), labels.end(), [](int l) { return l >= 0; });
      if (any) g.labels = std::move(labels);
    }
  }

  // edges_<relation>.tsv with local ids on both sides.
  for (RelationId r = 0; r < g.relations.size(); ++r) {
    const auto file = dir / ("edges_" + g.relations[r].name + ".tsv");
    auto in = open_or_throw(file);
    std::vector<std::pair<NodeId, NodeId>> rel_edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cols = split_tabs(line);
      if (cols.size() != 2) fail_at(file, lineno, "expected 2 columns");
      const long s = parse_int(cols[0], file, lineno);
      const long d = parse_int(cols[1], file, lineno);
      if (s < 0 || static_cast<std::size_t>(s) >= g.node_types[g.relations[r].src].count)
        fail_at(file, lineno, "unknown node " + cols[0]);
      if (d < 0 || static_cast<std::size_t>(d) >= g.node_types[g.relations[r].dst].count)
        fail_at(file, lineno, "unknown node " + cols[1]);
      rel_edges.emplace_back(g.global_id(g.relations[r].src, static_cast<LocalId>(s)),
                             g.global_id(g.relations[r].dst, static_cast<LocalId>(d)));
    }
    g.edges.push_back(std::move(rel_edges));
  }

  // features_<type>.tsv
  for (NodeTypeId t = 0; t < g.node_types.size(); ++t) {
    const auto file = dir / ("features_" + g.node_types[t].name + ".tsv");
    auto in = open_or_throw(file);
    Matrix f(g.node_types[t].count, g.node_types[t].feature_dim);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cols = split_tabs(line);
      if (cols.size() != g.node_types[t].feature_dim + 1)
        fail_at(file, lineno,
                "expected " + std::to_string(g.node_types[t].feature_dim + 1) + " columns, got " +
                    std::to_string(cols.size()));
      const long id = parse_int(cols[0], file, lineno);
      if (id < 0 || static_cast<std::size_t>(id) >= f.rows())
        fail_at(file, lineno, "unknown node " + cols[0]);
      for (std::size_t j = 0; j < f.cols(); ++j) {
        const double v = parse_real(cols[j + 1], file, lineno);
        if (!std::isfinite(v)) fail_at(file, lineno, "non-finite feature value");
        f(static_cast<std::size_t>(id), j) = v;
      }
    }
    g.features.push_back(std::move(f));
  }

  const auto warns = g.validate();
  if (warnings) *warnings = warns;
  return g;
}

void save_graph(const HeteroGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json meta;
  meta["node_types"] = json::array();
  for (const auto& t : g.node_types)
    meta["node_types"].push_back(
        {{"name", t.name}, {"count", t.count}, {"feature_dim", t.feature_dim}});
  meta["relations"] = json::array();
  for (const auto& r : g.relations)
    meta["relations"].push_back({{"name", r.name},
                                 {"src", g.node_types[r.src].name},
                                 {"dst", g.node_types[r.dst].name}});
  meta["target_type"] = g.node_types[g.target_type].name;
  {
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }

  for (NodeTypeId t = 0; t < g.node_types.size(); ++t) {
    std::ofstream out(dir / ("nodes_" + g.node_types[t].name + ".tsv"));
    for (std::size_t i = 0; i < g.node_types[t].count; ++i) {
      out << i;
      if (t == g.target_type && !g.labels.empty() && g.labels[i] >= 0) out << '\t' << g.labels[i];
      out << '\n';
    }
  }

  for (RelationId r = 0; r < g.relations.size(); ++r) {
    std::ofstream out(dir / ("edges_" + g.relations[r].name + ".tsv"));
    for (const auto& [s, d] : g.edges[r])
      out << g.local_of(s) << '\t' << g.local_of(d) << '\n';
  }

  for (NodeTypeId t = 0; t < g.node_types.size(); ++t) {
    std::ofstream out(dir / ("features_" + g.node_types[t].name + ".tsv"));
    out.precision(17);
    const Matrix& f = g.features[t];
    for (std::size_t i = 0; i < f.rows(); ++i) {
      out << i;
      for (std::size_t j = 0; j < f.cols(); ++j) out << '\t' << f(i, j);
      out << '\n';
    }
  }
}

}  // namespace meow::hin
