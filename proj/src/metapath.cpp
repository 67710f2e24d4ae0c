#include "meow/metapath.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace meow::mp {

namespace {

/// Incidence of one meta-path step as a sparse 0/1 matrix from types[step]
/// to types[step+1]; reversed relations are transposed on the fly.
SparseCounts step_incidence(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec,
                            std::size_t step) {
  const auto& rel = g.relations[spec.relations[step]];
  const bool forward = spec.step_is_forward(g, step);
  const hin::NodeTypeId from = spec.types[step];
  const hin::NodeTypeId to = spec.types[step + 1];

  SparseCounts m;
  m.nrows = g.node_types[from].count;
  m.ncols = g.node_types[to].count;
  m.rows.resize(m.nrows);
  for (const auto& [s, d] : g.edges[spec.relations[step]]) {
    const auto src_local = g.local_of(s);
    const auto dst_local = g.local_of(d);
    if (forward)
      m.rows[src_local].emplace_back(dst_local, 1);
    else
      m.rows[dst_local].emplace_back(src_local, 1);
  }
  (void)rel;
  // collapse duplicate edges to a single adjacency entry
  for (auto& row : m.rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              row.end());
  }
  return m;
}

SparseCounts spgemm(const SparseCounts& a, const SparseCounts& b) {
  SparseCounts out;
  out.nrows = a.nrows;
  out.ncols = b.ncols;
  out.rows.resize(out.nrows);
  std::vector<std::int64_t> acc(b.ncols, 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < a.nrows; ++i) {
    touched.clear();
    for (const auto& [k, av] : a.rows[i]) {
      for (const auto& [j, bv] : b.rows[k]) {
        if (acc[j] == 0) touched.push_back(j);
        acc[j] += av * bv;
      }
    }
    std::sort(touched.begin(), touched.end());
    auto& row = out.rows[i];
    row.reserve(touched.size());
    for (std::uint32_t j : touched) {
      if (acc[j] != 0) row.emplace_back(j, acc[j]);
      acc[j] = 0;
    }
  }
  return out;
}

}  // namespace

std::int64_t SparseCounts::at(std::size_t i, std::size_t j) const {
  const auto& row = rows[i];
  auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(static_cast<std::uint32_t>(j),
                                                                    std::int64_t{0}),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  return (it != row.end() && it->first == j) ? it->second : 0;
}

Matrix SparseCounts::dense() const {
  Matrix m(nrows, ncols);
  for (std::size_t i = 0; i < nrows; ++i)
    for (const auto& [j, v] : rows[i]) m(i, j) = static_cast<double>(v);
  return m;
}

PathCountMatrix count_path_instances(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec) {
  spec.validate(g);
  SparseCounts acc = step_incidence(g, spec, 0);
  for (std::size_t s = 1; s < spec.length(); ++s) acc = spgemm(acc, step_incidence(g, spec, s));
  return acc;
}

double pathsim(const PathCountMatrix& counts, std::size_t i, std::size_t j) {
  const double denom =
      static_cast<double>(counts.at(i, i)) + static_cast<double>(counts.at(j, j));
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(counts.at(i, j)) / denom;
}

Matrix normalize_adjacency(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("normalize_adjacency: matrix not square");
  const std::size_t n = a.rows();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      out(i, j) = a(i, j) / std::sqrt(deg[i] * deg[j]);
    }
  }
  return out;
}

std::size_t auto_k(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec) {
  const PathCountMatrix counts = count_path_instances(g, spec);
  const std::size_t n = g.num_targets();
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, v] : counts.rows[i])
      if (j != i && pathsim(counts, i, j) > 0.0) ++total;
  return std::max<std::size_t>(1, (total + n / 2) / std::max<std::size_t>(1, n));
}

MetaPathIndex build_index(const hin::HeteroGraph& g, const hin::MetaPathSpec& spec,
                          std::size_t K) {
  spec.validate(g);
  if (K < 1) throw std::invalid_argument("build_index: K must be >= 1");
  const std::size_t n = g.num_targets();

  const PathCountMatrix counts = count_path_instances(g, spec);

  MetaPathIndex idx;
  idx.spec = spec;
  idx.K = K;
  idx.A = Matrix(n, n);
  idx.retained.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::uint32_t>> cand;  // (PS, id)
    for (const auto& [j, v] : counts.rows[i]) {
      if (j == i) continue;
      const double ps = pathsim(counts, i, j);
      if (ps > 0.0) cand.emplace_back(ps, j);
    }
    // PS descending, id ascending
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    if (cand.size() > K) cand.resize(K);
    auto& kept = idx.retained[i];
    for (const auto& [ps, j] : cand) kept.push_back(j);
    std::sort(kept.begin(), kept.end());
    for (std::uint32_t j : kept) idx.A(i, j) = 1.0;
    idx.A(i, i) = 1.0;  // self-loop guarantees a nonzero degree
  }

  idx.A_norm = normalize_adjacency(idx.A);

  // Context sets: hop-j nodes on path instances from i to a retained
  // neighbor. prefix[j] covers steps 1..j; suffix[j] covers steps j+1..l.
  const std::size_t l = spec.length();
  std::vector<SparseCounts> prefix(l + 1), suffix(l + 1);
  prefix[1] = step_incidence(g, spec, 0);
  for (std::size_t s = 2; s <= l; ++s) prefix[s] = spgemm(prefix[s - 1], step_incidence(g, spec, s - 1));
  suffix[l - 1] = step_incidence(g, spec, l - 1);
  for (std::size_t s = l - 1; s-- > 1;) suffix[s] = spgemm(step_incidence(g, spec, s), suffix[s + 1]);

  idx.hop_neighbors.assign(n, std::vector<std::vector<hin::NodeId>>(l));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& kept = idx.retained[i];
    // hop l is exactly the retained neighbor set
    for (std::uint32_t j : kept)
      idx.hop_neighbors[i][l - 1].push_back(g.global_id(g.target_type, j));
    if (kept.empty()) continue;
    std::unordered_set<std::uint32_t> kept_set(kept.begin(), kept.end());
    for (std::size_t hop = 1; hop < l; ++hop) {
      auto& out = idx.hop_neighbors[i][hop - 1];
      for (const auto& [v, cnt] : prefix[hop].rows[i]) {
        for (const auto& [t, cnt2] : suffix[hop].rows[v]) {
          if (kept_set.count(t)) {
            out.push_back(g.global_id(spec.types[hop], v));
            break;
          }
        }
      }
      std::sort(out.begin(), out.end());
    }
  }
  return idx;
}

Matrix fuse_adjacency(const std::vector<MetaPathIndex>& indexes) {
  if (indexes.empty()) throw std::invalid_argument("fuse_adjacency: need at least one index");
  const std::size_t n = indexes.front().A_norm.rows();
  Matrix fused(n, n);
  for (const auto& idx : indexes) {
    if (idx.A_norm.rows() != n || idx.A_norm.cols() != n)
      throw std::invalid_argument("fuse_adjacency: mismatched dimensions");
    add_scaled(fused, idx.A_norm, 1.0);
  }
  for (std::size_t i = 0; i < fused.size(); ++i)
    fused.data()[i] /= static_cast<double>(indexes.size());
  return fused;
}

namespace {

constexpr std::uint32_t kIndexMagic = 0x4d504958;  // "MPIX"
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool read_string(std::ifstream& in, std::string& s) {
  std::uint64_t len = 0;
  if (!read_pod(in, len)) return false;
  s.resize(len);
  in.read(s.data(), static_cast<std::streamsize>(len));
  return static_cast<bool>(in);
}

}  // namespace

void save_index(const MetaPathIndex& idx, std::uint64_t graph_hash,
                const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write index cache: " + file.string());
  write_pod(out, kIndexMagic);
  write_pod(out, kIndexVersion);
  write_pod(out, graph_hash);
  write_string(out, idx.spec.name);
  write_pod(out, static_cast<std::uint64_t>(idx.spec.types.size()));
  for (auto t : idx.spec.types) write_pod(out, t);
  for (auto r : idx.spec.relations) write_pod(out, r);
  write_pod(out, static_cast<std::uint64_t>(idx.K));
  const std::size_t n = idx.A.rows();
  write_pod(out, static_cast<std::uint64_t>(n));

  // A as sparse triplets (row, col); values are implicitly 1.
  std::uint64_t nnz = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (idx.A(i, j) != 0.0) ++nnz;
  write_pod(out, nnz);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (idx.A(i, j) != 0.0) {
        write_pod(out, static_cast<std::uint32_t>(i));
        write_pod(out, static_cast<std::uint32_t>(j));
      }

  for (std::size_t i = 0; i < n; ++i) {
    write_pod(out, static_cast<std::uint64_t>(idx.retained[i].size()));
    for (auto j : idx.retained[i]) write_pod(out, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    write_pod(out, static_cast<std::uint64_t>(idx.hop_neighbors[i].size()));
    for (const auto& hop : idx.hop_neighbors[i]) {
      write_pod(out, static_cast<std::uint64_t>(hop.size()));
      for (auto v : hop) write_pod(out, v);
    }
  }
}

std::optional<MetaPathIndex> load_index(const hin::HeteroGraph& g,
                                        const hin::MetaPathSpec& spec, std::size_t K,
                                        const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::uint32_t magic = 0, version = 0;
  std::uint64_t hash = 0;
  if (!read_pod(in, magic) || magic != kIndexMagic) return std::nullopt;
  if (!read_pod(in, version) || version != kIndexVersion) return std::nullopt;
  if (!read_pod(in, hash) || hash != hin::graph_hash(g)) return std::nullopt;

  std::string name;
  if (!read_string(in, name) || name != spec.name) return std::nullopt;
  std::uint64_t ntypes = 0;
  if (!read_pod(in, ntypes) || ntypes != spec.types.size()) return std::nullopt;
  for (std::size_t i = 0; i < ntypes; ++i) {
    hin::NodeTypeId t = 0;
    if (!read_pod(in, t) || t != spec.types[i]) return std::nullopt;
  }
  for (std::size_t i = 0; i + 1 < ntypes; ++i) {
    hin::RelationId r = 0;
    if (!read_pod(in, r) || r != spec.relations[i]) return std::nullopt;
  }
  std::uint64_t k_stored = 0, n = 0, nnz = 0;
  if (!read_pod(in, k_stored) || k_stored != K) return std::nullopt;
  if (!read_pod(in, n) || n != g.num_targets()) return std::nullopt;
  if (!read_pod(in, nnz)) return std::nullopt;

  MetaPathIndex idx;
  idx.spec = spec;
  idx.K = K;
  idx.A = Matrix(n, n);
  for (std::uint64_t e = 0; e < nnz; ++e) {
    std::uint32_t i = 0, j = 0;
    if (!read_pod(in, i) || !read_pod(in, j) || i >= n || j >= n) return std::nullopt;
    idx.A(i, j) = 1.0;
  }
  idx.retained.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t cnt = 0;
    if (!read_pod(in, cnt)) return std::nullopt;
    idx.retained[i].resize(cnt);
    for (auto& j : idx.retained[i])
      if (!read_pod(in, j)) return std::nullopt;
  }
  idx.hop_neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t hops = 0;
    if (!read_pod(in, hops)) return std::nullopt;
    idx.hop_neighbors[i].resize(hops);
    for (auto& hop : idx.hop_neighbors[i]) {
      std::uint64_t cnt = 0;
      if (!read_pod(in, cnt)) return std::nullopt;
      hop.resize(cnt);
      for (auto& v : hop)
        if (!read_pod(in, v)) return std::nullopt;
    }
  }
  idx.A_norm = normalize_adjacency(idx.A);
  return idx;
}

}  // namespace meow::mp
