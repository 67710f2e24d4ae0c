#include "meow/model.hpp"

#include <cmath>
#include <stdexcept>

#include "meow/rng.hpp"

namespace meow::model {

Act act_from_name(const std::string& name) {
  if (name == "elu") return Act::kElu;
  if (name == "identity") return Act::kIdentity;
  if (name == "tanh") return Act::kTanh;
  if (name == "sigmoid") return Act::kSigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

ad::NodeId apply_act(ad::Tape& t, ad::NodeId x, Act act) {
  switch (act) {
    case Act::kElu:
      return t.elu(x);
    case Act::kIdentity:
      return x;
    case Act::kTanh:
      return t.tanh_(x);
    case Act::kSigmoid:
      return t.sigmoid(x);
  }
  throw std::logic_error("apply_act: unhandled activation");
}

std::vector<ad::DiffMatrix*> ModelParams::all() {
  std::vector<ad::DiffMatrix*> out;
  for (auto& w : feat_w) out.push_back(&w);
  for (auto& b : feat_b) out.push_back(&b);
  for (auto& per_path : ctx_w)
    for (auto& w : per_path) out.push_back(&w);
  out.push_back(&gcn_w1);
  out.push_back(&gcn_b1);
  out.push_back(&gcn_w2);
  out.push_back(&gcn_b2);
  out.push_back(&att_w);
  out.push_back(&att_b);
  out.push_back(&att_a);
  out.push_back(&proj_w);
  out.push_back(&proj_b);
  out.push_back(&ada_w1);
  out.push_back(&ada_b1);
  out.push_back(&ada_w2);
  out.push_back(&ada_b2);
  return out;
}

void ModelParams::zero_grads() {
  for (auto* p : all()) p->zero_grad();
}

ModelParams init_params(const hin::HeteroGraph& g,
                        const std::vector<hin::MetaPathSpec>& metapaths, const ModelDims& dims,
                        std::uint64_t seed) {
  const std::size_t d = dims.embed_dim;
  ModelParams p;
  std::uint64_t salt = 0;
  auto next = [&] { return derive_seed(seed, "init", salt++); };

  for (const auto& t : g.node_types) {
    p.feat_w.push_back(ad::xavier_uniform("feat_w." + t.name, t.feature_dim, d, next()));
    p.feat_b.push_back(ad::zeros("feat_b." + t.name, 1, d));
  }
  for (const auto& mp : metapaths) {
    std::vector<ad::DiffMatrix> per_path;
    for (std::size_t hop = 1; hop <= mp.length(); ++hop)
      per_path.push_back(
          ad::xavier_uniform("ctx_w." + mp.name + ".hop" + std::to_string(hop), d, d, next()));
    p.ctx_w.push_back(std::move(per_path));
  }
  p.gcn_w1 = ad::xavier_uniform("gcn_w1", d, d, next());
  p.gcn_b1 = ad::zeros("gcn_b1", 1, d);
  p.gcn_w2 = ad::xavier_uniform("gcn_w2", d, d, next());
  p.gcn_b2 = ad::zeros("gcn_b2", 1, d);
  p.att_w = ad::xavier_uniform("att_w", d, d, next());
  p.att_b = ad::zeros("att_b", 1, d);
  p.att_a = ad::xavier_uniform("att_a", d, 1, next(), /*decay=*/false);
  p.proj_w = ad::xavier_uniform("proj_w", d, d, next());
  p.proj_b = ad::zeros("proj_b", 1, d);
  p.ada_w1 = ad::xavier_uniform("ada_w1", d, dims.hidden_dim, next());
  p.ada_b1 = ad::zeros("ada_b1", 1, dims.hidden_dim);
  p.ada_w2 = ad::xavier_uniform("ada_w2", dims.hidden_dim, 1, next());
  p.ada_b2 = ad::zeros("ada_b2", 1, 1);
  return p;
}

std::vector<ad::NodeId> feature_transform(ad::Tape& t, const hin::HeteroGraph& g,
                                          ModelParams& p, Act act) {
  std::vector<ad::NodeId> out;
  for (std::size_t ty = 0; ty < g.node_types.size(); ++ty) {
    if (g.features[ty].rows() == 0)
      throw std::invalid_argument("feature_transform: missing features for type '" +
                                  g.node_types[ty].name + "'");
    ad::NodeId x = t.constant(g.features[ty]);
    ad::NodeId h = t.add_rowvec(t.matmul(x, t.leaf(p.feat_w[ty])), t.leaf(p.feat_b[ty]));
    out.push_back(apply_act(t, h, act));
  }
  return out;
}

ad::NodeId gcn_encode(ad::Tape& t, const Matrix& a_norm, ad::NodeId h, ModelParams& p,
                      const ActConfig& acts) {
  if (a_norm.rows() != a_norm.cols() || a_norm.rows() != t.value(h).rows())
    throw std::invalid_argument("gcn_encode: adjacency/input shape mismatch");
  ad::NodeId a = t.constant(a_norm);
  ad::NodeId l1 = t.add_rowvec(t.matmul(t.matmul(a, h), t.leaf(p.gcn_w1)), t.leaf(p.gcn_b1));
  l1 = apply_act(t, l1, acts.gcn1);
  ad::NodeId l2 = t.add_rowvec(t.matmul(t.matmul(a, l1), t.leaf(p.gcn_w2)), t.leaf(p.gcn_b2));
  return apply_act(t, l2, acts.gcn2);
}

ad::NodeId context_aggregate(ad::Tape& t, const hin::HeteroGraph& g,
                             const mp::MetaPathIndex& index,
                             const std::vector<ad::NodeId>& h_by_type, ModelParams& p,
                             std::size_t metapath_idx, Act act) {
  const auto& spec = index.spec;
  const std::size_t n = g.num_targets();
  ad::NodeId acc = h_by_type[g.target_type];

  for (std::size_t hop = 1; hop <= spec.length(); ++hop) {
    const hin::NodeTypeId hop_type = spec.types[hop];
    // binary selector S: S(i, v_local) = 1 iff v is a hop-`hop` context of i
    Matrix sel(n, g.node_types[hop_type].count);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (hin::NodeId v : index.hop_neighbors[i][hop - 1]) {
        sel(i, g.local_of(v)) = 1.0;
        any = true;
      }
    }
    if (!any) continue;  // empty neighbor sets contribute nothing
    ad::NodeId summed = t.matmul(t.constant(std::move(sel)), h_by_type[hop_type]);
    acc = t.add(acc, t.matmul(summed, t.leaf(p.ctx_w[metapath_idx][hop - 1])));
  }
  return apply_act(t, acc, act);
}

Augmented augment(ad::Tape& t, const mp::MetaPathIndex& index, ad::NodeId h,
                  const AugmentSpec& spec) {
  if (spec.edge_mask_rate < 0.0 || spec.edge_mask_rate > 1.0 || spec.feature_mask_rate < 0.0 ||
      spec.feature_mask_rate > 1.0)
    throw std::invalid_argument("augment: mask rates must lie in [0,1]");

  Augmented out;
  if (spec.edge_mask_rate == 0.0 && spec.feature_mask_rate == 0.0) {
    out.a_norm = index.A_norm;
    out.h = h;
    return out;
  }

  Rng rng(spec.seed);
  if (spec.edge_mask_rate > 0.0) {
    Matrix a = index.A;
    const std::size_t n = a.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && a(i, j) != 0.0 && rng.bernoulli(spec.edge_mask_rate)) a(i, j) = 0.0;
    out.a_norm = mp::normalize_adjacency(a);
  } else {
    out.a_norm = index.A_norm;
  }

  if (spec.feature_mask_rate > 0.0) {
    const Matrix& hv = t.value(h);
    Matrix mask(hv.rows(), hv.cols(), 1.0);
    for (std::size_t j = 0; j < hv.cols(); ++j) {
      if (rng.bernoulli(spec.feature_mask_rate)) {
        for (std::size_t i = 0; i < hv.rows(); ++i) mask(i, j) = 0.0;
      }
    }
    out.h = t.hadamard(h, t.constant(std::move(mask)));
  } else {
    out.h = h;
  }
  return out;
}

ad::NodeId attention_fuse(ad::Tape& t, const std::vector<ad::NodeId>& zs, ModelParams& p,
                          std::vector<double>* betas_out) {
  if (zs.empty()) throw std::invalid_argument("attention_fuse: empty embedding set");

  std::vector<ad::NodeId> ws;
  for (ad::NodeId z : zs) {
    ad::NodeId scores =
        t.tanh_(t.add_rowvec(t.matmul(z, t.leaf(p.att_w)), t.leaf(p.att_b)));
    ws.push_back(t.mean_all(t.matmul(scores, t.leaf(p.att_a))));
  }
  ad::NodeId beta = t.softmax_row(t.concat_scalars(ws));
  if (betas_out) {
    betas_out->clear();
    for (std::size_t s = 0; s < zs.size(); ++s) betas_out->push_back(t.value(beta)(0, s));
  }
  ad::NodeId fused = t.scale_by_entry(zs[0], beta, 0, 0);
  for (std::size_t s = 1; s < zs.size(); ++s)
    fused = t.add(fused, t.scale_by_entry(zs[s], beta, 0, s));
  return fused;
}

ad::NodeId project(ad::Tape& t, ad::NodeId z, ModelParams& p, Act act) {
  return apply_act(t, t.add_rowvec(t.matmul(z, t.leaf(p.proj_w)), t.leaf(p.proj_b)), act);
}

double adaptive_weight(const Matrix& zc_row, const Matrix& zf_row, const ModelParams& p) {
  if (zc_row.rows() != 1 || zf_row.rows() != 1 || zc_row.cols() != zf_row.cols())
    throw std::invalid_argument("adaptive_weight: inputs must be matching row vectors");
  const std::size_t d = zc_row.cols();
  const std::size_t dh = p.ada_w1.value.cols();
  std::vector<double> hidden(dh, 0.0);
  for (std::size_t jh = 0; jh < dh; ++jh) {
    double s = p.ada_b1.value(0, jh);
    for (std::size_t j = 0; j < d; ++j)
      s += (zc_row(0, j) + zf_row(0, j)) * p.ada_w1.value(j, jh);
    hidden[jh] = std::tanh(s);
  }
  double out = p.ada_b2.value(0, 0);
  for (std::size_t jh = 0; jh < dh; ++jh) out += hidden[jh] * p.ada_w2.value(jh, 0);
  return 1.0 / (1.0 + std::exp(-out));
}

ad::NodeId adaptive_weight_matrix(ad::Tape& t, ad::NodeId zc, ad::NodeId zf, ModelParams& p) {
  const std::size_t n = t.value(zc).rows();
  if (t.value(zf).rows() != n)
    throw std::invalid_argument("adaptive_weight_matrix: row count mismatch");
  ad::NodeId pairs = t.pairwise_row_sum(zc, zf);  // (n*n) x d; row i*n+j = zc_i + zf_j
  ad::NodeId hidden =
      t.tanh_(t.add_rowvec(t.matmul(pairs, t.leaf(p.ada_w1)), t.leaf(p.ada_b1)));
  ad::NodeId logits = t.add_rowvec(t.matmul(hidden, t.leaf(p.ada_w2)), t.leaf(p.ada_b2));
  return t.reshape(t.sigmoid(logits), n, n);
}

ad::NodeId l2_normalize_rows(ad::Tape& t, ad::NodeId z) {
  ad::NodeId sq_norm = t.clamp_min(t.row_sum(t.hadamard(z, z)), 1e-24);
  ad::NodeId inv_norm = t.exp_(t.scale(t.log_(sq_norm), -0.5));
  return t.scale_rows(z, inv_norm);
}

}  // namespace meow::model
