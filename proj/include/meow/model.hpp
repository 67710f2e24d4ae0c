#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meow/hin.hpp"
#include "meow/metapath.hpp"
#include "meow/tape.hpp"

namespace meow::model {

enum class Act { kElu, kIdentity, kTanh, kSigmoid };

Act act_from_name(const std::string& name);
ad::NodeId apply_act(ad::Tape& t, ad::NodeId x, Act act);

struct ModelDims {
  std::size_t embed_dim = 64;   // d
  std::size_t hidden_dim = 64;  // adaptive-MLP hidden width
};

struct ActConfig {
  Act feature = Act::kElu;   // type-specific transform
  Act context = Act::kElu;   // context aggregation
  Act gcn1 = Act::kElu;      // first GCN layer
  Act gcn2 = Act::kIdentity; // second GCN layer
  Act proj = Act::kElu;      // projection head
};

/// Every learnable matrix/vector of the model. Weights are stored (in x out)
/// for the row-vector convention H' = H * W + b.
struct ModelParams {
  std::vector<ad::DiffMatrix> feat_w;  // per type: d_T x d
  std::vector<ad::DiffMatrix> feat_b;  // per type: 1 x d
  /// Per meta-path, per hop (1..l): d x d.
  std::vector<std::vector<ad::DiffMatrix>> ctx_w;
  ad::DiffMatrix gcn_w1, gcn_b1, gcn_w2, gcn_b2;
  ad::DiffMatrix att_w, att_b;  // d x d, 1 x d
  ad::DiffMatrix att_a;         // d x 1 attention vector
  ad::DiffMatrix proj_w, proj_b;
  ad::DiffMatrix ada_w1, ada_b1;  // d x d_h, 1 x d_h
  ad::DiffMatrix ada_w2, ada_b2;  // d_h x 1, 1 x 1

  std::vector<ad::DiffMatrix*> all();
  void zero_grads();
};

ModelParams init_params(const hin::HeteroGraph& g,
                        const std::vector<hin::MetaPathSpec>& metapaths, const ModelDims& dims,
                        std::uint64_t seed);

/// h_i = act(x_i W_T + b_T) for every node type; returns one node per type.
std::vector<ad::NodeId> feature_transform(ad::Tape& t, const hin::HeteroGraph& g,
                                          ModelParams& p, Act act);

/// Two-layer graph convolution Z = A (act1(A H W1 + b1)) W2 + b2 over a fixed
/// normalized adjacency. The same parameters serve the coarse view and every
/// meta-path view.
ad::NodeId gcn_encode(ad::Tape& t, const Matrix& a_norm, ad::NodeId h, ModelParams& p,
                      const ActConfig& acts);

/// h_i + sum over hops j and context nodes v of W_uj h_v, then act. The
/// per-hop neighbor sums are precomputed into constant selector matrices.
ad::NodeId context_aggregate(ad::Tape& t, const hin::HeteroGraph& g,
                             const mp::MetaPathIndex& index,
                             const std::vector<ad::NodeId>& h_by_type, ModelParams& p,
                             std::size_t metapath_idx, Act act);

struct AugmentSpec {
  double edge_mask_rate = 0.0;
  double feature_mask_rate = 0.0;
  std::uint64_t seed = 0;
};

struct Augmented {
  Matrix a_norm;    // renormalized after edge masking (self-loops kept)
  ad::NodeId h;     // feature-masked input (whole dimensions zeroed)
};

/// Seeded graph perturbation. Rates of zero return the inputs untouched.
Augmented augment(ad::Tape& t, const mp::MetaPathIndex& index, ad::NodeId h,
                  const AugmentSpec& spec);

/// Attention over the 2m per-meta-path embeddings:
/// w_s = mean_i a^T tanh(W_att z_i + b_att), beta = softmax(w),
/// fused = sum_s beta_s Z_s. betas_out (optional) receives the weights.
ad::NodeId attention_fuse(ad::Tape& t, const std::vector<ad::NodeId>& zs, ModelParams& p,
                          std::vector<double>* betas_out = nullptr);

/// One-layer projection head, shared between views.
ad::NodeId project(ad::Tape& t, ad::NodeId z, ModelParams& p, Act act);

/// Soft negative-pair weight for one (anchor, sample) pair:
/// sigmoid(W2 tanh(W1 (zc_i + zf_j) + b1) + b2). Value-level convenience for
/// the pairwise form used in tests; training uses adaptive_weight_matrix.
double adaptive_weight(const Matrix& zc_row, const Matrix& zf_row, const ModelParams& p);

/// All-pairs soft weights on the tape: (n x n), entry (i,j) for anchor i and
/// fine-grained sample j. Gradients flow into the MLP parameters.
ad::NodeId adaptive_weight_matrix(ad::Tape& t, ad::NodeId zc, ad::NodeId zf, ModelParams& p);

/// Row-normalizes embeddings on the tape (cosine-similarity mode).
ad::NodeId l2_normalize_rows(ad::Tape& t, ad::NodeId z);

}  // namespace meow::model
