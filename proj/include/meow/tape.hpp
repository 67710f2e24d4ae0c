#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meow/matrix.hpp"

namespace meow::ad {

/// A dense matrix with a gradient slot. Model parameters and fixed inputs
/// both enter the tape through DiffMatrix leaves; only trainable ones
/// receive gradients from backward.
struct DiffMatrix {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  /// L2 regularization is applied to weight matrices only, never biases;
  /// the flag is fixed at construction.
  bool apply_weight_decay = false;

  DiffMatrix() = default;
  DiffMatrix(std::string n, Matrix v, bool train = true, bool decay = false)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.rows(), value.cols()),
        trainable(train),
        apply_weight_decay(decay) {}

  void zero_grad() { grad.set_zero(); }
};

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class Op : std::uint8_t {
  kLeaf,           // bound to a DiffMatrix
  kConst,          // constant matrix, never receives gradient
  kMatMul,         // op(a) * op(b) with transpose flags
  kAdd,            // a + b, same shape
  kSub,            // a - b, same shape
  kAddRowVec,      // X + broadcast row vector (1 x d)
  kHadamard,       // elementwise a * b
  kScale,          // c * X, constant scalar
  kElu,            // alpha = 1
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kClampMin,       // max(x, c)
  kRowSum,         // (n x m) -> (n x 1)
  kSumAll,         // -> (1 x 1)
  kDiagPart,       // square (n x n) -> (n x 1)
  kGatherCols,     // y_i = X(i, idx[i]) -> (n x 1)
  kConcatScalars,  // S scalar nodes -> (1 x S)
  kSoftmaxRow,     // row-wise softmax with max shift
  kScaleByEntry,   // Y = W(r, c) * X, W a tape node
  kLogWSumExpRows, // y_i = log(max(eps, sum_j G_ij exp(S_ij))), stable
  kPairwiseRowSum, // (n x d), (m x d) -> (n*m x d); row i*m+j = A_i + B_j
  kScaleRows,      // Y(i,j) = X(i,j) * v(i,0)
  kReshape,        // row-major reinterpret
};

struct TapeNode {
  Op op;
  std::array<NodeId, 2> in{kNoNode, kNoNode};
  std::vector<NodeId> extra_in;  // kConcatScalars only
  Matrix value;
  Matrix grad;  // allocated during backward for nodes that require it
  bool requires_grad = false;

  // op payload
  bool trans_a = false, trans_b = false;
  double scalar = 0.0;
  std::vector<std::size_t> indices;
  std::size_t entry_row = 0, entry_col = 0;  // kScaleByEntry / kReshape dims
  DiffMatrix* param = nullptr;
};

/// Reverse-mode tape over dense matrices. Records every primitive applied,
/// hard-errors on any non-finite output, and replays or differentiates the
/// exact recorded composition.
class Tape {
 public:
  NodeId leaf(DiffMatrix& p);
  NodeId constant(Matrix v);

  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId x, NodeId row);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  NodeId elu(NodeId x);
  NodeId tanh_(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId exp_(NodeId x);
  NodeId log_(NodeId x);
  NodeId clamp_min(NodeId x, double c);
  NodeId row_sum(NodeId x);
  NodeId sum_all(NodeId x);
  NodeId mean_all(NodeId x);
  NodeId diag_part(NodeId x);
  NodeId gather_cols(NodeId x, std::vector<std::size_t> idx);
  NodeId concat_scalars(const std::vector<NodeId>& scalars);
  NodeId softmax_row(NodeId x);
  NodeId scale_by_entry(NodeId x, NodeId weights, std::size_t r, std::size_t c);
  /// y_i = log(max(eps, sum_j gamma_ij * exp(scores_ij))), computed with a
  /// row-max shift. Pass weights = kNoNode for an implicit all-ones gamma.
  NodeId log_weighted_sumexp_rows(NodeId scores, NodeId weights, double eps);
  NodeId pairwise_row_sum(NodeId a, NodeId b);
  NodeId scale_rows(NodeId x, NodeId col);
  NodeId reshape(NodeId x, std::size_t rows, std::size_t cols);

  const Matrix& value(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  const Matrix& grad(NodeId id) const;
  bool requires_grad(NodeId id) const {
    return nodes_.at(static_cast<std::size_t>(id)).requires_grad;
  }
  std::size_t num_nodes() const { return nodes_.size(); }

  /// Accumulates d(loss)/d(p) into every trainable leaf's DiffMatrix::grad.
  /// loss must be a 1x1 node.
  void backward(NodeId loss);

  /// Recomputes every node from the recorded leaves; returns the fresh
  /// values. Used to assert bitwise replay determinism.
  std::vector<Matrix> replay() const;

 private:
  NodeId push(TapeNode n);
  Matrix eval(const TapeNode& n, const std::vector<Matrix>* vals) const;
  const Matrix& input_value(const TapeNode& n, int slot, const std::vector<Matrix>* vals) const;

  std::vector<TapeNode> nodes_;
};

}  // namespace meow::ad
