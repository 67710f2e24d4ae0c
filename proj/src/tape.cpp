#include "meow/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace meow::ad {

namespace {

void check_valid(NodeId id, std::size_t count, const char* where) {
  if (id < 0 || static_cast<std::size_t>(id) >= count)
    throw std::invalid_argument(std::string(where) + ": invalid node id " + std::to_string(id));
}

}  // namespace

const Matrix& Tape::grad(NodeId id) const {
  const auto& n = nodes_.at(static_cast<std::size_t>(id));
  if (!n.requires_grad)
    throw std::logic_error("grad: node " + std::to_string(id) + " does not require gradients");
  return n.grad;
}

const Matrix& Tape::input_value(const TapeNode& n, int slot,
                                const std::vector<Matrix>* vals) const {
  const NodeId id = n.in[static_cast<std::size_t>(slot)];
  return vals ? (*vals)[static_cast<std::size_t>(id)]
              : nodes_[static_cast<std::size_t>(id)].value;
}

Matrix Tape::eval(const TapeNode& n, const std::vector<Matrix>* vals) const {
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      return n.value;
    case Op::kMatMul:
      return meow::matmul(input_value(n, 0, vals), input_value(n, 1, vals), n.trans_a, n.trans_b);
    case Op::kAdd: {
      Matrix out = input_value(n, 0, vals);
      add_scaled(out, input_value(n, 1, vals), 1.0);
      return out;
    }
    case Op::kSub: {
      Matrix out = input_value(n, 0, vals);
      add_scaled(out, input_value(n, 1, vals), -1.0);
      return out;
    }
    case Op::kAddRowVec: {
      const Matrix& x = input_value(n, 0, vals);
      const Matrix& row = input_value(n, 1, vals);
      Matrix out = x;
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += row(0, j);
      return out;
    }
    case Op::kHadamard: {
      const Matrix& a = input_value(n, 0, vals);
      const Matrix& b = input_value(n, 1, vals);
      Matrix out = a;
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
      return out;
    }
    case Op::kScale: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= n.scalar;
      return out;
    }
    case Op::kElu: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = out.data()[i];
        out.data()[i] = x > 0.0 ? x : std::expm1(x);
      }
      return out;
    }
    case Op::kTanh: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
      return out;
    }
    case Op::kSigmoid: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = 1.0 / (1.0 + std::exp(-out.data()[i]));
      return out;
    }
    case Op::kExp: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(out.data()[i]);
      return out;
    }
    case Op::kLog: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(out.data()[i]);
      return out;
    }
    case Op::kClampMin: {
      Matrix out = input_value(n, 0, vals);
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] = std::max(out.data()[i], n.scalar);
      return out;
    }
    case Op::kRowSum: {
      const Matrix& x = input_value(n, 0, vals);
      Matrix out(x.rows(), 1);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j);
        out(i, 0) = s;
      }
      return out;
    }
    case Op::kSumAll: {
      const Matrix& x = input_value(n, 0, vals);
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
      Matrix out(1, 1);
      out(0, 0) = s;
      return out;
    }
    case Op::kDiagPart: {
      const Matrix& x = input_value(n, 0, vals);
      Matrix out(x.rows(), 1);
      for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, i);
      return out;
    }
    case Op::kGatherCols: {
      const Matrix& x = input_value(n, 0, vals);
      Matrix out(x.rows(), 1);
      for (std::size_t i = 0; i < x.rows(); ++i) out(i, 0) = x(i, n.indices[i]);
      return out;
    }
    case Op::kConcatScalars: {
      Matrix out(1, n.extra_in.size());
      for (std::size_t s = 0; s < n.extra_in.size(); ++s) {
        const auto id = static_cast<std::size_t>(n.extra_in[s]);
        out(0, s) = vals ? (*vals)[id](0, 0) : nodes_[id].value(0, 0);
      }
      return out;
    }
    case Op::kSoftmaxRow: {
      const Matrix& x = input_value(n, 0, vals);
      Matrix out(x.rows(), x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
          out(i, j) = std::exp(x(i, j) - mx);
          denom += out(i, j);
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= denom;
      }
      return out;
    }
    case Op::kScaleByEntry: {
      const Matrix& x = input_value(n, 0, vals);
      const Matrix& w = input_value(n, 1, vals);
      const double c = w(n.entry_row, n.entry_col);
      Matrix out = x;
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= c;
      return out;
    }
    case Op::kLogWSumExpRows: {
      const Matrix& s = input_value(n, 0, vals);
      const Matrix* g = n.in[1] == kNoNode ? nullptr : &input_value(n, 1, vals);
      Matrix out(s.rows(), 1);
      for (std::size_t i = 0; i < s.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s.cols(); ++j) mx = std::max(mx, s(i, j));
        double acc = 0.0;
        for (std::size_t j = 0; j < s.cols(); ++j)
          acc += (g ? (*g)(i, j) : 1.0) * std::exp(s(i, j) - mx);
        const double floor_shifted = n.scalar * std::exp(-mx);
        out(i, 0) = (acc > 0.0 && acc > floor_shifted) ? mx + std::log(acc) : std::log(n.scalar);
      }
      return out;
    }
    case Op::kPairwiseRowSum: {
      const Matrix& a = input_value(n, 0, vals);
      const Matrix& b = input_value(n, 1, vals);
      Matrix out(a.rows() * b.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
          for (std::size_t c = 0; c < a.cols(); ++c)
            out(i * b.rows() + j, c) = a(i, c) + b(j, c);
      return out;
    }
    case Op::kScaleRows: {
      const Matrix& x = input_value(n, 0, vals);
      const Matrix& v = input_value(n, 1, vals);
      Matrix out = x;
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) *= v(i, 0);
      return out;
    }
    case Op::kReshape: {
      const Matrix& x = input_value(n, 0, vals);
      Matrix out(n.entry_row, n.entry_col);
      std::copy(x.data(), x.data() + x.size(), out.data());
      return out;
    }
  }
  throw std::logic_error("eval: unhandled op");
}

NodeId Tape::push(TapeNode n) {
  if (n.op != Op::kLeaf && n.op != Op::kConst) {
    n.value = eval(n, nullptr);
    bool rg = false;
    for (int s = 0; s < 2; ++s)
      if (n.in[static_cast<std::size_t>(s)] != kNoNode)
        rg = rg || nodes_[static_cast<std::size_t>(n.in[static_cast<std::size_t>(s)])].requires_grad;
    for (NodeId e : n.extra_in) rg = rg || nodes_[static_cast<std::size_t>(e)].requires_grad;
    n.requires_grad = rg;
  }
  if (!n.value.all_finite())
    throw std::runtime_error("tape: non-finite value produced by op " +
                             std::to_string(static_cast<int>(n.op)) + " at node " +
                             std::to_string(nodes_.size()));
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(DiffMatrix& p) {
  TapeNode n;
  n.op = Op::kLeaf;
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.param = &p;
  return push(std::move(n));
}

NodeId Tape::constant(Matrix v) {
  TapeNode n;
  n.op = Op::kConst;
  n.value = std::move(v);
  n.requires_grad = false;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  check_valid(a, nodes_.size(), "matmul");
  check_valid(b, nodes_.size(), "matmul");
  TapeNode n;
  n.op = Op::kMatMul;
  n.in = {a, b};
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_valid(a, nodes_.size(), "add");
  check_valid(b, nodes_.size(), "add");
  if (!value(a).same_shape(value(b))) throw_shape_error("tape add", value(a), value(b));
  TapeNode n;
  n.op = Op::kAdd;
  n.in = {a, b};
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_valid(a, nodes_.size(), "sub");
  check_valid(b, nodes_.size(), "sub");
  if (!value(a).same_shape(value(b))) throw_shape_error("tape sub", value(a), value(b));
  TapeNode n;
  n.op = Op::kSub;
  n.in = {a, b};
  return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId x, NodeId row) {
  check_valid(x, nodes_.size(), "add_rowvec");
  check_valid(row, nodes_.size(), "add_rowvec");
  if (value(row).rows() != 1 || value(row).cols() != value(x).cols())
    throw_shape_error("tape add_rowvec", value(x), value(row));
  TapeNode n;
  n.op = Op::kAddRowVec;
  n.in = {x, row};
  return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  check_valid(a, nodes_.size(), "hadamard");
  check_valid(b, nodes_.size(), "hadamard");
  if (!value(a).same_shape(value(b))) throw_shape_error("tape hadamard", value(a), value(b));
  TapeNode n;
  n.op = Op::kHadamard;
  n.in = {a, b};
  return push(std::move(n));
}

NodeId Tape::scale(NodeId x, double c) {
  check_valid(x, nodes_.size(), "scale");
  TapeNode n;
  n.op = Op::kScale;
  n.in = {x, kNoNode};
  n.scalar = c;
  return push(std::move(n));
}

#define MEOW_UNARY_OP(method, opkind)              \
  NodeId Tape::method(NodeId x) {                  \
    check_valid(x, nodes_.size(), #method);        \
    TapeNode n;                                    \
    n.op = opkind;                                 \
    n.in = {x, kNoNode};                           \
    return push(std::move(n));                     \
  }

MEOW_UNARY_OP(elu, Op::kElu)
MEOW_UNARY_OP(tanh_, Op::kTanh)
MEOW_UNARY_OP(sigmoid, Op::kSigmoid)
MEOW_UNARY_OP(exp_, Op::kExp)
MEOW_UNARY_OP(log_, Op::kLog)
MEOW_UNARY_OP(row_sum, Op::kRowSum)
MEOW_UNARY_OP(sum_all, Op::kSumAll)
MEOW_UNARY_OP(softmax_row, Op::kSoftmaxRow)

#undef MEOW_UNARY_OP

NodeId Tape::clamp_min(NodeId x, double c) {
  check_valid(x, nodes_.size(), "clamp_min");
  TapeNode n;
  n.op = Op::kClampMin;
  n.in = {x, kNoNode};
  n.scalar = c;
  return push(std::move(n));
}

NodeId Tape::mean_all(NodeId x) {
  const auto& v = value(x);
  if (v.size() == 0) throw std::invalid_argument("mean_all: empty matrix");
  return scale(sum_all(x), 1.0 / static_cast<double>(v.size()));
}

NodeId Tape::diag_part(NodeId x) {
  check_valid(x, nodes_.size(), "diag_part");
  if (value(x).rows() != value(x).cols())
    throw std::invalid_argument("diag_part: matrix is not square");
  TapeNode n;
  n.op = Op::kDiagPart;
  n.in = {x, kNoNode};
  return push(std::move(n));
}

NodeId Tape::gather_cols(NodeId x, std::vector<std::size_t> idx) {
  check_valid(x, nodes_.size(), "gather_cols");
  const auto& v = value(x);
  if (idx.size() != v.rows()) throw std::invalid_argument("gather_cols: index count != rows");
  for (std::size_t i : idx)
    if (i >= v.cols()) throw std::invalid_argument("gather_cols: column index out of range");
  TapeNode n;
  n.op = Op::kGatherCols;
  n.in = {x, kNoNode};
  n.indices = std::move(idx);
  return push(std::move(n));
}

NodeId Tape::concat_scalars(const std::vector<NodeId>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("concat_scalars: empty input");
  for (NodeId s : scalars) {
    check_valid(s, nodes_.size(), "concat_scalars");
    if (value(s).rows() != 1 || value(s).cols() != 1)
      throw std::invalid_argument("concat_scalars: inputs must be 1x1");
  }
  TapeNode n;
  n.op = Op::kConcatScalars;
  n.extra_in = scalars;
  return push(std::move(n));
}

NodeId Tape::scale_by_entry(NodeId x, NodeId weights, std::size_t r, std::size_t c) {
  check_valid(x, nodes_.size(), "scale_by_entry");
  check_valid(weights, nodes_.size(), "scale_by_entry");
  const auto& w = value(weights);
  if (r >= w.rows() || c >= w.cols())
    throw std::invalid_argument("scale_by_entry: entry out of range");
  TapeNode n;
  n.op = Op::kScaleByEntry;
  n.in = {x, weights};
  n.entry_row = r;
  n.entry_col = c;
  return push(std::move(n));
}

NodeId Tape::log_weighted_sumexp_rows(NodeId scores, NodeId weights, double eps) {
  check_valid(scores, nodes_.size(), "log_weighted_sumexp_rows");
  if (eps < 0.0) throw std::invalid_argument("log_weighted_sumexp_rows: eps must be >= 0");
  if (weights != kNoNode) {
    check_valid(weights, nodes_.size(), "log_weighted_sumexp_rows");
    if (!value(scores).same_shape(value(weights)))
      throw_shape_error("log_weighted_sumexp_rows", value(scores), value(weights));
    const Matrix& g = value(weights);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.data()[i] < 0.0)
        throw std::invalid_argument("log_weighted_sumexp_rows: negative weight");
  }
  TapeNode n;
  n.op = Op::kLogWSumExpRows;
  n.in = {scores, weights};
  n.scalar = eps;
  return push(std::move(n));
}

NodeId Tape::pairwise_row_sum(NodeId a, NodeId b) {
  check_valid(a, nodes_.size(), "pairwise_row_sum");
  check_valid(b, nodes_.size(), "pairwise_row_sum");
  if (value(a).cols() != value(b).cols())
    throw_shape_error("pairwise_row_sum", value(a), value(b));
  TapeNode n;
  n.op = Op::kPairwiseRowSum;
  n.in = {a, b};
  return push(std::move(n));
}

NodeId Tape::scale_rows(NodeId x, NodeId col) {
  check_valid(x, nodes_.size(), "scale_rows");
  check_valid(col, nodes_.size(), "scale_rows");
  if (value(col).rows() != value(x).rows() || value(col).cols() != 1)
    throw_shape_error("scale_rows", value(x), value(col));
  TapeNode n;
  n.op = Op::kScaleRows;
  n.in = {x, col};
  return push(std::move(n));
}

NodeId Tape::reshape(NodeId x, std::size_t rows, std::size_t cols) {
  check_valid(x, nodes_.size(), "reshape");
  if (rows * cols != value(x).size())
    throw std::invalid_argument("reshape: element count mismatch");
  TapeNode n;
  n.op = Op::kReshape;
  n.in = {x, kNoNode};
  n.entry_row = rows;
  n.entry_col = cols;
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  check_valid(loss, nodes_.size(), "backward");
  {
    const auto& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw std::invalid_argument("backward: loss must be a 1x1 node, got " + lv.shape_str());
  }
  if (!nodes_[static_cast<std::size_t>(loss)].requires_grad) return;  // constant loss

  for (auto& n : nodes_)
    if (n.requires_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[static_cast<std::size_t>(loss)].grad(0, 0) = 1.0;

  auto needs = [&](NodeId id) {
    return id != kNoNode && nodes_[static_cast<std::size_t>(id)].requires_grad;
  };
  auto g_of = [&](NodeId id) -> Matrix& { return nodes_[static_cast<std::size_t>(id)].grad; };
  auto v_of = [&](NodeId id) -> const Matrix& {
    return nodes_[static_cast<std::size_t>(id)].value;
  };

  for (std::size_t pos = nodes_.size(); pos-- > 0;) {
    TapeNode& n = nodes_[pos];
    if (!n.requires_grad) continue;
    const Matrix& gy = n.grad;
    const NodeId ia = n.in[0];
    const NodeId ib = n.in[1];
    switch (n.op) {
      case Op::kLeaf:
        if (n.param && n.param->trainable) add_scaled(n.param->grad, gy);
        break;
      case Op::kConst:
        break;
      case Op::kMatMul: {
        if (needs(ia)) {
          if (!n.trans_a && !n.trans_b)
            matmul_acc(g_of(ia), gy, v_of(ib), false, true);
          else if (n.trans_a && !n.trans_b)
            matmul_acc(g_of(ia), v_of(ib), gy, false, true);
          else if (!n.trans_a && n.trans_b)
            matmul_acc(g_of(ia), gy, v_of(ib), false, false);
          else
            matmul_acc(g_of(ia), v_of(ib), gy, true, true);
        }
        if (needs(ib)) {
          if (!n.trans_a && !n.trans_b)
            matmul_acc(g_of(ib), v_of(ia), gy, true, false);
          else if (n.trans_a && !n.trans_b)
            matmul_acc(g_of(ib), v_of(ia), gy, false, false);
          else if (!n.trans_a && n.trans_b)
            matmul_acc(g_of(ib), gy, v_of(ia), true, false);
          else
            matmul_acc(g_of(ib), gy, v_of(ia), true, true);
        }
        break;
      }
      case Op::kAdd:
        if (needs(ia)) add_scaled(g_of(ia), gy);
        if (needs(ib)) add_scaled(g_of(ib), gy);
        break;
      case Op::kSub:
        if (needs(ia)) add_scaled(g_of(ia), gy);
        if (needs(ib)) add_scaled(g_of(ib), gy, -1.0);
        break;
      case Op::kAddRowVec: {
        if (needs(ia)) add_scaled(g_of(ia), gy);
        if (needs(ib)) {
          Matrix& gb = g_of(ib);
          for (std::size_t i = 0; i < gy.rows(); ++i)
            for (std::size_t j = 0; j < gy.cols(); ++j) gb(0, j) += gy(i, j);
        }
        break;
      }
      case Op::kHadamard: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const Matrix& b = v_of(ib);
          for (std::size_t i = 0; i < gy.size(); ++i)
            ga.data()[i] += gy.data()[i] * b.data()[i];
        }
        if (needs(ib)) {
          Matrix& gb = g_of(ib);
          const Matrix& a = v_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i)
            gb.data()[i] += gy.data()[i] * a.data()[i];
        }
        break;
      }
      case Op::kScale:
        if (needs(ia)) add_scaled(g_of(ia), gy, n.scalar);
        break;
      case Op::kElu: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const Matrix& x = v_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i) {
            const double xi = x.data()[i];
            ga.data()[i] += gy.data()[i] * (xi > 0.0 ? 1.0 : std::exp(xi));
          }
        }
        break;
      }
      case Op::kTanh: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i) {
            const double y = n.value.data()[i];
            ga.data()[i] += gy.data()[i] * (1.0 - y * y);
          }
        }
        break;
      }
      case Op::kSigmoid: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i) {
            const double y = n.value.data()[i];
            ga.data()[i] += gy.data()[i] * y * (1.0 - y);
          }
        }
        break;
      }
      case Op::kExp: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i)
            ga.data()[i] += gy.data()[i] * n.value.data()[i];
        }
        break;
      }
      case Op::kLog: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const Matrix& x = v_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i)
            ga.data()[i] += gy.data()[i] / x.data()[i];
        }
        break;
      }
      case Op::kClampMin: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const Matrix& x = v_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i)
            if (x.data()[i] >= n.scalar) ga.data()[i] += gy.data()[i];
        }
        break;
      }
      case Op::kRowSum: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += gy(i, 0);
        }
        break;
      }
      case Op::kSumAll: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const double g = gy(0, 0);
          for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
        }
        break;
      }
      case Op::kDiagPart: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.rows(); ++i) ga(i, i) += gy(i, 0);
        }
        break;
      }
      case Op::kGatherCols: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.rows(); ++i) ga(i, n.indices[i]) += gy(i, 0);
        }
        break;
      }
      case Op::kConcatScalars: {
        for (std::size_t s = 0; s < n.extra_in.size(); ++s)
          if (needs(n.extra_in[s])) g_of(n.extra_in[s])(0, 0) += gy(0, s);
        break;
      }
      case Op::kSoftmaxRow: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          const Matrix& y = n.value;
          for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) dot += gy(i, j) * y(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j)
              ga(i, j) += y(i, j) * (gy(i, j) - dot);
          }
        }
        break;
      }
      case Op::kScaleByEntry: {
        const double c = v_of(ib)(n.entry_row, n.entry_col);
        if (needs(ia)) add_scaled(g_of(ia), gy, c);
        if (needs(ib)) {
          const Matrix& x = v_of(ia);
          double acc = 0.0;
          for (std::size_t i = 0; i < gy.size(); ++i) acc += gy.data()[i] * x.data()[i];
          g_of(ib)(n.entry_row, n.entry_col) += acc;
        }
        break;
      }
      case Op::kLogWSumExpRows: {
        const Matrix& s = v_of(ia);
        const Matrix* g = ib == kNoNode ? nullptr : &v_of(ib);
        const bool want_s = needs(ia);
        const bool want_g = needs(ib);
        if (!want_s && !want_g) break;
        for (std::size_t i = 0; i < s.rows(); ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < s.cols(); ++j) mx = std::max(mx, s(i, j));
          double acc = 0.0;
          for (std::size_t j = 0; j < s.cols(); ++j)
            acc += (g ? (*g)(i, j) : 1.0) * std::exp(s(i, j) - mx);
          const double floor_shifted = n.scalar * std::exp(-mx);
          if (!(acc > 0.0 && acc > floor_shifted)) continue;  // clamped row: zero gradient
          for (std::size_t j = 0; j < s.cols(); ++j) {
            const double e = std::exp(s(i, j) - mx) / acc;
            if (want_s) g_of(ia)(i, j) += gy(i, 0) * (g ? (*g)(i, j) : 1.0) * e;
            if (want_g) g_of(ib)(i, j) += gy(i, 0) * e;
          }
        }
        break;
      }
      case Op::kPairwiseRowSum: {
        const std::size_t bn = v_of(ib).rows();
        const std::size_t an = v_of(ia).rows();
        const std::size_t d = v_of(ia).cols();
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < an; ++i)
            for (std::size_t j = 0; j < bn; ++j)
              for (std::size_t c = 0; c < d; ++c) ga(i, c) += gy(i * bn + j, c);
        }
        if (needs(ib)) {
          Matrix& gb = g_of(ib);
          for (std::size_t i = 0; i < an; ++i)
            for (std::size_t j = 0; j < bn; ++j)
              for (std::size_t c = 0; c < d; ++c) gb(j, c) += gy(i * bn + j, c);
        }
        break;
      }
      case Op::kScaleRows: {
        const Matrix& x = v_of(ia);
        const Matrix& v = v_of(ib);
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) += gy(i, j) * v(i, 0);
        }
        if (needs(ib)) {
          Matrix& gb = g_of(ib);
          for (std::size_t i = 0; i < x.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) acc += gy(i, j) * x(i, j);
            gb(i, 0) += acc;
          }
        }
        break;
      }
      case Op::kReshape: {
        if (needs(ia)) {
          Matrix& ga = g_of(ia);
          for (std::size_t i = 0; i < gy.size(); ++i) ga.data()[i] += gy.data()[i];
        }
        break;
      }
    }
  }

  for (const auto& n : nodes_) {
    if (n.op == Op::kLeaf && n.param && n.param->trainable && !n.param->grad.all_finite())
      throw std::runtime_error("backward: non-finite gradient for parameter '" + n.param->name +
                               "'");
  }
}

std::vector<Matrix> Tape::replay() const {
  std::vector<Matrix> vals;
  vals.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    if (n.op == Op::kLeaf || n.op == Op::kConst)
      vals.push_back(n.value);
    else
      vals.push_back(eval(n, &vals));
  }
  return vals;
}

}  // namespace meow::ad
