#include "meow/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace meow::ad {

void AdamState::init(const std::vector<DiffMatrix*>& params) {
  m.clear();
  v.clear();
  t = 0;
  for (const DiffMatrix* p : params) {
    m.emplace_back(p->value.rows(), p->value.cols());
    v.emplace_back(p->value.rows(), p->value.cols());
  }
}

void AdamState::step(const std::vector<DiffMatrix*>& params) {
  if (params.size() != m.size())
    throw std::invalid_argument("AdamState::step: parameter count changed since init");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    DiffMatrix& dm = *params[p];
    if (!dm.value.same_shape(m[p]))
      throw std::invalid_argument("AdamState::step: shape mismatch for '" + dm.name + "'");
    const double wd = dm.apply_weight_decay ? weight_decay : 0.0;
    double* val = dm.value.data();
    const double* grad = dm.grad.data();
    double* mp = m[p].data();
    double* vp = v[p].data();
    for (std::size_t i = 0; i < dm.value.size(); ++i) {
      const double g = grad[i] + wd * val[i];
      mp[i] = beta1 * mp[i] + (1.0 - beta1) * g;
      vp[i] = beta2 * vp[i] + (1.0 - beta2) * g * g;
      const double m_hat = mp[i] / bc1;
      const double v_hat = vp[i] / bc2;
      val[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

DiffMatrix xavier_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                          std::uint64_t seed, bool decay) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("xavier_uniform: dimensions must be positive");
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return DiffMatrix(name, std::move(m), /*train=*/true, decay);
}

DiffMatrix zeros(const std::string& name, std::size_t rows, std::size_t cols, bool decay) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("zeros: dimensions must be positive");
  return DiffMatrix(name, Matrix(rows, cols), /*train=*/true, decay);
}

FdCheckResult fd_check(const std::vector<DiffMatrix*>& params,
                       const std::function<NodeId(Tape&)>& builder, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_check: invalid step h");

  auto loss_value = [&]() {
    Tape t;
    const NodeId loss = builder(t);
    return t.value(loss)(0, 0);
  };

  for (DiffMatrix* p : params) p->zero_grad();
  {
    Tape t;
    const NodeId loss = builder(t);
    t.backward(loss);
  }

  FdCheckResult result;
  for (DiffMatrix* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double plus = loss_value();
      p->value.data()[i] = saved - h;
      const double minus = loss_value();
      p->value.data()[i] = saved;

      const double fd = (plus - minus) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double abs_err = std::abs(analytic - fd);
      const double rel_err = abs_err / std::max(1.0, std::abs(fd));
      if (rel_err > result.max_rel_err) {
        result.max_rel_err = rel_err;
        result.worst_param = p->name;
      }
      result.max_abs_err = std::max(result.max_abs_err, abs_err);
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace meow::ad
