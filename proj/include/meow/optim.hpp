#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "meow/matrix.hpp"
#include "meow/rng.hpp"
#include "meow/tape.hpp"

namespace meow::ad {

/// Adam with bias correction. The L2 term (weight_decay * param) is added to
/// the gradient of parameters flagged apply_weight_decay (weight matrices),
/// never to biases.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t t = 0;
  std::vector<Matrix> m, v;

  void init(const std::vector<DiffMatrix*>& params);
  void step(const std::vector<DiffMatrix*>& params);
};

/// Xavier-uniform init: entries uniform in +-sqrt(6 / (fan_in + fan_out)).
DiffMatrix xavier_uniform(const std::string& name, std::size_t rows, std::size_t cols,
                          std::uint64_t seed, bool decay = true);

DiffMatrix zeros(const std::string& name, std::size_t rows, std::size_t cols,
                 bool decay = false);

struct FdCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst_param;
  std::size_t entries_checked = 0;
};

/// Central-difference verification of tape gradients. The builder records a
/// fresh tape from the current parameter values and returns the scalar loss
/// node; it is invoked once for the analytic pass and twice per parameter
/// entry for the differences. Relative error is
/// |analytic - fd| / max(1, |fd|), maximized over all entries.
FdCheckResult fd_check(const std::vector<DiffMatrix*>& params,
                       const std::function<NodeId(Tape&)>& builder, double h);

}  // namespace meow::ad
