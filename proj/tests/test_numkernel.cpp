#include "doctest.h"

#include <cmath>
#include <vector>

#include "meow/matrix.hpp"
#include "meow/optim.hpp"
#include "meow/rng.hpp"
#include "meow/tape.hpp"

using meow::Matrix;
using meow::Rng;
using meow::ad::DiffMatrix;
using meow::ad::FdCheckResult;
using meow::ad::NodeId;
using meow::ad::Tape;

namespace {

DiffMatrix random_param(const std::string& name, std::size_t r, std::size_t c,
                        std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return DiffMatrix(name, std::move(m));
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Reduces an arbitrary node to a scalar with non-uniform output weights so
// every entry of the op's jacobian participates in the check.
NodeId weighted_scalar(Tape& t, NodeId x, std::uint64_t seed) {
  const Matrix& v = t.value(x);
  return t.sum_all(t.hadamard(x, t.constant(random_matrix(v.rows(), v.cols(), seed))));
}

double run_fd(const std::vector<DiffMatrix*>& params,
              const std::function<NodeId(Tape&)>& builder) {
  return meow::ad::fd_check(params, builder, 1e-5).max_rel_err;
}

}  // namespace

TEST_CASE("per-op backward rules pass finite differences") {
  SUBCASE("matmul, all transpose combinations") {
    for (int ta = 0; ta < 2; ++ta) {
      for (int tb = 0; tb < 2; ++tb) {
        DiffMatrix a = random_param("a", ta ? 4 : 3, ta ? 3 : 4, 11);
        DiffMatrix b = random_param("b", tb ? 5 : 4, tb ? 4 : 5, 12);
        auto build = [&](Tape& t) {
          return weighted_scalar(t, t.matmul(t.leaf(a), t.leaf(b), ta != 0, tb != 0), 13);
        };
        CHECK(run_fd({&a, &b}, build) < 1e-6);
      }
    }
  }

  SUBCASE("add / sub / add_rowvec / hadamard / scale") {
    DiffMatrix a = random_param("a", 3, 4, 21);
    DiffMatrix b = random_param("b", 3, 4, 22);
    DiffMatrix row = random_param("row", 1, 4, 23);
    auto build = [&](Tape& t) {
      NodeId x = t.add(t.leaf(a), t.leaf(b));
      x = t.sub(x, t.scale(t.leaf(b), 0.7));
      x = t.add_rowvec(x, t.leaf(row));
      x = t.hadamard(x, t.leaf(a));
      return weighted_scalar(t, x, 24);
    };
    CHECK(run_fd({&a, &b, &row}, build) < 1e-6);
  }

  SUBCASE("elementwise activations") {
    DiffMatrix a = random_param("a", 4, 3, 31);
    auto build_elu = [&](Tape& t) { return weighted_scalar(t, t.elu(t.leaf(a)), 32); };
    auto build_tanh = [&](Tape& t) { return weighted_scalar(t, t.tanh_(t.leaf(a)), 33); };
    auto build_sig = [&](Tape& t) { return weighted_scalar(t, t.sigmoid(t.leaf(a)), 34); };
    auto build_exp = [&](Tape& t) { return weighted_scalar(t, t.exp_(t.leaf(a)), 35); };
    CHECK(run_fd({&a}, build_elu) < 1e-6);
    CHECK(run_fd({&a}, build_tanh) < 1e-6);
    CHECK(run_fd({&a}, build_sig) < 1e-6);
    CHECK(run_fd({&a}, build_exp) < 1e-6);
  }

  SUBCASE("log on positive inputs") {
    DiffMatrix a = random_param("a", 4, 3, 41, 0.5, 2.0);
    auto build = [&](Tape& t) { return weighted_scalar(t, t.log_(t.leaf(a)), 42); };
    CHECK(run_fd({&a}, build) < 1e-6);
  }

  SUBCASE("clamp_min away from the threshold") {
    DiffMatrix a = random_param("a", 4, 3, 51);
    auto build = [&](Tape& t) { return weighted_scalar(t, t.clamp_min(t.leaf(a), 0.21), 52); };
    CHECK(run_fd({&a}, build) < 1e-6);
  }

  SUBCASE("reductions and gathers") {
    DiffMatrix a = random_param("a", 4, 4, 61);
    auto build_rowsum = [&](Tape& t) { return weighted_scalar(t, t.row_sum(t.leaf(a)), 62); };
    auto build_sumall = [&](Tape& t) { return t.sum_all(t.leaf(a)); };
    auto build_mean = [&](Tape& t) { return t.mean_all(t.leaf(a)); };
    auto build_diag = [&](Tape& t) { return weighted_scalar(t, t.diag_part(t.leaf(a)), 63); };
    auto build_gather = [&](Tape& t) {
      return weighted_scalar(t, t.gather_cols(t.leaf(a), {2, 0, 3, 1}), 64);
    };
    CHECK(run_fd({&a}, build_rowsum) < 1e-6);
    CHECK(run_fd({&a}, build_sumall) < 1e-6);
    CHECK(run_fd({&a}, build_mean) < 1e-6);
    CHECK(run_fd({&a}, build_diag) < 1e-6);
    CHECK(run_fd({&a}, build_gather) < 1e-6);
  }

  SUBCASE("concat_scalars and softmax_row") {
    DiffMatrix a = random_param("a", 2, 3, 71);
    DiffMatrix b = random_param("b", 2, 3, 72);
    auto build = [&](Tape& t) {
      NodeId s1 = t.mean_all(t.leaf(a));
      NodeId s2 = t.mean_all(t.hadamard(t.leaf(a), t.leaf(b)));
      NodeId s3 = t.mean_all(t.leaf(b));
      NodeId w = t.concat_scalars({s1, s2, s3});
      return weighted_scalar(t, t.softmax_row(w), 73);
    };
    CHECK(run_fd({&a, &b}, build) < 1e-6);
  }

  SUBCASE("scale_by_entry") {
    DiffMatrix a = random_param("a", 3, 2, 81);
    DiffMatrix w = random_param("w", 1, 4, 82);
    auto build = [&](Tape& t) {
      return weighted_scalar(t, t.scale_by_entry(t.leaf(a), t.softmax_row(t.leaf(w)), 0, 2), 83);
    };
    CHECK(run_fd({&a, &w}, build) < 1e-6);
  }

  SUBCASE("log_weighted_sumexp_rows with and without weights") {
    DiffMatrix s = random_param("s", 4, 5, 91, -2.0, 2.0);
    DiffMatrix g = random_param("g", 4, 5, 92, 0.1, 2.0);
    auto build_w = [&](Tape& t) {
      NodeId lse = t.log_weighted_sumexp_rows(t.leaf(s), t.leaf(g), 1e-12);
      return weighted_scalar(t, lse, 93);
    };
    auto build_plain = [&](Tape& t) {
      NodeId lse = t.log_weighted_sumexp_rows(t.leaf(s), meow::ad::kNoNode, 1e-12);
      return weighted_scalar(t, lse, 94);
    };
    CHECK(run_fd({&s, &g}, build_w) < 1e-6);
    CHECK(run_fd({&s}, build_plain) < 1e-6);
  }

  SUBCASE("log_weighted_sumexp_rows matches the composed exp/log route") {
    Matrix sv = random_matrix(5, 6, 95, -3.0, 3.0);
    Matrix gv = random_matrix(5, 6, 96, 0.0, 2.0);
    Tape t;
    NodeId fused = t.log_weighted_sumexp_rows(t.constant(sv), t.constant(gv), 0.0);
    NodeId composed = t.log_(t.row_sum(t.hadamard(t.constant(gv), t.exp_(t.constant(sv)))));
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(t.value(fused)(i, 0) == doctest::Approx(t.value(composed)(i, 0)).epsilon(1e-12));
  }

  SUBCASE("pairwise_row_sum, scale_rows, reshape") {
    DiffMatrix a = random_param("a", 3, 4, 101);
    DiffMatrix b = random_param("b", 2, 4, 102);
    DiffMatrix v = random_param("v", 3, 1, 103, 0.2, 1.0);
    auto build_pair = [&](Tape& t) {
      return weighted_scalar(t, t.pairwise_row_sum(t.leaf(a), t.leaf(b)), 104);
    };
    auto build_rows = [&](Tape& t) {
      return weighted_scalar(t, t.scale_rows(t.leaf(a), t.leaf(v)), 105);
    };
    auto build_reshape = [&](Tape& t) {
      return weighted_scalar(t, t.reshape(t.leaf(a), 4, 3), 106);
    };
    CHECK(run_fd({&a, &b}, build_pair) < 1e-6);
    CHECK(run_fd({&a, &v}, build_rows) < 1e-6);
    CHECK(run_fd({&a}, build_reshape) < 1e-6);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum of parameter entries -> gradient all ones") {
    DiffMatrix a = random_param("a", 3, 5, 201);
    a.zero_grad();
    Tape t;
    t.backward(t.sum_all(t.leaf(a)));
    for (std::size_t i = 0; i < a.grad.size(); ++i) CHECK(a.grad.data()[i] == 1.0);
  }

  SUBCASE("constant loss -> gradient all zeros") {
    DiffMatrix a = random_param("a", 3, 5, 202);
    a.zero_grad();
    Tape t;
    t.leaf(a);  // on the tape but not on the loss path
    NodeId loss = t.sum_all(t.constant(random_matrix(2, 2, 203)));
    t.backward(loss);
    for (std::size_t i = 0; i < a.grad.size(); ++i) CHECK(a.grad.data()[i] == 0.0);
  }

  SUBCASE("random 3-op composition matches central differences") {
    DiffMatrix w = random_param("w", 4, 4, 204);
    DiffMatrix b = random_param("b", 1, 4, 205);
    Matrix x = random_matrix(6, 4, 206);
    auto build = [&](Tape& t) {
      NodeId h = t.tanh_(t.add_rowvec(t.matmul(t.constant(x), t.leaf(w)), t.leaf(b)));
      return t.mean_all(t.hadamard(h, h));
    };
    FdCheckResult r = meow::ad::fd_check({&w, &b}, build, 1e-5);
    CHECK(r.max_rel_err <= 1e-6);
  }

  SUBCASE("non-scalar loss rejected") {
    DiffMatrix a = random_param("a", 2, 2, 207);
    Tape t;
    NodeId x = t.leaf(a);
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
  }

  SUBCASE("non-finite forward value trips a hard error") {
    Tape t;
    Matrix neg(1, 1);
    neg(0, 0) = -1.0;
    CHECK_THROWS_AS(t.log_(t.constant(neg)), std::runtime_error);
  }
}

TEST_CASE("fd_check interface") {
  SUBCASE("linear loss is exact up to rounding") {
    DiffMatrix a = random_param("a", 3, 3, 301);
    auto build = [&](Tape& t) { return t.sum_all(t.scale(t.leaf(a), 2.5)); };
    FdCheckResult r = meow::ad::fd_check({&a}, build, 1e-5);
    CHECK(r.max_rel_err <= 1e-9);
  }

  SUBCASE("h = 0 is an invalid step") {
    DiffMatrix a = random_param("a", 2, 2, 302);
    auto build = [&](Tape& t) { return t.sum_all(t.leaf(a)); };
    CHECK_THROWS_AS(meow::ad::fd_check({&a}, build, 0.0), std::invalid_argument);
  }
}

TEST_CASE("tape replay reproduces recorded values bitwise") {
  DiffMatrix w = random_param("w", 5, 5, 401);
  Matrix x = random_matrix(7, 5, 402);
  Tape t;
  NodeId h = t.elu(t.matmul(t.constant(x), t.leaf(w)));
  NodeId s = t.softmax_row(h);
  NodeId loss = t.mean_all(t.log_(t.clamp_min(s, 1e-9)));
  (void)loss;
  auto replayed = t.replay();
  REQUIRE(replayed.size() == t.num_nodes());
  for (std::size_t i = 0; i < replayed.size(); ++i)
    CHECK(replayed[i] == t.value(static_cast<NodeId>(i)));
}

TEST_CASE("adam steps") {
  SUBCASE("hand-evaluated first step on a scalar") {
    DiffMatrix p("p", Matrix(1, 1));
    p.value(0, 0) = 0.3;
    p.grad = Matrix(1, 1, 1.0);
    meow::ad::AdamState adam;
    adam.lr = 0.01;
    adam.init({&p});
    adam.step({&p});
    // m=0.1, v=0.001, m_hat=1, v_hat=1 -> delta = -lr/(1+eps)
    CHECK(p.value(0, 0) == doctest::Approx(0.3 - 0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  }

  SUBCASE("zero gradient, zero weight decay -> parameters unchanged") {
    DiffMatrix p = random_param("p", 3, 3, 501);
    Matrix before = p.value;
    p.zero_grad();
    meow::ad::AdamState adam;
    adam.init({&p});
    adam.step({&p});
    CHECK(p.value == before);
  }

  SUBCASE("weight decay shrinks weights but never biases") {
    DiffMatrix w = meow::ad::xavier_uniform("w", 2, 2, 502);
    DiffMatrix b = meow::ad::zeros("b", 1, 2);
    b.value(0, 0) = 0.7;
    b.value(0, 1) = -0.4;
    Matrix w_before = w.value, b_before = b.value;
    w.zero_grad();
    b.zero_grad();
    meow::ad::AdamState adam;
    adam.lr = 0.01;
    adam.weight_decay = 1e-3;
    adam.init({&w, &b});
    adam.step({&w, &b});
    CHECK(b.value == b_before);
    for (std::size_t i = 0; i < w.value.size(); ++i)
      CHECK(std::abs(w.value.data()[i]) < std::abs(w_before.data()[i]));
  }

  SUBCASE("lr = 0 is the identity") {
    DiffMatrix p = random_param("p", 4, 2, 503);
    Matrix before = p.value;
    p.grad = random_matrix(4, 2, 504);
    meow::ad::AdamState adam;
    adam.lr = 0.0;
    adam.init({&p});
    adam.step({&p});
    CHECK(p.value == before);
  }
}

TEST_CASE("xavier-uniform initialization") {
  SUBCASE("same seed -> identical matrices") {
    auto a = meow::ad::xavier_uniform("a", 8, 16, 601);
    auto b = meow::ad::xavier_uniform("b", 8, 16, 601);
    CHECK(a.value == b.value);
  }

  SUBCASE("1x1 weight bounded by sqrt(3)") {
    for (std::uint64_t s = 0; s < 50; ++s) {
      auto w = meow::ad::xavier_uniform("w", 1, 1, 700 + s);
      CHECK(std::abs(w.value(0, 0)) <= std::sqrt(3.0));
    }
  }

  SUBCASE("empirical mean of 10^4 draws is 0 within 3 sigma") {
    auto w = meow::ad::xavier_uniform("w", 100, 100, 602);
    const double bound = std::sqrt(6.0 / 200.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.value.size(); ++i) mean += w.value.data()[i];
    mean /= static_cast<double>(w.value.size());
    const double sigma_of_mean = bound / std::sqrt(3.0) / 100.0;
    CHECK(std::abs(mean) <= 3.0 * sigma_of_mean);
  }
}

TEST_CASE("rng streams") {
  SUBCASE("derived seeds differ across domains and indices") {
    const std::uint64_t root = 42;
    CHECK(meow::derive_seed(root, "augment", 0) != meow::derive_seed(root, "cluster", 0));
    CHECK(meow::derive_seed(root, "augment", 0) != meow::derive_seed(root, "augment", 1));
    CHECK(meow::derive_seed(root, "augment", 3) == meow::derive_seed(root, "augment", 3));
  }

  SUBCASE("state round-trip resumes the stream") {
    Rng a(9);
    for (int i = 0; i < 17; ++i) a.next_u64();
    auto st = a.state();
    std::vector<std::uint64_t> expect;
    for (int i = 0; i < 8; ++i) expect.push_back(a.next_u64());
    Rng b(0);
    b.set_state(st);
    for (int i = 0; i < 8; ++i) CHECK(b.next_u64() == expect[i]);
  }
}
