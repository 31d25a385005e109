#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "refnet/adam.hpp"
#include "refnet/grad_check.hpp"
#include "refnet/lstm.hpp"
#include "refnet/ops.hpp"

using namespace refnet;

namespace {

TensorPtr rand_tensor(std::vector<int> shape, std::mt19937_64& rng, bool requires_grad = true) {
  auto t = make_tensor(std::move(shape));
  for (double& v : t->values) v = uniform_real(rng, -1.0, 1.0);
  t->requires_grad = requires_grad;
  return t;
}

// Central-difference check of a single op output against its recorded vjp;
// the loss is a fixed random projection of the output so every output entry
// gets a distinct adjoint.
double op_fd_error(const std::function<TensorPtr(Tape*)>& op, const std::vector<TensorPtr>& ins,
                   std::mt19937_64& rng) {
  auto first = op(nullptr);
  std::vector<double> proj(first->values.size());
  for (double& p : proj) p = uniform_real(rng, -1.0, 1.0);
  auto weighted = [&](Tape* tape) {
    auto out = op(tape);
    double acc = 0.0;
    for (int i = 0; i < out->size(); ++i) acc += proj[i] * out->values[i];
    auto loss = make_scalar(acc);
    if (tape) {
      loss->requires_grad = true;
      tape->record(loss, [out, loss, proj] {
        out->ensure_grad();
        for (int i = 0; i < out->size(); ++i) out->grad[i] += proj[i] * loss->grad[0];
      });
    }
    return loss;
  };

  for (auto& in : ins) in->zero_grad();
  Tape tape;
  backward(tape, weighted(&tape));

  const double eps = 1e-6;
  double worst = 0.0;
  for (auto& in : ins) {
    in->ensure_grad();
    for (int i = 0; i < in->size(); ++i) {
      const double saved = in->values[i];
      in->values[i] = saved + eps;
      const double up = weighted(nullptr)->values[0];
      in->values[i] = saved - eps;
      const double down = weighted(nullptr)->values[0];
      in->values[i] = saved;
      const double fd = (up - down) / (2 * eps);
      const double ad = in->grad[i];
      worst = std::max(worst, std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-8}));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax fixtures") {
  auto flat = softmax(nullptr, make_vector({0, 0, 0}));
  for (int i = 0; i < 3; ++i) CHECK(flat->values[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  auto two = softmax(nullptr, make_vector({1, 2}));
  CHECK(two->values[0] == doctest::Approx(0.2689414213699951).epsilon(1e-5));
  CHECK(two->values[1] == doctest::Approx(0.7310585786300049).epsilon(1e-5));

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = rand_tensor({1 + static_cast<int>(rng() % 9)}, rng, false);
    for (double& x : v->values) x *= 50.0;  // exercise the max-subtraction path
    auto s = softmax(nullptr, v);
    double total = 0.0;
    for (double x : s->values) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("tanh is odd at zero") {
  auto z = tanh(nullptr, make_vector({0, 0, 0, 0}));
  for (double v : z->values) CHECK(v == 0.0);
}

TEST_CASE("shape mismatch names both shapes") {
  auto a = make_vector({1, 2});
  auto b = make_vector({1, 2, 3});
  CHECK_THROWS_WITH_AS(add(nullptr, a, b), "add: shape mismatch [2] vs [3]", ConfigError);
  auto m = make_tensor({2, 3});
  CHECK_THROWS_AS(matmul(nullptr, m, make_tensor({2, 2})), ConfigError);
}

TEST_CASE("masked softmax") {
  auto v = make_vector({5.0, 1.0, 3.0});
  std::vector<uint8_t> mask{0, 1, 1};
  auto s = masked_softmax(nullptr, v, mask);
  CHECK(s->values[0] == 0.0);
  CHECK(s->values[1] + s->values[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(masked_softmax(nullptr, v, std::vector<uint8_t>{0, 0, 0}), UsageError);
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum(p) gives all-ones gradient") {
    auto p = make_vector({0.3, -0.7, 2.0});
    p->requires_grad = true;
    Tape tape;
    backward(tape, sum(&tape, p));
    for (double g : p->grad) CHECK(g == 1.0);
  }
  SUBCASE("loss = sum(p (.) p) gives 2p") {
    auto p = make_vector({0.3, -0.7, 2.0});
    p->requires_grad = true;
    Tape tape;
    backward(tape, sum(&tape, hadamard(&tape, p, p)));
    for (int i = 0; i < 3; ++i) CHECK(p->grad[i] == doctest::Approx(2 * p->values[i]));
  }
  SUBCASE("non-scalar loss is a usage error") {
    auto p = make_vector({1.0, 2.0});
    p->requires_grad = true;
    Tape tape;
    auto y = add(&tape, p, p);
    CHECK_THROWS_AS(backward(tape, y), UsageError);
  }
  SUBCASE("repeated backward accumulates") {
    auto p = make_vector({1.0});
    p->requires_grad = true;
    Tape tape;
    auto loss = sum(&tape, hadamard(&tape, p, p));
    backward(tape, loss);
    backward(tape, loss);
    CHECK(p->grad[0] == doctest::Approx(4.0));  // 2p twice
  }
  SUBCASE("untouched parameter keeps exactly zero gradient") {
    auto p = make_vector({1.0, 1.0});
    auto q = make_vector({2.0});
    p->requires_grad = true;
    q->requires_grad = true;
    q->ensure_grad();
    Tape tape;
    backward(tape, sum(&tape, p));
    CHECK(q->grad[0] == 0.0);
  }
}

TEST_CASE("every primitive matches finite differences over 100 seeds") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 2 + static_cast<int>(rng() % 4);
    const int m = 2 + static_cast<int>(rng() % 3);

    {
      auto a = rand_tensor({n}, rng), b = rand_tensor({n}, rng);
      CHECK(op_fd_error([&](Tape* t) { return add(t, a, b); }, {a, b}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return sub(t, a, b); }, {a, b}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return hadamard(t, a, b); }, {a, b}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return minimum(t, a, b); }, {a, b}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return tanh(t, a); }, {a}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return sigmoid(t, a); }, {a}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return softmax(t, a); }, {a}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return concat(t, {a, b}); }, {a, b}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return slice(t, a, 1, n - 1); }, {a}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return pad_to(t, a, n + 3); }, {a}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return sum(t, a); }, {a}, rng) < 1e-4);
    }
    {
      auto a = rand_tensor({n}, rng);
      for (double& v : a->values) v = 0.5 + std::fabs(v);  // log domain
      CHECK(op_fd_error([&](Tape* t) { return log(t, a); }, {a}, rng) < 1e-4);
      auto dist = softmax(nullptr, rand_tensor({n}, rng, false));
      dist->requires_grad = true;
      const int target = static_cast<int>(rng() % n);
      CHECK(op_fd_error([&](Tape* t) { return negative_log_likelihood(t, dist, target); }, {dist},
                        rng) < 1e-4);
    }
    {
      auto A = rand_tensor({m, n}, rng);
      auto B = rand_tensor({n, m}, rng);
      auto x = rand_tensor({n}, rng);
      auto w = rand_tensor({m}, rng);
      auto s = rand_tensor({1}, rng);
      CHECK(op_fd_error([&](Tape* t) { return matmul(t, A, B); }, {A, B}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return matmul(t, A, x); }, {A, x}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return matmul(t, w, A); }, {w, A}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return matmul(t, x, x); }, {x}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return scale(t, x, s); }, {x, s}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return scale_const(t, x, 0.37); }, {x}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return row(t, A, 1); }, {A}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return mean_rows(t, A); }, {A}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return max_rows(t, A); }, {A}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return broadcast_add_row(t, A, x); }, {A, x}, rng) < 1e-4);
      CHECK(op_fd_error([&](Tape* t) { return embedding_lookup(t, A, 0); }, {A}, rng) < 1e-4);
      std::vector<int> ids(m);
      for (int i = 0; i < m; ++i) ids[i] = static_cast<int>(rng() % (m + 2));
      CHECK(op_fd_error([&](Tape* t) { return scatter_sum(t, w, ids, m + 2); }, {w}, rng) < 1e-4);
      auto r1 = rand_tensor({n}, rng), r2 = rand_tensor({n}, rng);
      CHECK(op_fd_error([&](Tape* t) { return stack_rows(t, {r1, r2}); }, {r1, r2}, rng) < 1e-4);
    }
  }
}

TEST_CASE("forward determinism is bitwise") {
  std::mt19937_64 rng(11);
  auto a = rand_tensor({5}, rng, false);
  auto b = rand_tensor({5}, rng, false);
  auto once = hadamard(nullptr, tanh(nullptr, a), sigmoid(nullptr, b));
  auto twice = hadamard(nullptr, tanh(nullptr, a), sigmoid(nullptr, b));
  CHECK(std::memcmp(once->values.data(), twice->values.data(), 5 * sizeof(double)) == 0);
}

TEST_CASE("lstm cell fixtures") {
  std::mt19937_64 rng(1);
  ParameterStore store;

  SUBCASE("zero weights, zero cell is a fixed point") {
    auto cell = make_lstm_cell(store, "z", 3, 4, rng, /*forget_bias=*/0.0);
    for (auto& p : store.all()) std::fill(p.tensor->values.begin(), p.tensor->values.end(), 0.0);
    auto [h, c] = lstm_cell_step(nullptr, make_tensor({3}), make_tensor({4}), make_tensor({4}),
                                 cell);
    for (double v : h->values) CHECK(v == 0.0);
    for (double v : c->values) CHECK(v == 0.0);
  }

  SUBCASE("forget bias +10 carries the cell state through") {
    auto cell = make_lstm_cell(store, "f", 1, 1, rng, /*forget_bias=*/10.0);
    std::fill(cell.W->values.begin(), cell.W->values.end(), 0.0);
    std::fill(cell.U->values.begin(), cell.U->values.end(), 0.0);
    auto c_prev = make_vector({0.7});
    auto [h, c] = lstm_cell_step(nullptr, make_vector({0.0}), make_vector({0.0}), c_prev, cell);
    CHECK(c->values[0] == doctest::Approx(0.6999682214919083).epsilon(1e-12));
    (void)h;
  }

  SUBCASE("1-dimensional handpicked weights") {
    // Oracle values scripted by hand before the implementation:
    // x=0.5, h=0.1, c=0.2, (W,U,b) = i:(0.1,0.2,0.3) f:(-0.1,0.4,1.0)
    // g:(0.5,-0.3,0.0) o:(0.2,0.1,-0.2)
    auto cell = make_lstm_cell(store, "h", 1, 1, rng, 0.0);
    cell.W->values = {0.1, -0.1, 0.5, 0.2};
    cell.U->values = {0.2, 0.4, -0.3, 0.1};
    cell.b->values = {0.3, 1.0, 0.0, -0.2};
    auto [h, c] =
        lstm_cell_step(nullptr, make_vector({0.5}), make_vector({0.1}), make_vector({0.2}), cell);
    CHECK(c->values[0] == doctest::Approx(0.273879135932774).epsilon(1e-12));
    CHECK(h->values[0] == doctest::Approx(0.12760670185760065).epsilon(1e-12));
  }

  SUBCASE("dimension mismatch is a configuration error") {
    auto cell = make_lstm_cell(store, "d", 3, 4, rng);
    CHECK_THROWS_AS(
        lstm_cell_step(nullptr, make_tensor({2}), make_tensor({4}), make_tensor({4}), cell),
        ConfigError);
  }
}

TEST_CASE("lstm gradients match finite differences") {
  std::mt19937_64 rng(42);
  ParameterStore store;
  auto cell = make_lstm_cell(store, "g", 3, 2, rng);
  auto x = rand_tensor({3}, rng, false);
  auto h0 = rand_tensor({2}, rng, false);
  auto c0 = rand_tensor({2}, rng, false);
  auto loss_fn = [&](Tape* tape) {
    auto [h, c] = lstm_cell_step(tape, x, h0, c0, cell);
    return sum(tape, hadamard(tape, h, c));
  };
  CHECK(grad_check(loss_fn, store, 1e-5) < 1e-6);
}

TEST_CASE("grad_check preconditions") {
  ParameterStore store;
  std::mt19937_64 rng(3);
  auto w = store.create("w", {2}, {Init::UniformFanIn}, rng);
  auto loss_fn = [&](Tape* tape) { return sum(tape, w); };
  CHECK(grad_check(loss_fn, store, 1e-5) < 1e-8);  // exact for linear
  CHECK_THROWS_AS(grad_check(loss_fn, store, 0.0), UsageError);
  CHECK_THROWS_AS(grad_check(loss_fn, store, 0.5), UsageError);

  int calls = 0;
  auto nondet = [&](Tape* tape) {
    (void)tape;
    return make_scalar(static_cast<double>(++calls));
  };
  CHECK_THROWS_AS(grad_check(nondet, store, 1e-5), UsageError);
}

TEST_CASE("adam") {
  ParameterStore store;
  std::mt19937_64 rng(5);
  auto w = store.create("w", {3}, {Init::UniformFanIn}, rng);
  AdamState adam;

  SUBCASE("zero gradient leaves parameters unchanged") {
    const auto before = w->values;
    store.zero_grads();
    adam_step(store, adam, 0.0004);
    CHECK(w->values == before);
  }

  SUBCASE("first step moves by about lr in the gradient sign") {
    store.zero_grads();
    w->grad = {0.37, -0.02, 1.4};
    const auto before = w->values;
    adam_step(store, adam, 0.0004);
    for (int i = 0; i < 3; ++i) {
      const double moved = before[i] - w->values[i];
      CHECK(std::fabs(moved) == doctest::Approx(0.0004).epsilon(1e-4));
      CHECK(moved * w->grad[i] > 0.0);
    }
  }

  SUBCASE("missing gradient is a usage error") {
    w->grad.clear();
    CHECK_THROWS_AS(adam_step(store, adam, 0.0004), UsageError);
  }
}

TEST_CASE("gradient clipping") {
  ParameterStore store;
  std::mt19937_64 rng(5);
  auto w = store.create("w", {2}, {Init::Zeros}, rng);
  store.zero_grads();
  w->grad = {30.0, 40.0};  // norm 50
  const double norm = clip_global_norm(store, 5.0);
  CHECK(norm == doctest::Approx(50.0));
  CHECK(w->grad[0] == doctest::Approx(3.0));
  CHECK(w->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("duplicate parameter names rejected") {
  ParameterStore store;
  std::mt19937_64 rng(5);
  store.create("w", {2}, {Init::Zeros}, rng);
  CHECK_THROWS_AS(store.create("w", {2}, {Init::Zeros}, rng), UsageError);
}
